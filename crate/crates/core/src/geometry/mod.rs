//! Complete, unbounded hyperbolic metric spaces with a coherent system of
//! geodesics.
//!
//! Three models are provided:
//!
//! * `euclidean`: `ℝⁿ` with affine segments;
//! * `half_plane`: the Poincaré upper half-plane with its circular-arc and
//!   vertical geodesics;
//! * `star_tree`: copies of `[0, ∞)` glued at a hub, with every geodesic
//!   routed through the hub. Distances are sums and differences of offsets,
//!   so this model is exact up to a single rounding per operation.
//!
//! All values are immutable and every operation is pure.

pub(crate) mod half_plane;
pub(crate) mod star;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::par::Rng;

/// A point of one of the models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Point {
    Euclidean(Vec<f64>),
    HalfPlane { x: f64, y: f64 },
    Star { ray: u32, offset: f64 },
}

impl Point {
    pub fn euclidean(coords: impl Into<Vec<f64>>) -> Self {
        Point::Euclidean(coords.into())
    }

    pub fn half_plane(x: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return domain(format!("half-plane point ({x}, {y}) needs finite x and y > 0"));
        }
        Ok(Point::HalfPlane { x, y })
    }

    /// Star-tree point; offset 0 is the hub whatever the ray index.
    pub fn star(ray: u32, offset: f64) -> Result<Self> {
        if !(offset >= 0.0) || !offset.is_finite() {
            return domain(format!("star-tree offset {offset} must be finite and ≥ 0"));
        }
        let (ray, offset) = star::canonical(ray, offset);
        Ok(Point::Star { ray, offset })
    }

    pub fn hub() -> Self {
        Point::Star { ray: 0, offset: 0.0 }
    }

    /// Coordinates as a flat list, used by CSV output and hashing.
    pub fn coords(&self) -> Vec<f64> {
        match self {
            Point::Euclidean(v) => v.clone(),
            Point::HalfPlane { x, y } => vec![*x, *y],
            Point::Star { ray, offset } => vec![*ray as f64, *offset],
        }
    }

    fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }
}

/// Direction of a geodesic ray, in the form natural to each model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Unit vector (euclidean).
    Vector(Vec<f64>),
    /// Rotation angle about the origin relative to the upward vertical (half-plane).
    Heading(f64),
    /// Branch index (star tree). Equal to the origin's own ray means outward.
    Branch(u32),
}

/// Isometric embedding of `[0, ∞)` starting at `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Point,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Euclidean {
        dimension: usize,
    },
    HalfPlane,
    /// Only `rays` branches are used by samplers and nets; every branch index
    /// is a valid point of the space.
    StarTree {
        rays: u32,
    },
}

/// A model together with its base point `x₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Space {
    pub model: Model,
    pub base: Point,
}

impl Space {
    pub fn euclidean(dimension: usize) -> Self {
        assert!(dimension >= 1, "euclidean dimension must be ≥ 1");
        Space { model: Model::Euclidean { dimension }, base: Point::Euclidean(vec![0.0; dimension]) }
    }

    pub fn half_plane() -> Self {
        Space { model: Model::HalfPlane, base: Point::HalfPlane { x: 0.0, y: 1.0 } }
    }

    pub fn star_tree(rays: u32) -> Self {
        assert!(rays >= 2, "a star tree needs at least two configured rays");
        Space { model: Model::StarTree { rays }, base: Point::hub() }
    }

    pub fn with_base(mut self, base: Point) -> Result<Self> {
        self.check(&base)?;
        self.base = base;
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self.model {
            Model::Euclidean { .. } => "euclidean",
            Model::HalfPlane => "half_plane",
            Model::StarTree { .. } => "star_tree",
        }
    }

    /// Checks that `p` is a valid point of this model.
    pub fn check(&self, p: &Point) -> Result<()> {
        match (&self.model, p) {
            (Model::Euclidean { dimension }, Point::Euclidean(v)) => {
                if v.len() != *dimension {
                    return domain(format!("expected {dimension} coordinates, got {}", v.len()));
                }
                if !p.is_finite() {
                    return domain("non-finite euclidean coordinate");
                }
                Ok(())
            }
            (Model::HalfPlane, Point::HalfPlane { x, y }) => Point::half_plane(*x, *y).map(|_| ()),
            (Model::StarTree { .. }, Point::Star { offset, .. }) => {
                if !(*offset >= 0.0) || !offset.is_finite() {
                    return domain(format!("star-tree offset {offset} must be finite and ≥ 0"));
                }
                Ok(())
            }
            _ => domain(format!("point {p:?} does not belong to the {} model", self.name())),
        }
    }

    /// Distance between two valid points.
    #[inline]
    pub fn dist(&self, p: &Point, q: &Point) -> f64 {
        match (p, q) {
            (Point::Euclidean(a), Point::Euclidean(b)) => {
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            }
            (Point::HalfPlane { x: x1, y: y1 }, Point::HalfPlane { x: x2, y: y2 }) => {
                half_plane::dist(*x1, *y1, *x2, *y2)
            }
            (Point::Star { ray: r1, offset: a }, Point::Star { ray: r2, offset: b }) => star::dist(*r1, *a, *r2, *b),
            _ => panic!("distance between points of different models"),
        }
    }

    pub fn try_dist(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.dist(p, q))
    }

    /// The geodesic convex combination `(1 − t)p ⊕ tq`, for `t ∈ [0, 1]`.
    #[inline]
    pub fn combine(&self, p: &Point, q: &Point, t: f64) -> Point {
        debug_assert!((0.0..=1.0).contains(&t), "combine parameter {t} outside [0, 1]");
        self.along(p, q, t)
    }

    pub fn try_combine(&self, p: &Point, q: &Point, t: f64) -> Result<Point> {
        if !(0.0..=1.0).contains(&t) {
            return domain(format!("combination parameter {t} outside [0, 1]"));
        }
        self.check(p)?;
        self.check(q)?;
        let out = self.combine(p, q, t);
        if !out.is_finite() {
            return domain("combination leaves the representable range");
        }
        Ok(out)
    }

    /// Point at distance `t·ρ(p, q)` from `p` on the geodesic from `p`
    /// through `q`, for any `t ≥ 0`. For `t > 1` the geodesic is extended past
    /// `q` (in the star tree, past the hub onto a fixed continuation branch).
    pub fn along(&self, p: &Point, q: &Point, t: f64) -> Point {
        if t == 0.0 {
            return p.clone();
        }
        match (p, q) {
            (Point::Euclidean(a), Point::Euclidean(b)) => {
                if t == 1.0 {
                    return q.clone();
                }
                Point::Euclidean(a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect())
            }
            (Point::HalfPlane { x: x1, y: y1 }, Point::HalfPlane { x: x2, y: y2 }) => {
                if x1 == x2 && y1 == y2 {
                    return p.clone();
                }
                if t == 1.0 {
                    return q.clone();
                }
                let d = half_plane::dist(*x1, *y1, *x2, *y2);
                let h = half_plane::heading(*x1, *y1, *x2, *y2);
                let (x, y) = half_plane::walk(*x1, *y1, h, t * d);
                Point::HalfPlane { x, y }
            }
            (Point::Star { ray: r1, offset: a }, Point::Star { ray: r2, offset: b }) => {
                let d = star::dist(*r1, *a, *r2, *b);
                if d == 0.0 {
                    return p.clone();
                }
                if t == 1.0 {
                    return q.clone();
                }
                let (ray, offset) = star::walk(*r1, *a, *r2, *b, t * d);
                Point::Star { ray, offset }
            }
            _ => panic!("combination of points of different models"),
        }
    }

    /// Point at distance `d` along `ray`.
    pub fn ray_point(&self, ray: &Ray, d: f64) -> Point {
        match (&ray.origin, &ray.direction) {
            (Point::Euclidean(o), Direction::Vector(u)) => {
                Point::Euclidean(o.iter().zip(u).map(|(x, e)| x + d * e).collect())
            }
            (Point::HalfPlane { x, y }, Direction::Heading(h)) => {
                let (x, y) = half_plane::walk(*x, *y, *h, d);
                Point::HalfPlane { x, y }
            }
            (Point::Star { ray: r, offset }, Direction::Branch(k)) => {
                let (ray, offset) = star::ray_point(*r, *offset, *k, d);
                Point::Star { ray, offset }
            }
            _ => panic!("ray direction does not match its origin's model"),
        }
    }

    pub fn try_ray_point(&self, ray: &Ray, d: f64) -> Result<Point> {
        if !(d >= 0.0) {
            return domain(format!("ray parameter {d} must be ≥ 0"));
        }
        self.check(&ray.origin)?;
        let ok = match (&self.model, &ray.direction) {
            (Model::Euclidean { dimension }, Direction::Vector(u)) => {
                u.len() == *dimension && (u.iter().map(|e| e * e).sum::<f64>() - 1.0).abs() < 1e-12
            }
            (Model::HalfPlane, Direction::Heading(h)) => h.is_finite(),
            (Model::StarTree { .. }, Direction::Branch(_)) => true,
            _ => false,
        };
        if !ok {
            return domain(format!("invalid direction {:?} for the {} model", ray.direction, self.name()));
        }
        let out = self.ray_point(ray, d);
        if !out.is_finite() {
            return Err(Error::Domain(format!("ray point at distance {d} is not representable")));
        }
        Ok(out)
    }

    /// Deterministic ray from `origin`: `+e₁`, straight up, or outward along
    /// the origin's branch (branch 0 from the hub).
    pub fn default_ray(&self, origin: &Point) -> Ray {
        let direction = match origin {
            Point::Euclidean(v) => {
                let mut e = vec![0.0; v.len()];
                e[0] = 1.0;
                Direction::Vector(e)
            }
            Point::HalfPlane { .. } => Direction::Heading(0.0),
            Point::Star { ray, .. } => Direction::Branch(*ray),
        };
        Ray { origin: origin.clone(), direction }
    }

    /// Ray from `origin` with a random direction. In the star tree the branch
    /// is drawn from the configured rays together with the origin's own ray.
    pub fn random_ray(&self, origin: &Point, rng: &mut Rng) -> Ray {
        let direction = match (&self.model, origin) {
            (Model::Euclidean { dimension }, _) => Direction::Vector(unit_vector(*dimension, rng)),
            (Model::HalfPlane, _) => Direction::Heading(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)),
            (Model::StarTree { rays }, Point::Star { ray, offset }) => {
                let extra = *offset > 0.0 && *ray >= *rays;
                let k = rng.gen_range(0..rays + extra as u32);
                Direction::Branch(if k == *rays { *ray } else { k })
            }
            _ => panic!("origin does not match the space model"),
        };
        Ray { origin: origin.clone(), direction }
    }

    /// Random point with `ρ(center, ·) ≤ radius`. Every open sub-ball of the
    /// closed ball (restricted to configured branches in the star tree) is hit
    /// with positive probability: the direction has full support and the radial
    /// law is `radius·U^{1/n}` (euclidean), `radius·√U` (half-plane) or
    /// `radius·U` (star tree).
    pub fn sample_ball(&self, center: &Point, radius: f64, rng: &mut Rng) -> Point {
        if radius <= 0.0 {
            return center.clone();
        }
        let u: f64 = rng.gen();
        let r = match self.model {
            Model::Euclidean { dimension } => radius * u.powf(1.0 / dimension as f64),
            Model::HalfPlane => radius * u.sqrt(),
            Model::StarTree { .. } => radius * u,
        };
        let ray = self.random_ray(center, rng);
        self.ray_point(&ray, r)
    }

    /// Random point at exact distance `d` from `center`.
    pub fn sample_sphere(&self, center: &Point, d: f64, rng: &mut Rng) -> Point {
        let ray = self.random_ray(center, rng);
        self.ray_point(&ray, d)
    }
}

fn unit_vector(dimension: usize, rng: &mut Rng) -> Vec<f64> {
    if dimension == 1 {
        return vec![if rng.gen::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..dimension).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Geodesic-space operations used by the verification suites. `Space`
/// implements it directly; tests wrap it to build deliberately broken models.
pub trait Geodesic: Sync {
    fn dist(&self, p: &Point, q: &Point) -> f64;
    fn combine(&self, p: &Point, q: &Point, t: f64) -> Point;
    fn ray_point(&self, ray: &Ray, d: f64) -> Point;
    fn random_ray(&self, origin: &Point, rng: &mut Rng) -> Ray;
    fn sample_ball(&self, center: &Point, radius: f64, rng: &mut Rng) -> Point;
    fn base(&self) -> &Point;
    fn label(&self) -> String;
}

impl Geodesic for Space {
    fn dist(&self, p: &Point, q: &Point) -> f64 {
        Space::dist(self, p, q)
    }
    fn combine(&self, p: &Point, q: &Point, t: f64) -> Point {
        Space::combine(self, p, q, t)
    }
    fn ray_point(&self, ray: &Ray, d: f64) -> Point {
        Space::ray_point(self, ray, d)
    }
    fn random_ray(&self, origin: &Point, rng: &mut Rng) -> Ray {
        Space::random_ray(self, origin, rng)
    }
    fn sample_ball(&self, center: &Point, radius: f64, rng: &mut Rng) -> Point {
        Space::sample_ball(self, center, radius, rng)
    }
    fn base(&self) -> &Point {
        &self.base
    }
    fn label(&self) -> String {
        self.name().to_string()
    }
}

/// Space description as it appears in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub model: String,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub base_point: Option<Vec<f64>>,
    /// Number of star-tree branches used by samplers and nets.
    #[serde(default)]
    pub rays: Option<u32>,
}

impl SpaceSpec {
    pub fn build(&self) -> Result<Space> {
        let space = match self.model.as_str() {
            "euclidean" => {
                let dim = self.dimension.unwrap_or(1);
                if dim == 0 {
                    return domain("euclidean dimension must be ≥ 1");
                }
                Space::euclidean(dim)
            }
            "half_plane" | "poincare_half_plane" => Space::half_plane(),
            "star_tree" => {
                let rays = self.rays.unwrap_or(4);
                if rays < 2 {
                    return domain("star_tree needs rays ≥ 2");
                }
                Space::star_tree(rays)
            }
            other => return domain(format!("unknown space model `{other}`")),
        };
        match &self.base_point {
            None => Ok(space),
            Some(c) => {
                let base = match space.model {
                    Model::Euclidean { .. } => Point::euclidean(c.clone()),
                    Model::HalfPlane => match c.as_slice() {
                        [x, y] => Point::half_plane(*x, *y)?,
                        _ => return domain("half-plane base point needs two coordinates"),
                    },
                    Model::StarTree { .. } => match c.as_slice() {
                        [r, o] if *r >= 0.0 && r.fract() == 0.0 => Point::star(*r as u32, *o)?,
                        _ => return domain("star-tree base point is [ray_index, offset]"),
                    },
                };
                space.with_base(base)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::rng;

    fn star(r: u32, o: f64) -> Point {
        Point::star(r, o).unwrap()
    }

    #[test]
    fn distance_examples() {
        let e = Space::euclidean(2);
        assert_eq!(e.dist(&Point::euclidean([0.0, 0.0]), &Point::euclidean([3.0, 4.0])), 5.0);
        let s = Space::star_tree(4);
        assert_eq!(s.dist(&star(1, 2.0), &star(2, 3.0)), 5.0);
        let h = Space::half_plane();
        let d = h.dist(&Point::half_plane(0.0, 1.0).unwrap(), &Point::half_plane(0.0, std::f64::consts::E).unwrap());
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_points_are_domain_errors() {
        assert!(matches!(Point::half_plane(0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(Point::half_plane(1.0, -2.0), Err(Error::Domain(_))));
        assert!(Point::star(1, -1.0).is_err());
        let h = Space::half_plane();
        let bad = Point::HalfPlane { x: 0.0, y: -1.0 };
        assert!(h.try_dist(&bad, &h.base).is_err());
        let e = Space::euclidean(2);
        assert!(e.try_dist(&Point::euclidean([1.0]), &e.base).is_err());
        assert!(e.try_dist(&Point::hub(), &e.base).is_err());
    }

    #[test]
    fn hub_is_canonical() {
        assert_eq!(star(7, 0.0), Point::hub());
    }

    #[test]
    fn combine_examples() {
        let e = Space::euclidean(2);
        let mid = e.try_combine(&Point::euclidean([0.0, 0.0]), &Point::euclidean([2.0, 0.0]), 0.5).unwrap();
        assert_eq!(mid, Point::euclidean([1.0, 0.0]));
        let s = Space::star_tree(4);
        assert_eq!(s.combine(&star(1, 2.0), &star(2, 2.0), 0.75), star(2, 1.0));
        for space in [Space::euclidean(3), Space::half_plane(), Space::star_tree(3)] {
            let mut r = rng(3);
            let p = space.sample_ball(&space.base, 3.0, &mut r);
            let q = space.sample_ball(&space.base, 3.0, &mut r);
            assert_eq!(space.combine(&p, &q, 0.0), p);
            assert_eq!(space.combine(&p, &p, 0.3), p);
        }
        assert!(e.try_combine(&e.base, &e.base, 1.5).is_err());
        assert!(e.try_combine(&e.base, &e.base, -0.1).is_err());
    }

    #[test]
    fn ray_examples() {
        let e = Space::euclidean(2);
        let r = Ray { origin: e.base.clone(), direction: Direction::Vector(vec![1.0, 0.0]) };
        assert_eq!(e.try_ray_point(&r, 7.0).unwrap(), Point::euclidean([7.0, 0.0]));
        assert!(e.try_ray_point(&r, -1.0).is_err());
        let s = Space::star_tree(4);
        let r = Ray { origin: Point::hub(), direction: Direction::Branch(3) };
        assert_eq!(s.ray_point(&r, 2.0), star(3, 2.0));
        let h = Space::half_plane();
        let p = h.ray_point(&h.default_ray(&h.base), 1.0);
        match p {
            Point::HalfPlane { x, y } => {
                assert_eq!(x, 0.0);
                assert!((y - std::f64::consts::E).abs() < 1e-14);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn sample_ball_stays_inside() {
        let e = Space::euclidean(3);
        let mut r = rng(11);
        let worst = (0..10_000).map(|_| e.dist(&e.base, &e.sample_ball(&e.base, 2.5, &mut r))).fold(0.0, f64::max);
        assert!(worst <= 2.5);
        assert_eq!(e.sample_ball(&e.base, 0.0, &mut r), e.base);
        let s = Space::star_tree(3);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..200 {
            if let Point::Star { ray, offset } = s.sample_ball(&s.base, 1.0, &mut r) {
                if offset > 0.0 {
                    seen.insert(ray);
                }
            }
        }
        assert!(seen.len() >= 2);
    }

    #[test]
    fn spec_builds_models() {
        let spec =
            SpaceSpec { model: "star_tree".into(), dimension: None, base_point: Some(vec![2.0, 1.5]), rays: Some(3) };
        let s = spec.build().unwrap();
        assert_eq!(s.base, star(2, 1.5));
        let bad =
            SpaceSpec { model: "half_plane".into(), dimension: None, base_point: Some(vec![0.0, -1.0]), rays: None };
        assert!(bad.build().is_err());
    }
}
