//! Finite nets of closed balls: every point of the ball lies within `mesh` of
//! some net point, and every net point lies in the ball.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::geometry::{half_plane, star, Model, Point, Space};

/// Largest net materialised by default.
pub const DEFAULT_NET_CAP: usize = 4_000_000;

#[derive(Debug, Clone)]
pub struct BallNet {
    kind: Kind,
    len: usize,
}

#[derive(Debug, Clone)]
enum Kind {
    Grid { center: Vec<f64>, radius: f64, step: f64, per_axis: usize },
    Polar { cx: f64, cy: f64, rings: Vec<(f64, usize)>, starts: Vec<usize> },
    Segments { segments: Vec<(u32, f64, f64, usize)>, starts: Vec<usize> },
}

impl BallNet {
    pub fn new(space: &Space, center: &Point, radius: f64, mesh: f64, cap: usize) -> Result<Self> {
        if !(mesh > 0.0) || !(radius >= 0.0) {
            return domain(format!("net needs mesh > 0 and radius ≥ 0, got {mesh}, {radius}"));
        }
        let too_big = |n: f64| {
            Error::Infeasible(format!("net of a radius-{radius} ball at mesh {mesh} needs {n:.3e} points (cap {cap})"))
        };
        let (kind, len) = match (&space.model, center) {
            (Model::Euclidean { dimension }, Point::Euclidean(c)) => {
                let d = *dimension as f64;
                let step = 2.0 * mesh / d.sqrt();
                let per_axis = (2.0 * radius / step).ceil() + 1.0;
                let n = per_axis.powf(d);
                if n > cap as f64 {
                    return Err(too_big(n));
                }
                let per_axis = per_axis as usize;
                let step = if per_axis > 1 { 2.0 * radius / (per_axis - 1) as f64 } else { 0.0 };
                (Kind::Grid { center: c.clone(), radius, step, per_axis }, n as usize)
            }
            (Model::HalfPlane, Point::HalfPlane { x, y }) => {
                let count = (radius / mesh).ceil().max(1.0) as usize;
                let mut rings = vec![(0.0, 1)];
                let mut total = 1.0;
                for i in 1..=count {
                    let r = radius * i as f64 / count as f64;
                    let k = (2.0 * PI * r.sinh() / mesh).ceil().max(3.0);
                    total += k;
                    if total > cap as f64 {
                        return Err(too_big(total));
                    }
                    rings.push((r, k as usize));
                }
                let starts = prefix(rings.iter().map(|r| r.1));
                (Kind::Polar { cx: *x, cy: *y, rings, starts }, total as usize)
            }
            (Model::StarTree { rays }, Point::Star { ray, offset }) => {
                let mut segments = Vec::new();
                let lo = (offset - radius).max(0.0);
                segments.push((*ray, lo, offset + radius));
                if radius > *offset {
                    for k in (0..*rays).filter(|k| k != ray) {
                        segments.push((k, 0.0, radius - offset));
                    }
                }
                let segments: Vec<_> = segments
                    .into_iter()
                    .map(|(k, a, b)| (k, a, b, ((b - a) / (2.0 * mesh)).ceil() as usize + 1))
                    .collect();
                let total: f64 = segments.iter().map(|s| s.3 as f64).sum();
                if total > cap as f64 {
                    return Err(too_big(total));
                }
                let starts = prefix(segments.iter().map(|s| s.3));
                (Kind::Segments { segments, starts }, total as usize)
            }
            _ => return domain("net centre does not belong to the space model"),
        };
        Ok(BallNet { kind, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The `i`-th net point, `i < len()`.
    pub fn point(&self, i: usize) -> Point {
        match &self.kind {
            Kind::Grid { center, radius, step, per_axis } => {
                let mut rest = i;
                let mut v: Vec<f64> = center
                    .iter()
                    .map(|c| {
                        let j = rest % per_axis;
                        rest /= per_axis;
                        c - radius + step * j as f64
                    })
                    .collect();
                let n = v.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
                if n > *radius {
                    let k = radius / n;
                    for (a, c) in v.iter_mut().zip(center) {
                        *a = c + (*a - c) * k;
                    }
                }
                Point::Euclidean(v)
            }
            Kind::Polar { cx, cy, rings, starts } => {
                let r = starts.partition_point(|&s| s <= i) - 1;
                let (rad, k) = rings[r];
                if rad == 0.0 {
                    return Point::HalfPlane { x: *cx, y: *cy };
                }
                let theta = -PI + 2.0 * PI * (i - starts[r]) as f64 / k as f64;
                let (x, y) = half_plane::walk(*cx, *cy, theta, rad);
                Point::HalfPlane { x, y }
            }
            Kind::Segments { segments, starts } => {
                let s = starts.partition_point(|&s| s <= i) - 1;
                let (k, a, b, n) = segments[s];
                let j = i - starts[s];
                let off = if n > 1 { a + (b - a) * j as f64 / (n - 1) as f64 } else { a };
                let (ray, offset) = star::canonical(k, off);
                Point::Star { ray, offset }
            }
        }
    }
}

fn prefix(counts: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut acc = 0;
    counts
        .map(|c| {
            let s = acc;
            acc += c;
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::rng;

    fn covers(space: &Space, center: &Point, radius: f64, mesh: f64) {
        let net = BallNet::new(space, center, radius, mesh, DEFAULT_NET_CAP).unwrap();
        let pts: Vec<Point> = (0..net.len()).map(|i| net.point(i)).collect();
        for p in &pts {
            assert!(space.dist(center, p) <= radius + 1e-9, "{p:?} outside the ball");
        }
        let mut r = rng(5);
        for _ in 0..300 {
            let x = space.sample_ball(center, radius, &mut r);
            let best = pts.iter().map(|p| space.dist(p, &x)).fold(f64::INFINITY, f64::min);
            assert!(best <= mesh + 1e-9, "{x:?} is {best} from the net");
        }
    }

    #[test]
    fn nets_cover_balls() {
        covers(&Space::euclidean(1), &Point::euclidean(vec![0.3]), 2.0, 0.1);
        covers(&Space::euclidean(2), &Point::euclidean(vec![0.0, 1.0]), 1.5, 0.1);
        covers(&Space::half_plane(), &Point::half_plane(0.2, 1.3).unwrap(), 1.5, 0.1);
        covers(&Space::star_tree(3), &Point::hub(), 2.0, 0.1);
        covers(&Space::star_tree(3), &Point::star(2, 0.5).unwrap(), 2.0, 0.1);
        covers(&Space::star_tree(3), &Point::star(1, 5.0).unwrap(), 2.0, 0.1);
    }

    #[test]
    fn oversized_net_is_infeasible() {
        let err = BallNet::new(&Space::euclidean(3), &Point::euclidean(vec![0.0; 3]), 100.0, 1e-3, 1000);
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }
}
