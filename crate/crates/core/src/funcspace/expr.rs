use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, Error, Result};
use crate::geometry::{Point, Space};
use crate::moduli::Modulus;

/// Radial retraction collapsing `B(center, delta)` to `center` and fixing
/// everything outside `B(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetractionParams {
    pub center: Point,
    pub delta: f64,
    pub radius: f64,
}

impl RetractionParams {
    pub fn new(center: Point, delta: f64, radius: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < radius && radius.is_finite()) {
            return domain(format!("retraction needs 0 < δ < r, got δ = {delta}, r = {radius}"));
        }
        Ok(RetractionParams { center, delta, radius })
    }

    /// `r / (r − δ)`
    pub fn lipschitz(&self) -> f64 {
        self.radius / (self.radius - self.delta)
    }

    pub fn apply(&self, space: &Space, x: &Point) -> Point {
        let rho = space.dist(&self.center, x);
        if rho >= self.radius {
            x.clone()
        } else if rho <= self.delta {
            self.center.clone()
        } else {
            let target = self.radius * (rho - self.delta) / (self.radius - self.delta);
            space.along(&self.center, x, target / rho)
        }
    }
}

/// A self-map built from a small expression algebra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum MapExpr {
    Constant {
        point: Point,
    },
    Identity,
    /// `x ↦ (1 − t)·first(x) ⊕ t·second(x)`
    Blend {
        first: Box<MapExpr>,
        second: Box<MapExpr>,
        t: f64,
    },
    /// `x ↦ inner(Φ(x))`
    RetractPrecompose {
        inner: Box<MapExpr>,
        retraction: RetractionParams,
    },
    /// Piece chosen by the distance from `center`; band `i` covers
    /// `[bands[i].start, bands[i + 1].start)` and the last band is unbounded.
    RegionPiecewise {
        center: Point,
        bands: Vec<Band>,
    },
    /// `x ↦ (1 − λ)c ⊕ λx`, extended past `x` when `λ > 1`.
    Dilation {
        center: Point,
        factor: f64,
    },
    /// Nearest-point projection onto the closed ball `B(center, radius)`.
    Clamp {
        center: Point,
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub start: f64,
    pub piece: Piece,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "piece", rename_all = "snake_case")]
pub enum Piece {
    Expr {
        map: MapExpr,
    },
    /// `x ↦ (1 − λ)a ⊕ λb` with `λ = ω(offset − ρ(x, center)) / denom`.
    Slide {
        a: Point,
        b: Point,
        offset: f64,
        denom: f64,
        modulus: Modulus,
    },
}

impl Piece {
    fn slide_ratio(offset: f64, denom: f64, modulus: &Modulus, rho: f64) -> f64 {
        modulus.at((offset - rho).max(0.0)) / denom
    }
}

impl MapExpr {
    pub fn constant(point: Point) -> Self {
        MapExpr::Constant { point }
    }

    pub fn blend(first: MapExpr, second: MapExpr, t: f64) -> Self {
        MapExpr::Blend { first: Box::new(first), second: Box::new(second), t }
    }

    pub fn retract(inner: MapExpr, retraction: RetractionParams) -> Self {
        MapExpr::RetractPrecompose { inner: Box::new(inner), retraction }
    }

    pub fn region(center: Point, bands: Vec<(f64, Piece)>) -> Result<Self> {
        let m = MapExpr::RegionPiecewise {
            center,
            bands: bands.into_iter().map(|(start, piece)| Band { start, piece }).collect(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks parameter ranges and band layout throughout the tree.
    pub fn validate(&self) -> Result<()> {
        match self {
            MapExpr::Constant { .. } | MapExpr::Identity => Ok(()),
            MapExpr::Blend { first, second, t } => {
                if !(0.0..=1.0).contains(t) {
                    return domain(format!("blend parameter {t} outside [0, 1]"));
                }
                first.validate()?;
                second.validate()
            }
            MapExpr::RetractPrecompose { inner, retraction } => {
                RetractionParams::new(retraction.center.clone(), retraction.delta, retraction.radius)?;
                inner.validate()
            }
            MapExpr::RegionPiecewise { bands, .. } => {
                if bands.first().map(|b| b.start) != Some(0.0) {
                    return Err(Error::Invariant("bands must start at distance 0".into()));
                }
                if bands.windows(2).any(|w| !(w[1].start > w[0].start) || !w[1].start.is_finite()) {
                    return Err(Error::Invariant("band starts must increase strictly".into()));
                }
                for b in bands {
                    match &b.piece {
                        Piece::Expr { map } => map.validate()?,
                        Piece::Slide { denom, .. } if !(*denom > 0.0) => {
                            return domain(format!("slide denominator {denom} must be > 0"));
                        }
                        Piece::Slide { .. } => {}
                    }
                }
                Ok(())
            }
            MapExpr::Dilation { factor, .. } => {
                if !(*factor >= 0.0 && factor.is_finite()) {
                    return domain(format!("dilation factor {factor} must be finite and ≥ 0"));
                }
                Ok(())
            }
            MapExpr::Clamp { radius, .. } => {
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return domain(format!("clamp radius {radius} must be finite and ≥ 0"));
                }
                Ok(())
            }
        }
    }

    /// Hex SHA-256 of the JSON serialisation, truncated to 16 bytes.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("map expressions serialise");
        Sha256::digest(&json)[..16].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Number of nodes, counting pieces.
    pub fn size(&self) -> usize {
        match self {
            MapExpr::Blend { first, second, .. } => 1 + first.size() + second.size(),
            MapExpr::RetractPrecompose { inner, .. } => 1 + inner.size(),
            MapExpr::RegionPiecewise { bands, .. } => {
                1 + bands
                    .iter()
                    .map(|b| match &b.piece {
                        Piece::Expr { map } => map.size(),
                        Piece::Slide { .. } => 1,
                    })
                    .sum::<usize>()
            }
            _ => 1,
        }
    }
}

/// Evaluates `m` at `x`.
pub fn eval_map(space: &Space, m: &MapExpr, x: &Point) -> Result<Point> {
    Ok(match m {
        MapExpr::Constant { point } => point.clone(),
        MapExpr::Identity => x.clone(),
        MapExpr::Blend { first, second, t } => {
            let a = eval_map(space, first, x)?;
            if *t == 0.0 {
                return Ok(a);
            }
            let b = eval_map(space, second, x)?;
            space.along(&a, &b, *t)
        }
        MapExpr::RetractPrecompose { inner, retraction } => eval_map(space, inner, &retraction.apply(space, x))?,
        MapExpr::RegionPiecewise { center, bands } => {
            let rho = space.dist(center, x);
            let i = bands.partition_point(|b| b.start <= rho);
            if i == 0 {
                return Err(Error::Invariant(format!("no band contains distance {rho}")));
            }
            match &bands[i - 1].piece {
                Piece::Expr { map } => eval_map(space, map, x)?,
                Piece::Slide { a, b, offset, denom, modulus } => {
                    space.along(a, b, Piece::slide_ratio(*offset, *denom, modulus, rho))
                }
            }
        }
        MapExpr::Dilation { center, factor } => space.along(center, x, *factor),
        MapExpr::Clamp { center, radius } => {
            let rho = space.dist(center, x);
            if rho <= *radius {
                x.clone()
            } else {
                space.along(center, x, radius / rho)
            }
        }
    })
}

/// Closed ball `B(center, radius)` containing the whole image of `m`, if the
/// structure of `m` provides one.
pub fn image_ball(space: &Space, m: &MapExpr) -> Option<(Point, f64)> {
    match m {
        MapExpr::Constant { point } => Some((point.clone(), 0.0)),
        MapExpr::Clamp { center, radius } => Some((center.clone(), *radius)),
        MapExpr::Identity | MapExpr::Dilation { .. } => None,
        MapExpr::RetractPrecompose { inner, .. } => image_ball(space, inner),
        MapExpr::Blend { first, second, t } => {
            let (ca, ra) = image_ball(space, first)?;
            if *t == 0.0 {
                return Some((ca, ra));
            }
            let (cb, rb) = image_ball(space, second)?;
            // the distance to a fixed point is convex along geodesics
            Some((ca.clone(), (1.0 - t) * ra + t * (space.dist(&ca, &cb) + rb)))
        }
        MapExpr::RegionPiecewise { bands, .. } => {
            let balls: Vec<(Point, f64)> = bands
                .iter()
                .map(|b| match &b.piece {
                    Piece::Expr { map } => image_ball(space, map),
                    Piece::Slide { a, b: end, offset, denom, modulus } => {
                        let ratio = Piece::slide_ratio(*offset, *denom, modulus, b.start);
                        Some((a.clone(), ratio * space.dist(a, end)))
                    }
                })
                .collect::<Option<_>>()?;
            let c = balls[0].0.clone();
            let r = balls.iter().map(|(ci, ri)| space.dist(&c, ci) + ri).fold(0.0, f64::max);
            Some((c, r))
        }
    }
}

/// Upper bound on `sup_x ρ(m1(x), m2(x))` derived from the structure of the
/// two expressions, or `None` when no bound is available.
pub fn sep_bound(space: &Space, m1: &MapExpr, m2: &MapExpr) -> Option<f64> {
    if m1 == m2 {
        return Some(0.0);
    }
    let mut best: Option<f64> = None;
    let mut offer = |v: Option<f64>| {
        if let Some(v) = v {
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    };
    match (m1, m2) {
        (MapExpr::Blend { first: a1, second: b1, t: t1 }, MapExpr::Blend { first: a2, second: b2, t: t2 })
            if t1 == t2 =>
        {
            let (sa, sb) = (sep_bound(space, a1, a2), sep_bound(space, b1, b2));
            if let (Some(sa), Some(sb)) = (sa, sb) {
                offer(Some((1.0 - t1) * sa + t1 * sb));
            }
        }
        (
            MapExpr::RetractPrecompose { inner: i1, retraction: r1 },
            MapExpr::RetractPrecompose { inner: i2, retraction: r2 },
        ) if r1 == r2 => offer(sep_bound(space, i1, i2)),
        (MapExpr::RegionPiecewise { center: c1, bands: b1 }, MapExpr::RegionPiecewise { center: c2, bands: b2 })
            if c1 == c2 && b1.len() == b2.len() && b1.iter().zip(b2).all(|(x, y)| x.start == y.start) =>
        {
            let per: Option<Vec<f64>> = b1.iter().zip(b2).map(|(x, y)| piece_sep(space, x, y)).collect();
            offer(per.map(|v| v.into_iter().fold(0.0, f64::max)));
        }
        _ => {}
    }
    for (m, other) in [(m1, m2), (m2, m1)] {
        if let MapExpr::Blend { first, second, t } = m {
            // ρ((1−t)a ⊕ tb, a) = t·ρ(a, b), then the triangle inequality
            let ab = sep_bound(space, first, second);
            if let Some(ab) = ab {
                if let Some(ao) = sep_bound(space, first, other) {
                    offer(Some(t * ab + ao));
                }
                if let Some(bo) = sep_bound(space, second, other) {
                    offer(Some((1.0 - t) * ab + bo));
                }
            }
        }
        if let MapExpr::RegionPiecewise { bands, .. } = m {
            let per: Option<Vec<f64>> = bands
                .iter()
                .map(|b| match &b.piece {
                    Piece::Expr { map } => sep_bound(space, map, other),
                    Piece::Slide { .. } => {
                        let (c, r) = slide_ball(space, b)?;
                        let (co, ro) = image_ball(space, other)?;
                        Some(space.dist(&c, &co) + r + ro)
                    }
                })
                .collect();
            offer(per.map(|v| v.into_iter().fold(0.0, f64::max)));
        }
    }
    if let (Some((c1, r1)), Some((c2, r2))) = (image_ball(space, m1), image_ball(space, m2)) {
        offer(Some(space.dist(&c1, &c2) + r1 + r2));
    }
    best
}

fn slide_ball(space: &Space, band: &Band) -> Option<(Point, f64)> {
    match &band.piece {
        Piece::Slide { a, b, offset, denom, modulus } => {
            Some((a.clone(), Piece::slide_ratio(*offset, *denom, modulus, band.start) * space.dist(a, b)))
        }
        Piece::Expr { .. } => None,
    }
}

fn piece_sep(space: &Space, x: &Band, y: &Band) -> Option<f64> {
    match (&x.piece, &y.piece) {
        (Piece::Expr { map: a }, Piece::Expr { map: b }) => sep_bound(space, a, b),
        _ if x.piece == y.piece => Some(0.0),
        _ => {
            let ball = |b: &Band| match &b.piece {
                Piece::Expr { map } => image_ball(space, map),
                Piece::Slide { .. } => slide_ball(space, b),
            };
            let (c1, r1) = ball(x)?;
            let (c2, r2) = ball(y)?;
            Some(space.dist(&c1, &c2) + r1 + r2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(x: f64) -> Point {
        Point::euclidean(vec![x])
    }

    #[test]
    fn eval_examples() {
        let sp = Space::euclidean(1);
        assert_eq!(eval_map(&sp, &MapExpr::Identity, &line(3.0)).unwrap(), line(3.0));
        let m = MapExpr::blend(MapExpr::Identity, MapExpr::constant(line(4.0)), 0.25);
        assert_eq!(eval_map(&sp, &m, &line(0.0)).unwrap(), line(1.0));
        let half = MapExpr::Dilation { center: line(0.0), factor: 0.5 };
        assert_eq!(eval_map(&sp, &half, &line(3.0)).unwrap(), line(1.5));
        let c = MapExpr::Clamp { center: line(0.0), radius: 1.0 };
        assert_eq!(eval_map(&sp, &c, &line(-3.0)).unwrap(), line(-1.0));
        assert_eq!(eval_map(&sp, &c, &line(0.5)).unwrap(), line(0.5));
    }

    #[test]
    fn retraction_examples() {
        let sp = Space::euclidean(1);
        let phi = RetractionParams::new(line(0.0), 1.0, 2.0).unwrap();
        assert_eq!(phi.apply(&sp, &line(1.5)), line(1.0));
        assert_eq!(phi.apply(&sp, &line(0.5)), line(0.0));
        assert_eq!(phi.apply(&sp, &line(5.0)), line(5.0));
        assert_eq!(phi.lipschitz(), 2.0);
        assert!(RetractionParams::new(line(0.0), 2.0, 2.0).is_err());
    }

    #[test]
    fn region_slide_hits_endpoint_at_center() {
        let sp = Space::euclidean(1);
        let w = Modulus::linear(1.0).unwrap();
        let h = MapExpr::region(
            line(10.0),
            vec![
                (0.0, Piece::Slide { a: line(0.0), b: line(1.0), offset: 1.0, denom: 1.0, modulus: w }),
                (1.0, Piece::Expr { map: MapExpr::constant(line(0.0)) }),
            ],
        )
        .unwrap();
        assert_eq!(eval_map(&sp, &h, &line(10.0)).unwrap(), line(1.0));
        assert_eq!(eval_map(&sp, &h, &line(10.5)).unwrap(), line(0.5));
        assert_eq!(eval_map(&sp, &h, &line(20.0)).unwrap(), line(0.0));
        assert!(MapExpr::region(line(0.0), vec![(1.0, Piece::Expr { map: MapExpr::Identity })]).is_err());
    }

    #[test]
    fn band_lookup_failure_is_invariant_breach() {
        let sp = Space::euclidean(1);
        let bad = MapExpr::RegionPiecewise {
            center: line(0.0),
            bands: vec![Band { start: 1.0, piece: Piece::Expr { map: MapExpr::Identity } }],
        };
        assert!(matches!(eval_map(&sp, &bad, &line(0.5)), Err(Error::Invariant(_))));
    }

    #[test]
    fn structural_bounds() {
        let sp = Space::euclidean(1);
        let f = MapExpr::Clamp { center: line(0.0), radius: 1.0 };
        let g = MapExpr::blend(f.clone(), MapExpr::constant(line(0.0)), 0.25);
        assert_eq!(image_ball(&sp, &g), Some((line(0.0), 0.75)));
        assert_eq!(sep_bound(&sp, &f, &g), Some(0.25));
        assert_eq!(sep_bound(&sp, &MapExpr::constant(line(0.0)), &MapExpr::constant(line(0.7))), Some(0.7));
        assert_eq!(sep_bound(&sp, &MapExpr::Identity, &MapExpr::Identity), Some(0.0));
        assert_eq!(sep_bound(&sp, &MapExpr::Identity, &MapExpr::constant(line(0.0))), None);
        let h = MapExpr::blend(g.clone(), MapExpr::constant(line(0.5)), 0.1);
        let s = sep_bound(&sp, &f, &h).unwrap();
        assert!(s <= 0.25 + 0.1 * 1.25 + 1e-12, "{s}");
    }

    #[test]
    fn json_round_trip_and_hash() {
        let w = Modulus::truncated_linear(1.0, 2.0).unwrap();
        let h = MapExpr::region(
            Point::hub(),
            vec![
                (
                    0.0,
                    Piece::Slide {
                        a: Point::hub(),
                        b: Point::star(1, 1.0).unwrap(),
                        offset: 1.0,
                        denom: 1.0,
                        modulus: w,
                    },
                ),
                (
                    1.0,
                    Piece::Expr {
                        map: MapExpr::retract(
                            MapExpr::Identity,
                            RetractionParams::new(Point::hub(), 1.0, 3.0).unwrap(),
                        ),
                    },
                ),
            ],
        )
        .unwrap();
        let json = serde_json::to_string(&h).unwrap();
        let back: MapExpr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.content_hash(), h.content_hash());
        assert_eq!(h.content_hash().len(), 32);
        assert_ne!(h.content_hash(), MapExpr::Identity.content_hash());
    }
}
