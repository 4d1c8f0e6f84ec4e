use serde::{Deserialize, Serialize};

use super::ConstructionRecord;
use crate::error::{domain, Error, Result};
use crate::funcspace::{eval_map, Band, MapExpr, Piece};
use crate::geometry::{Point, Space};
use crate::moduli::Modulus;

/// Smallest positive integer `q` with `y₀, z₀` in the open ball `B(x₀, q)`.
pub fn step2_q(space: &Space, x0: &Point, y0: &Point, z0: &Point) -> u32 {
    let far = space.dist(x0, y0).max(space.dist(x0, z0));
    far.floor() as u32 + 1
}

/// `η = 2^{−q} min{1, ω(s)μ/4}`. Underflows to 0 for very large `q`; see
/// [`step2_eta_log2`].
pub fn step2_eta(omega: &Modulus, s: f64, mu: f64, q: u32) -> f64 {
    0.5f64.powi(q as i32) * (omega.at(s) * mu / 4.0).min(1.0)
}

/// `log₂ η`
pub fn step2_eta_log2(omega: &Modulus, s: f64, mu: f64, q: u32) -> f64 {
    -(q as f64) + (omega.at(s) * mu / 4.0).min(1.0).log2()
}

/// A map `h' = (1 − u)h ⊕ u·m` where `m` agrees with `h` outside `B(z₀, r)`
/// and is constant on it, together with a certified bound on `d(h, h')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step2Neighbour {
    pub map: MapExpr,
    pub radius: f64,
    pub u: f64,
    /// `log₂` of an upper bound on `d(h, h')`.
    pub log2_d_bound: f64,
}

/// Builds the neighbour flattening `h` on `B(z₀, r)`, `0 < r < s`, with blend
/// weight `u = min(1, κ·u_max)` where `u_max` is the largest weight whose
/// certified distance bound stays below `2^{log2_radius}`.
///
/// `m` is constant on `B(z₀, r)` with the value `h` takes on the sphere
/// `S(z₀, r)`, so `ω_m ≤ ω_h`; `h'` differs from `h` only on `B(z₀, r)`, hence
/// only series terms with `n ≥ ⌈ρ(x₀, z₀) − r⌉` contribute to `d(h, h')`.
pub fn step2_neighbour(
    space: &Space,
    rec: &ConstructionRecord,
    r: f64,
    kappa: f64,
    log2_radius: f64,
) -> Result<Step2Neighbour> {
    let h = ConstructionRecord::need(&rec.h, "h")?;
    let z0 = ConstructionRecord::need(&rec.z0, "z0")?;
    let MapExpr::RegionPiecewise { center, bands } = &h else {
        return Err(Error::Misuse("Step-1 map is not region-piecewise".into()));
    };
    let Some(Piece::Slide { a, b, offset, denom, modulus }) = bands.first().map(|b| &b.piece) else {
        return Err(Error::Misuse("Step-1 map has no inner slide band".into()));
    };
    if center != &z0 {
        return Err(Error::Misuse("Step-1 map is not centred at z₀".into()));
    }
    let inner_end = bands.get(1).map_or(f64::INFINITY, |b| b.start);
    if !(r > 0.0 && r < inner_end) {
        return domain(format!("flattening radius {r} must lie in (0, {inner_end})"));
    }
    if !(0.0..1.0).contains(&kappa) {
        return domain(format!("κ = {kappa} must lie in [0, 1)"));
    }
    let v_r = space.along(a, b, modulus.at(offset - r) / denom);
    let d_max = space.dist(&eval_map(space, &h, &z0)?, &v_r) * (1.0 + 1e-12);
    let reach = space.dist(&rec.x0, &z0) - r;
    let n0 = (reach - 1e-9 * reach.abs().max(1.0)).ceil().max(1.0);
    let (u, log2_d) = if d_max == 0.0 {
        (0.0, f64::NEG_INFINITY)
    } else {
        let log2_umax = log2_radius + (n0 - 1.0) - d_max.log2();
        let u = (kappa * log2_umax.exp2()).min(1.0);
        (u, -(n0 - 1.0) + (u * d_max).min(1.0).log2())
    };
    let mut m_bands = vec![
        Band { start: 0.0, piece: Piece::Expr { map: MapExpr::constant(v_r) } },
        Band { start: r, piece: bands[0].piece.clone() },
    ];
    m_bands.extend(bands[1..].iter().cloned());
    let m = MapExpr::RegionPiecewise { center: center.clone(), bands: m_bands };
    m.validate()?;
    Ok(Step2Neighbour { map: MapExpr::blend(h.clone(), m, u), radius: r, u, log2_d_bound: log2_d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{step1_unbounded, Step1Params};

    #[test]
    fn eta_examples() {
        let w = Modulus::linear(2.0).unwrap();
        assert_eq!(step2_eta(&w, 1.0, 0.5, 3), 0.03125);
        assert_eq!(step2_eta(&w, 10.0, 0.9, 5), 0.5f64.powi(5));
        assert!(step2_eta(&w, 1.0, 1e-3, 3) < step2_eta(&w, 1.0, 1e-2, 3));
        assert!((step2_eta_log2(&w, 1.0, 0.5, 3) - 0.03125f64.log2()).abs() < 1e-12);
        assert_eq!(step2_eta(&w, 1.0, 0.5, 2400), 0.0);
        assert!((step2_eta_log2(&w, 1.0, 0.5, 2400) + 2402.0).abs() < 1e-12);
    }

    #[test]
    fn q_uses_open_balls() {
        let sp = Space::euclidean(1);
        let x0 = Point::euclidean(vec![0.0]);
        assert_eq!(step2_q(&sp, &x0, &Point::euclidean(vec![56.0]), &Point::euclidean(vec![57.0])), 58);
        assert_eq!(step2_q(&sp, &x0, &Point::euclidean(vec![0.2]), &Point::euclidean(vec![-0.3])), 1);
        assert_eq!(step2_q(&sp, &x0, &Point::euclidean(vec![3.5]), &Point::euclidean(vec![2.5])), 4);
    }

    #[test]
    fn neighbour_moves_only_near_z0() {
        let sp = Space::euclidean(1);
        let w = Modulus::linear(1.0).unwrap();
        let rec = step1_unbounded(&sp, &w, &MapExpr::Identity, &Step1Params::new(1.0, 0.5, 0.5)).unwrap();
        let q = step2_q(&sp, &rec.x0, rec.y0.as_ref().unwrap(), rec.z0.as_ref().unwrap());
        let log2_eta = step2_eta_log2(&w, 1.0, 0.5, q);
        let nb = step2_neighbour(&sp, &rec, 0.5, 0.999, log2_eta).unwrap();
        assert!(nb.log2_d_bound < log2_eta);
        assert!(nb.u > 0.0 && nb.u < 1.0);
        let h = rec.h.as_ref().unwrap();
        let z0 = rec.z0.as_ref().unwrap();
        let far = Point::euclidean(vec![z0.coords()[0] - 0.75]);
        assert_eq!(eval_map(&sp, &nb.map, &far).unwrap(), eval_map(&sp, h, &far).unwrap());
        let moved = sp.dist(&eval_map(&sp, &nb.map, z0).unwrap(), &eval_map(&sp, h, z0).unwrap());
        assert!(moved > 0.0 && moved < 0.125);
        assert!(step2_neighbour(&sp, &rec, 1.5, 0.5, log2_eta).is_err());
    }
}
