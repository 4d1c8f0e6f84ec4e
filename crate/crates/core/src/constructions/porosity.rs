use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{ConstructionRecord, RecordKind};
use crate::error::{domain, Error, Result};
use crate::funcspace::{eval_map, image_ball, sep_bound, MapExpr, Piece, SampleDomain};
use crate::geometry::{Point, Space};
use crate::moduli::Modulus;
use crate::par::{self, Rng};

/// Centre `g` of a ball `B(g, αε) ⊆ B(f, ε) ∩ R(s)` in `(C_ω^b, d_∞)`.
///
/// `Ω` is replaced by the structural bound `2r` on the diameter of `f(X)`
/// (capped by sup ω), which only shrinks `γ`, `α` and `ε₀`. When that bound
/// is 0 the map is constant and the constant case applies.
pub fn porosity_center(space: &Space, omega: &Modulus, f: &MapExpr, s: f64, eps: f64) -> Result<ConstructionRecord> {
    f.validate()?;
    if !(s > 0.0) || !(eps > 0.0) {
        return domain(format!("porosity needs s > 0 and ε > 0, got s = {s}, ε = {eps}"));
    }
    let diam = image_ball(space, f).map(|(_, r)| 2.0 * r);
    let big_omega = match (diam, omega.sup()) {
        (Some(d), Some(c)) => d.min(c),
        (Some(d), None) => d,
        (None, Some(c)) => c,
        (None, None) => {
            return Err(Error::Misuse("f has no displacement bound; it is not in C_ω^b".into()));
        }
    };
    let x0 = &space.base;
    let ws = omega.at(s);
    let mut rec = ConstructionRecord::new(RecordKind::Porosity, space, omega, f, s, eps);
    rec.omega_sup = Some(big_omega);
    if big_omega > 0.0 {
        let eps0 = 2.0 * big_omega;
        if eps > eps0 {
            return domain(format!("ε = {eps} exceeds ε₀ = {eps0}"));
        }
        let gamma = eps / (2.0 * big_omega);
        rec.eps0 = Some(eps0);
        rec.gamma = Some(gamma);
        rec.alpha = Some((0.5f64).min(ws / (8.0 * big_omega)));
        rec.rakotch = Some(1.0 - gamma / 2.0);
        rec.g = Some(MapExpr::blend(f.clone(), MapExpr::constant(eval_map(space, f, x0)?), gamma));
    } else {
        let eps0 = ws / 4.0;
        if eps > eps0 {
            return domain(format!("ε = {eps} exceeds ε₀ = {eps0}"));
        }
        rec.eps0 = Some(eps0);
        rec.alpha = Some(1.0);
        rec.rakotch = Some(0.5);
        rec.g = Some(f.clone());
    }
    Ok(rec.seal())
}

/// `h' = (1 − u)g ⊕ u·m` with `m ∈ C_ω^b` and `u·sep(g, m) < αε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PorosityNeighbour {
    pub map: MapExpr,
    pub family: String,
    pub u: f64,
    /// Certified upper bound on `d_∞(g, h')`.
    pub dinf_hi: f64,
    /// Where the perturbation is concentrated, if anywhere.
    pub focus: Option<Point>,
}

/// Samples the `index`-th neighbour: index mod 3 selects a constant map, `f`
/// itself, or a map sliding from `A` near `g(c)` to `B` with `ρ(A, B) ≤ ω(s)`
/// over distance `s` from a random centre `c`; such a slide is in `C_ω` by
/// concavity. `alpha` defaults to the record's α.
pub fn porosity_neighbour(
    space: &Space,
    rec: &ConstructionRecord,
    index: usize,
    alpha: Option<f64>,
    rng: &mut Rng,
) -> Result<PorosityNeighbour> {
    let g = ConstructionRecord::need(&rec.g, "g")?;
    let alpha = match alpha {
        Some(a) => a,
        None => ConstructionRecord::need(&rec.alpha, "alpha")?,
    };
    let big_omega = rec.omega_sup.unwrap_or(0.0);
    let x0 = &rec.x0;
    let gx0 = eval_map(space, &g, x0)?;
    let reach = 2.0 * big_omega + rec.s;
    let (family, m, focus) = match index % 3 {
        0 => ("constant", MapExpr::constant(space.sample_ball(&gx0, reach, rng)), None),
        1 => ("original", rec.f.clone(), None),
        _ => {
            let l = rec.s;
            let c = space.sample_ball(x0, 2.0 * l + big_omega, rng);
            let gc = eval_map(space, &g, &c)?;
            let a = if rng.gen::<bool>() { gc } else { space.sample_ball(&gc, rec.modulus.at(l) / 2.0, rng) };
            let spread = if rng.gen::<bool>() { 1.0 } else { rng.gen::<f64>() };
            let b = space.sample_sphere(&a, rec.modulus.at(l) * spread, rng);
            let slide = Piece::Slide { a: b.clone(), b: a, offset: l, denom: l, modulus: Modulus::Linear { c: 1.0 } };
            let m = MapExpr::region(c.clone(), vec![(0.0, slide), (l, Piece::Expr { map: MapExpr::constant(b) })])?;
            ("slide", m, Some(c))
        }
    };
    let sep = sep_bound(space, &g, &m)
        .ok_or_else(|| Error::Infeasible(format!("no displacement bound between g and the {family} neighbour")))?;
    let kappa = if rng.gen::<bool>() { 1.0 - 1e-9 } else { rng.gen::<f64>() };
    let budget = kappa * alpha * rec.eps;
    let u = if sep == 0.0 { 1.0 } else { (budget / sep).min(1.0) };
    Ok(PorosityNeighbour { map: MapExpr::blend(g, m, u), family: family.to_string(), u, dinf_hi: u * sep, focus })
}

/// Lower bound on `φ_f(s)`: the largest `ρ(f(x), f(y))/ω(ρ(x, y))` over
/// sampled pairs with `ρ(x, y) ≥ s`.
pub fn phi_f_estimate(
    space: &Space,
    omega: &Modulus,
    f: &MapExpr,
    s: f64,
    budget: usize,
    seed: u64,
    domains: &[SampleDomain],
) -> Result<f64> {
    Ok(phi_f_profile(space, omega, f, &[s], budget, seed, domains)?[0])
}

/// [`phi_f_estimate`] on a grid of `s` values from one shared pool of pairs,
/// so the profile is nonincreasing in `s` by construction.
pub fn phi_f_profile(
    space: &Space,
    omega: &Modulus,
    f: &MapExpr,
    grid: &[f64],
    budget: usize,
    seed: u64,
    domains: &[SampleDomain],
) -> Result<Vec<f64>> {
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) {
        return domain("φ_f needs s > 0");
    }
    let default = [SampleDomain::new(space.base.clone(), 4.0 * hi + 4.0)];
    let domains = if domains.is_empty() { &default[..] } else { domains };
    let (la, lb) = (lo.ln(), (8.0 * hi).ln());
    let pool = par::chunks(seed, budget, |rng, _, len| -> Result<Vec<(f64, f64)>> {
        (0..len)
            .map(|_| {
                let x = domains[rng.gen_range(0..domains.len())].sample(space, rng);
                let d = (la + (lb - la) * rng.gen::<f64>()).exp();
                let y = space.sample_sphere(&x, d, rng);
                let d = space.dist(&x, &y);
                let ratio = space.dist(&eval_map(space, f, &x)?, &eval_map(space, f, &y)?) / omega.at(d);
                Ok((d, ratio))
            })
            .collect()
    });
    let mut pairs = Vec::with_capacity(budget);
    for c in pool {
        pairs.extend(c?);
    }
    Ok(grid.iter().map(|&s| pairs.iter().filter(|(d, _)| *d >= s).map(|p| p.1).fold(0.0, f64::max)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(x: f64) -> Point {
        Point::euclidean(vec![x])
    }

    #[test]
    fn clamp_case_scalars() {
        let sp = Space::euclidean(1);
        let w = Modulus::linear(1.0).unwrap();
        let f = MapExpr::Clamp { center: line(0.0), radius: 1.0 };
        let rec = porosity_center(&sp, &w, &f, 1.0, 1.0).unwrap();
        assert_eq!(rec.omega_sup, Some(2.0));
        assert_eq!(rec.gamma, Some(0.25));
        assert_eq!(rec.alpha, Some(1.0 / 16.0));
        assert_eq!(rec.eps0, Some(4.0));
        assert!(porosity_center(&sp, &w, &f, 1.0, 5.0).is_err());
    }

    #[test]
    fn constant_case() {
        let sp = Space::euclidean(1);
        let w = Modulus::linear(1.0).unwrap();
        let f = MapExpr::constant(line(3.0));
        let rec = porosity_center(&sp, &w, &f, 1.0, 0.2).unwrap();
        assert_eq!(rec.g, Some(f.clone()));
        assert_eq!(rec.alpha, Some(1.0));
        assert_eq!(rec.eps0, Some(0.25));
        assert!(matches!(porosity_center(&sp, &w, &MapExpr::Identity, 1.0, 0.2), Err(Error::Misuse(_))));
    }

    #[test]
    fn neighbours_stay_in_the_ball() {
        let sp = Space::euclidean(1);
        let w = Modulus::linear(1.0).unwrap();
        let f = MapExpr::Clamp { center: line(0.0), radius: 1.0 };
        let rec = porosity_center(&sp, &w, &f, 1.0, 1.0).unwrap();
        let mut rng = par::rng(3);
        for i in 0..30 {
            let nb = porosity_neighbour(&sp, &rec, i, None, &mut rng).unwrap();
            assert!(nb.dinf_hi < rec.alpha.unwrap() * rec.eps);
        }
    }

    #[test]
    fn phi_f_examples() {
        let sp = Space::euclidean(1);
        let w = Modulus::linear(1.0).unwrap();
        let c = phi_f_estimate(&sp, &w, &MapExpr::constant(line(1.0)), 1.0, 500, 1, &[]).unwrap();
        assert_eq!(c, 0.0);
        let id = phi_f_estimate(&sp, &w, &MapExpr::Identity, 1.0, 500, 1, &[]).unwrap();
        assert!((id - 1.0).abs() < 1e-9);
        let gamma = 0.3;
        let g = MapExpr::blend(MapExpr::Identity, MapExpr::constant(line(0.0)), gamma);
        let e = phi_f_estimate(&sp, &w, &g, 1.0, 500, 1, &[]).unwrap();
        assert!((e - (1.0 - gamma)).abs() < 1e-9, "{e}");
        let f = MapExpr::Clamp { center: line(0.0), radius: 1.0 };
        let prof = phi_f_profile(&sp, &w, &f, &[0.5, 1.0, 2.0, 4.0], 5000, 2, &[]).unwrap();
        assert!(prof.windows(2).all(|p| p[1] <= p[0]));
    }
}
