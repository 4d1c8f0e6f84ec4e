use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::estimate::SampleDomain;
use super::expr::{eval_map, sep_bound, MapExpr};
use super::nets::{BallNet, DEFAULT_NET_CAP};
use crate::error::{domain, Error, Result};
use crate::geometry::{Point, Space};
use crate::moduli::Modulus;
use crate::par;

/// Closed interval `[lo, hi]` known to contain a quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DOptions {
    /// Number of series terms `N`; the tail contributes `[0, 2^{−N}]`.
    pub terms: u32,
    pub mesh: f64,
    pub net_cap: usize,
}

impl Default for DOptions {
    fn default() -> Self {
        DOptions { terms: 12, mesh: 1e-3, net_cap: DEFAULT_NET_CAP }
    }
}

const BLOCK: usize = 4096;

fn clipped(space: &Space, m1: &MapExpr, m2: &MapExpr, x: &Point) -> Result<f64> {
    Ok(space.dist(&eval_map(space, m1, x)?, &eval_map(space, m2, x)?).min(1.0))
}

/// Enclosure of `d(m1, m2) = Σ 2^{−n} sup_{ρ(x, x₀) ≤ n} min{1, ρ(m1(x), m2(x))}`
/// for maps in `C_ω`. Each ball supremum is bracketed by its maximum over a
/// `mesh`-net and that maximum plus `2ω(mesh)`. A ball whose net would exceed
/// `net_cap` points contributes the trivial bracket `[net max of the previous
/// ball, 1]`.
pub fn metric_d(
    space: &Space,
    m1: &MapExpr,
    m2: &MapExpr,
    x0: &Point,
    omega: &Modulus,
    opts: &DOptions,
) -> Result<Interval> {
    if opts.terms == 0 || !(opts.mesh > 0.0) {
        return domain("metric_d needs at least one term and mesh > 0");
    }
    let slack = 2.0 * omega.at(opts.mesh);
    let (mut lo, mut hi) = (0.0, 0.0);
    let mut prev_max = 0.0f64;
    for n in 1..=opts.terms {
        let w = 0.5f64.powi(n as i32);
        if prev_max >= 1.0 {
            lo += w;
            hi += w;
            continue;
        }
        let (l, h) = match BallNet::new(space, x0, n as f64, opts.mesh, opts.net_cap) {
            Ok(net) => {
                let blocks = par::map_indexed(net.len().div_ceil(BLOCK), |b| -> Result<f64> {
                    let end = (b * BLOCK + BLOCK).min(net.len());
                    let mut mx = 0.0f64;
                    for i in b * BLOCK..end {
                        mx = mx.max(clipped(space, m1, m2, &net.point(i))?);
                    }
                    Ok(mx)
                });
                let mut mx = prev_max;
                for b in blocks {
                    mx = mx.max(b?);
                }
                (mx, (mx + slack).min(1.0))
            }
            Err(Error::Infeasible(_)) => (prev_max, 1.0),
            Err(e) => return Err(e),
        };
        prev_max = l;
        lo += w * l;
        hi += w * h;
    }
    Ok(Interval { lo, hi: hi + 0.5f64.powi(opts.terms as i32) })
}

/// Enclosure of `d_∞(m1, m2) = sup_x ρ(m1(x), m2(x))`. The lower end is a
/// sampled maximum over `domains`; the upper end comes from the structure of
/// the expressions or, for maps in `C_ω` with `ω` bounded by `Ω`, from
/// `Ω + ρ(m1(x₀), m2(x₀)) + Ω`.
pub fn metric_dinf(
    space: &Space,
    m1: &MapExpr,
    m2: &MapExpr,
    omega: &Modulus,
    samples: usize,
    seed: u64,
    domains: &[SampleDomain],
) -> Result<Interval> {
    let base = &space.base;
    let at_base = space.dist(&eval_map(space, m1, base)?, &eval_map(space, m2, base)?);
    let hi = match sep_bound(space, m1, m2) {
        Some(h) => h,
        None => match omega.sup() {
            Some(cap) => 2.0 * cap + at_base,
            None => {
                return Err(Error::Infeasible(
                    "no bound on the displacement between the maps and ω is unbounded".into(),
                ))
            }
        },
    };
    let mut lo = at_base;
    if !domains.is_empty() {
        let chunks = par::chunks(seed, samples, |rng, _, len| -> Result<f64> {
            let mut mx = 0.0f64;
            for _ in 0..len {
                let x = domains[rng.gen_range(0..domains.len())].sample(space, rng);
                mx = mx.max(space.dist(&eval_map(space, m1, &x)?, &eval_map(space, m2, &x)?));
            }
            Ok(mx)
        });
        for c in chunks {
            lo = lo.max(c?);
        }
    }
    if lo > hi * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::Invariant(format!("sampled displacement {lo} exceeds the structural bound {hi}")));
    }
    Ok(Interval { lo, hi: hi.max(lo) })
}

/// Enclosure of `d_Θ(m1, m2) = Σ 2^{−n} min{1, ρ(m1(θ_n), m2(θ_n))}` from the
/// first `theta.len()` terms.
pub fn metric_dtheta(space: &Space, theta: &[Point], m1: &MapExpr, m2: &MapExpr) -> Result<Interval> {
    let mut lo = 0.0;
    let mut w = 1.0;
    for p in theta {
        w *= 0.5;
        lo += w * clipped(space, m1, m2, p)?;
    }
    Ok(Interval { lo, hi: lo + w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::DenseSequence;

    fn line(x: f64) -> Point {
        Point::euclidean(vec![x])
    }

    #[test]
    fn metric_d_examples() {
        let sp = Space::euclidean(1);
        let w = Modulus::linear(1.0).unwrap();
        let opts = DOptions { terms: 10, mesh: 1e-3, ..Default::default() };
        let same = metric_d(&sp, &MapExpr::Identity, &MapExpr::Identity, &line(0.0), &w, &opts).unwrap();
        assert_eq!(same.lo, 0.0);
        assert!(same.hi <= 2.0 * 1e-3 + 2f64.powi(-10) + 1e-12);
        let (c0, c5) = (MapExpr::constant(line(0.0)), MapExpr::constant(line(0.5)));
        let half = metric_d(&sp, &c0, &c5, &line(0.0), &w, &opts).unwrap();
        assert!(half.contains(0.5), "{half:?}");
        assert!(half.width() <= 2.0 * w.at(1e-3) + 2f64.powi(-10) + 1e-12);
        let sat = metric_d(&sp, &c0, &MapExpr::constant(line(3.0)), &line(0.0), &w, &opts).unwrap();
        assert!(sat.contains(1.0), "{sat:?}");
    }

    #[test]
    fn metric_d_on_half_plane() {
        let sp = Space::half_plane();
        let w = Modulus::linear(1.0).unwrap();
        let f = MapExpr::Clamp { center: sp.base.clone(), radius: 1.0 };
        let g = MapExpr::blend(f.clone(), MapExpr::constant(sp.base.clone()), 0.1);
        let opts = DOptions { terms: 4, mesh: 0.02, ..Default::default() };
        let d = metric_d(&sp, &f, &g, &sp.base, &w, &opts).unwrap();
        // exact value: 0.1·(Σ_{n≤4} 2^{-n}) since every ball contains the unit sphere
        let exact = 0.1 * (1.0 - 2f64.powi(-4));
        assert!(d.lo <= exact + 1e-9 && exact <= d.hi, "{d:?} vs {exact}");
    }

    #[test]
    fn metric_dinf_examples() {
        let sp = Space::euclidean(1);
        let w = Modulus::truncated_linear(1.0, 2.0).unwrap();
        let dom = [SampleDomain::new(line(0.0), 10.0)];
        let (a, b) = (MapExpr::constant(line(0.0)), MapExpr::constant(line(0.7)));
        let d = metric_dinf(&sp, &a, &b, &w, 100, 1, &dom).unwrap();
        assert!((d.lo - 0.7).abs() < 1e-12 && (d.hi - 0.7).abs() < 1e-12);
        let same = metric_dinf(&sp, &MapExpr::Identity, &MapExpr::Identity, &w, 100, 1, &dom).unwrap();
        assert_eq!((same.lo, same.hi), (0.0, 0.0));
        let f = MapExpr::Clamp { center: line(0.0), radius: 2.0 };
        let g = MapExpr::blend(f.clone(), MapExpr::constant(line(0.0)), 0.25);
        let d = metric_dinf(&sp, &f, &g, &w, 1000, 1, &dom).unwrap();
        assert!(d.hi <= 0.25 * 2.0 + 1e-12 && d.lo > 0.49, "{d:?}");
        let lin = Modulus::linear(1.0).unwrap();
        assert!(metric_dinf(&sp, &MapExpr::Identity, &a, &lin, 10, 1, &dom).is_err());
    }

    #[test]
    fn metric_dtheta_examples() {
        let sp = Space::euclidean(1);
        let theta = DenseSequence::Dyadic.points(&sp, 20).unwrap();
        let (c0, c5) = (MapExpr::constant(line(0.0)), MapExpr::constant(line(0.5)));
        let same = metric_dtheta(&sp, &theta, &c0, &c0).unwrap();
        assert_eq!((same.lo, same.hi), (0.0, 2f64.powi(-20)));
        assert!(metric_dtheta(&sp, &theta, &c0, &c5).unwrap().contains(0.5));
        let one = metric_dtheta(&sp, &theta[..1], &c0, &MapExpr::constant(line(2.0))).unwrap();
        assert!(one.lo >= 0.5);
    }
}
