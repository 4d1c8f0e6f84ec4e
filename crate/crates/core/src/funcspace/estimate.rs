use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::expr::{eval_map, MapExpr};
use crate::error::Result;
use crate::geometry::{Point, Space};
use crate::moduli::Modulus;
use crate::par::{self, Rng};

/// Ball from which sample points are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDomain {
    pub center: Point,
    pub radius: f64,
}

impl SampleDomain {
    pub fn new(center: Point, radius: f64) -> Self {
        SampleDomain { center, radius }
    }

    pub fn sample(&self, space: &Space, rng: &mut Rng) -> Point {
        space.sample_ball(&self.center, self.radius, rng)
    }
}

/// A concrete pair attaining `value = ρ(m(x), m(y))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub pair: Option<(Point, Point)>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Point,
    pub y: Point,
    pub dist: f64,
    /// `ρ(m(x), m(y))`
    pub lhs: f64,
    /// the bound it is compared against
    pub rhs: f64,
}

impl Witness {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Falsification {
    pub trials: usize,
    pub pass: bool,
    /// Pair with the smallest margin `rhs − lhs` seen, violating or not.
    pub worst: Option<Witness>,
}

impl Falsification {
    pub fn worst_margin(&self) -> f64 {
        self.worst.as_ref().map_or(f64::INFINITY, Witness::margin)
    }
}

fn image_dist(space: &Space, m: &MapExpr, x: &Point, y: &Point) -> Result<f64> {
    Ok(space.dist(&eval_map(space, m, x)?, &eval_map(space, m, y)?))
}

fn pull_within(space: &Space, x: &Point, y: Point, s: f64) -> Point {
    let d = space.dist(x, &y);
    if d > s {
        space.along(x, &y, s / d)
    } else {
        y
    }
}

/// Lower bound on `ω_m(s)`: the largest `ρ(m(x), m(y))` over `budget` random
/// pairs with `ρ(x, y) ≤ s` drawn around `domains`, the `hints`, and a local
/// hill-climb started from the best pairs found.
pub fn mod_lower(
    space: &Space,
    m: &MapExpr,
    s: f64,
    budget: usize,
    seed: u64,
    domains: &[SampleDomain],
    hints: &[(Point, Point)],
) -> Result<Estimate> {
    let default = [SampleDomain::new(space.base.clone(), s.max(1.0) * 4.0)];
    let domains = if domains.is_empty() { &default[..] } else { domains };
    let mut best = Estimate { value: 0.0, pair: None, trials: 0 };
    let offer = |best: &mut Estimate, v: f64, x: &Point, y: &Point| {
        if v > best.value || best.pair.is_none() {
            best.value = v;
            best.pair = Some((x.clone(), y.clone()));
        }
    };
    for (x, y) in hints {
        let y = pull_within(space, x, y.clone(), s);
        offer(&mut best, image_dist(space, m, x, &y)?, x, &y);
        best.trials += 1;
    }
    let chunks = par::chunks(seed, budget, |rng, _, len| -> Result<Option<(f64, Point, Point)>> {
        let mut local: Option<(f64, Point, Point)> = None;
        for _ in 0..len {
            let x = domains[rng.gen_range(0..domains.len())].sample(space, rng);
            let y = if rng.gen::<bool>() { space.sample_sphere(&x, s, rng) } else { space.sample_ball(&x, s, rng) };
            let v = image_dist(space, m, &x, &y)?;
            if local.as_ref().is_none_or(|l| v > l.0) {
                local = Some((v, x, y));
            }
        }
        Ok(local)
    });
    for c in chunks {
        if let Some((v, x, y)) = c? {
            offer(&mut best, v, &x, &y);
        }
    }
    best.trials += budget;
    if let Some((x, y)) = best.pair.clone() {
        let steps = (budget / 4).clamp(16, 4000);
        let mut rng = par::rng(par::derive(seed, u64::MAX));
        let (v, x, y) = climb(space, &mut rng, steps, s * 0.5, (best.value, x, y), |x, y| {
            let y = pull_within(space, x, y, s);
            let v = image_dist(space, m, x, &y)?;
            Ok((v, y))
        })?;
        offer(&mut best, v, &x, &y);
        best.trials += steps;
    }
    Ok(best)
}

/// Randomised local ascent: perturbs both points with a shrinking step and
/// keeps strict improvements. `score` may adjust `y` (e.g. to keep a
/// distance constraint) and returns the adjusted point.
fn climb<F>(
    space: &Space,
    rng: &mut Rng,
    steps: usize,
    initial_step: f64,
    start: (f64, Point, Point),
    score: F,
) -> Result<(f64, Point, Point)>
where
    F: Fn(&Point, Point) -> Result<(f64, Point)>,
{
    let (mut v, mut x, mut y) = start;
    let mut step = initial_step;
    let shrink = (1e-6f64).powf(1.0 / steps.max(1) as f64);
    for _ in 0..steps {
        let nx = if rng.gen::<bool>() { space.sample_ball(&x, step, rng) } else { x.clone() };
        let ny = space.sample_ball(&y, step, rng);
        let (nv, ny) = score(&nx, ny)?;
        if nv > v {
            v = nv;
            x = nx;
            y = ny;
        }
        step *= shrink;
    }
    Ok((v, x, y))
}

/// Tests `ρ(m(x), m(y)) ≤ ω(ρ(x, y)) + tol` on `trials` pairs from `pairs`,
/// then hill-climbs from the worst pair looking for a violation.
pub fn check_in_c_omega<G>(
    space: &Space,
    m: &MapExpr,
    omega: &Modulus,
    trials: usize,
    seed: u64,
    tol: f64,
    pairs: G,
) -> Result<Falsification>
where
    G: Fn(&mut Rng) -> (Point, Point) + Sync,
{
    let witness = |x: &Point, y: &Point| -> Result<Witness> {
        let dist = space.dist(x, y);
        Ok(Witness { x: x.clone(), y: y.clone(), dist, lhs: image_dist(space, m, x, y)?, rhs: omega.at(dist) })
    };
    let chunks = par::chunks(seed, trials, |rng, _, len| -> Result<Option<Witness>> {
        let mut worst: Option<Witness> = None;
        for _ in 0..len {
            let (x, y) = pairs(rng);
            let w = witness(&x, &y)?;
            if worst.as_ref().is_none_or(|b| w.margin() < b.margin()) {
                worst = Some(w);
            }
        }
        Ok(worst)
    });
    let mut worst: Option<Witness> = None;
    for c in chunks {
        if let Some(w) = c? {
            if worst.as_ref().is_none_or(|b| w.margin() < b.margin()) {
                worst = Some(w);
            }
        }
    }
    let mut total = trials;
    if let Some(w) = worst.clone() {
        let steps = (trials / 20).clamp(16, 2000);
        let mut rng = par::rng(par::derive(seed, u64::MAX));
        let scale = w.dist.max(1e-3) * 0.5;
        let (_, x, y) = climb(space, &mut rng, steps, scale, (-w.margin(), w.x, w.y), |x, y| {
            let c = witness(x, &y)?;
            Ok((-c.margin(), y))
        })?;
        let climbed = witness(&x, &y)?;
        if climbed.margin() < worst.as_ref().unwrap().margin() {
            worst = Some(climbed);
        }
        total += steps;
    }
    let pass = worst.as_ref().is_none_or(|w| w.margin() >= -tol);
    Ok(Falsification { trials: total, pass, worst })
}

/// Pair generator: `x` from one of `domains`, `y` at a log-uniform distance in
/// `[min_dist, max_dist]` from `x`.
pub fn default_pairs<'a>(
    space: &'a Space,
    domains: &'a [SampleDomain],
    min_dist: f64,
    max_dist: f64,
) -> impl Fn(&mut Rng) -> (Point, Point) + Sync + 'a {
    let (la, lb) = (min_dist.ln(), max_dist.ln());
    move |rng: &mut Rng| {
        let x = domains[rng.gen_range(0..domains.len())].sample(space, rng);
        let d = (la + (lb - la) * rng.gen::<f64>()).exp();
        let y = space.sample_sphere(&x, d, rng);
        (x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(x: f64) -> Point {
        Point::euclidean(vec![x])
    }

    #[test]
    fn mod_lower_examples() {
        let sp = Space::euclidean(1);
        let half = MapExpr::Dilation { center: line(0.0), factor: 0.5 };
        let e = mod_lower(&sp, &half, 2.0, 100_000, 1, &[], &[]).unwrap();
        assert!(e.value >= 0.999 && e.value <= 1.0 + 1e-12, "{}", e.value);
        let c = mod_lower(&sp, &MapExpr::constant(line(1.0)), 2.0, 1000, 1, &[], &[]).unwrap();
        assert_eq!(c.value, 0.0);
        let id = mod_lower(&Space::half_plane(), &MapExpr::Identity, 1.0, 2000, 3, &[], &[]).unwrap();
        assert!(id.value > 0.999 && id.value <= 1.0 + 1e-9, "{}", id.value);
    }

    #[test]
    fn mod_lower_is_monotone_in_budget() {
        let sp = Space::half_plane();
        let m = MapExpr::Clamp { center: sp.base.clone(), radius: 0.7 };
        let mut prev = 0.0;
        for b in [10, 100, 1000] {
            let e = mod_lower(&sp, &m, 1.0, b, 9, &[], &[]).unwrap();
            assert!(e.value + 1e-12 >= prev || b == 10);
            prev = prev.max(e.value);
        }
    }

    #[test]
    fn c_omega_membership_examples() {
        let sp = Space::euclidean(1);
        let w = Modulus::linear(1.0).unwrap();
        let dom = [SampleDomain::new(line(0.0), 10.0)];
        let ok =
            check_in_c_omega(&sp, &MapExpr::Identity, &w, 5000, 2, 1e-9, default_pairs(&sp, &dom, 1e-3, 5.0)).unwrap();
        assert!(ok.pass);
        let double = MapExpr::Dilation { center: line(0.0), factor: 2.0 };
        let bad = check_in_c_omega(&sp, &double, &w, 100, 2, 1e-9, default_pairs(&sp, &dom, 1e-3, 5.0)).unwrap();
        assert!(!bad.pass);
        let wit = bad.worst.unwrap();
        assert!(wit.lhs > wit.rhs);
    }

    #[test]
    fn results_do_not_depend_on_chunking_order() {
        let sp = Space::star_tree(3);
        let m = MapExpr::Clamp { center: Point::hub(), radius: 1.0 };
        let a = mod_lower(&sp, &m, 1.5, 5000, 77, &[], &[]).unwrap();
        let b = mod_lower(&sp, &m, 1.5, 5000, 77, &[], &[]).unwrap();
        assert_eq!(a, b);
    }
}
