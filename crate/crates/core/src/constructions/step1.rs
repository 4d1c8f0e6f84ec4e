use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{ConstructionRecord, RecordKind};
use crate::error::{domain, Error, Result};
use crate::funcspace::{eval_map, MapExpr, Piece, RetractionParams};
use crate::geometry::{Model, Point, Space};
use crate::moduli::Modulus;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step1Params {
    pub s: f64,
    pub mu: f64,
    pub eps: f64,
    pub seed: u64,
    /// Sample size for the image of `g₁` in the bounded construction.
    pub budget: usize,
}

impl Step1Params {
    pub fn new(s: f64, mu: f64, eps: f64) -> Self {
        Step1Params { s, mu, eps, seed: 0, budget: 20_000 }
    }

    fn check(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return domain(format!("s = {} must be > 0", self.s));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return domain(format!("μ = {} must lie in (0, 1)", self.mu));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return domain(format!("ε = {} must be > 0", self.eps));
        }
        if self.budget == 0 {
            return domain("budget must be ≥ 1");
        }
        Ok(())
    }
}

/// Smallest positive integer `p` with `Σ_{n>p} 2^{−n} = 2^{−p} < ε/2`.
pub fn choose_p(eps: f64) -> u32 {
    let mut p = 1;
    while 0.5f64.powi(p as i32) >= eps / 2.0 {
        p += 1;
    }
    p
}

/// Dispatches on whether ω is bounded.
pub fn step1(space: &Space, omega: &Modulus, f: &MapExpr, params: &Step1Params) -> Result<ConstructionRecord> {
    if omega.is_bounded() {
        step1_bounded(space, omega, f, params)
    } else {
        step1_unbounded(space, omega, f, params)
    }
}

fn base_record(
    kind: RecordKind,
    space: &Space,
    omega: &Modulus,
    f: &MapExpr,
    params: &Step1Params,
) -> ConstructionRecord {
    let mut rec = ConstructionRecord::new(kind, space, omega, f, params.s, params.eps);
    rec.mu = Some(params.mu);
    rec.seed = params.seed;
    rec.budget = params.budget;
    rec
}

/// `y₀`: the point at distance `s` from `z₀` towards `x₀`.
fn y0_of(space: &Space, z0: &Point, x0: &Point, s: f64) -> Point {
    space.combine(z0, x0, s / space.dist(z0, x0))
}

pub fn step1_unbounded(
    space: &Space,
    omega: &Modulus,
    f: &MapExpr,
    params: &Step1Params,
) -> Result<ConstructionRecord> {
    params.check()?;
    f.validate()?;
    if omega.is_bounded() {
        return Err(Error::Misuse("the unbounded construction needs an unbounded modulus".into()));
    }
    let (s, mu, eps) = (params.s, params.mu, params.eps);
    let x0 = &space.base;
    let p = choose_p(eps);
    let t = (mu / 4.0).min(eps / (4.0 * omega.at(p as f64)));
    let ws = omega.at(s);
    let m = omega.find_m(ws, t / 2.0).map_err(|e| match e {
        Error::Infeasible(msg) => Error::Misuse(format!("modulus is not unbounded: {msg}")),
        e => e,
    })?;
    let r = (2.0 - t) * (m + s) / t;
    let z0 = space.ray_point(&space.default_ray(x0), p as f64 + r + 1.0);
    let phi = RetractionParams::new(z0.clone(), m + s, r)?;
    let fx0 = eval_map(space, f, x0)?;
    let w0 = space.combine(&eval_map(space, f, &z0)?, &fx0, t);
    let e0 = space.ray_point(&space.default_ray(&w0), ws);
    let g = MapExpr::blend(MapExpr::retract(f.clone(), phi.clone()), MapExpr::constant(fx0), t);
    let h = MapExpr::region(
        z0.clone(),
        vec![
            (0.0, Piece::Slide { a: w0.clone(), b: e0.clone(), offset: s, denom: ws, modulus: omega.clone() }),
            (s, Piece::Expr { map: g.clone() }),
        ],
    )?;
    let mut rec = base_record(RecordKind::Step1Unbounded, space, omega, f, params);
    rec.p = Some(p);
    rec.t = Some(t);
    rec.m = Some(m);
    rec.r = Some(r);
    rec.y0 = Some(y0_of(space, &z0, x0, s));
    rec.z0 = Some(z0);
    rec.w0 = Some(w0);
    rec.e0 = Some(e0);
    rec.retraction = Some(phi);
    rec.g = Some(g);
    rec.h = Some(h);
    Ok(rec.seal())
}

/// `φ̂(x) = max_{y ∈ image} ρ(x, y)` with the index of the first maximiser.
pub fn phi_hat(space: &Space, image: &[Point], x: &Point) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, y) in image.iter().enumerate() {
        let d = space.dist(x, y);
        if d > best.0 {
            best = (d, i);
        }
    }
    best
}

/// Points of `m(X)`: images of `budget` random points from balls around `x₀`
/// and `z₀`, plus images of deterministic points along rays from `x₀`.
pub(crate) fn sample_image(
    space: &Space,
    m: &MapExpr,
    z0: &Point,
    reach: f64,
    budget: usize,
    seed: u64,
) -> Result<Vec<Point>> {
    let x0 = &space.base;
    let far = space.dist(x0, z0) + reach;
    let domains = [(x0.clone(), 1.0), (x0.clone(), 4.0), (x0.clone(), far), (z0.clone(), reach)];
    let mut out = vec![eval_map(space, m, x0)?, eval_map(space, m, z0)?];
    let mut radii = vec![0.25];
    while radii[radii.len() - 1] < far {
        let next = radii[radii.len() - 1] * 2.0;
        radii.push(next);
    }
    let mut rng = par::rng(par::derive(seed, 1));
    let rays: Vec<_> = match space.model {
        Model::StarTree { rays } => (0..rays)
            .map(|k| crate::geometry::Ray { origin: x0.clone(), direction: crate::geometry::Direction::Branch(k) })
            .collect(),
        _ => (0..8).map(|_| space.random_ray(x0, &mut rng)).collect(),
    };
    for ray in &rays {
        for &d in &radii {
            out.push(eval_map(space, m, &space.ray_point(ray, d))?);
        }
    }
    let chunks = par::chunks(par::derive(seed, 2), budget, |rng, _, len| -> Result<Vec<Point>> {
        (0..len)
            .map(|_| {
                let (c, rad) = &domains[rng.gen_range(0..domains.len())];
                eval_map(space, m, &space.sample_ball(c, *rad, rng))
            })
            .collect()
    });
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

pub fn step1_bounded(space: &Space, omega: &Modulus, f: &MapExpr, params: &Step1Params) -> Result<ConstructionRecord> {
    params.check()?;
    f.validate()?;
    let big_omega =
        omega.sup().ok_or_else(|| Error::Misuse("the bounded construction needs a bounded modulus".into()))?;
    let (s, mu, eps) = (params.s, params.mu, params.eps);
    let x0 = &space.base;
    let p = choose_p(eps);
    let t = (mu / 4.0).min(eps / (2.0 * big_omega));
    let s_prime = omega.find_sprime(t, 0.5)?;
    let m = s + 3.0 * s_prime;
    let r = m / t;
    let z0 = space.ray_point(&space.default_ray(x0), p as f64 + r + 1.0);
    let fx0 = eval_map(space, f, x0)?;
    let g1 = MapExpr::blend(f.clone(), MapExpr::constant(fx0), t);
    let w0 = eval_map(space, &g1, &z0)?;

    let image = sample_image(space, &g1, &z0, m + 1.0, params.budget, params.seed)?;
    let target = (1.0 - t) * big_omega;
    let failure = |reason: &str, detail: String| Error::ConstructionFailure {
        reason: reason.to_string(),
        diagnostics: format!("{detail}; target φ = {target}, image samples = {}", image.len()),
    };
    let at_w0 = phi_hat(space, &image, &w0).0;
    if at_w0 > target {
        return Err(failure("φ̂(w₀) already exceeds (1 − t)Ω", format!("φ̂(w₀) = {at_w0}")));
    }
    // φ̂ along the ray is at least the distance to w₀, so [0, target] brackets
    let ray = space.default_ray(&w0);
    let (mut lo, mut hi) = (0.0, target);
    if phi_hat(space, &image, &space.ray_point(&ray, hi)).0 < target {
        return Err(failure("φ̂ bisection failed to bracket", format!("φ̂ at distance {hi} below target")));
    }
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if phi_hat(space, &image, &space.ray_point(&ray, mid)).0 >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let e0 = space.ray_point(&ray, hi);
    let (phi_e0, idx) = phi_hat(space, &image, &e0);
    if (phi_e0 - target).abs() > t * big_omega / 4.0 {
        return Err(failure("φ̂(e₀) misses its target", format!("φ̂(e₀) = {phi_e0}")));
    }
    let w1 = image[idx].clone();
    let d1 = space.dist(&w1, &e0);
    if !(d1 > (1.0 - 2.0 * t) * big_omega) {
        return Err(failure("no sampled w₁ far enough from e₀", format!("best ρ(w₁, e₀) = {d1}")));
    }
    let w2 = space.combine(&w1, &e0, omega.at(s) / big_omega);
    let phi = RetractionParams::new(z0.clone(), m, r)?;
    let g2 = MapExpr::retract(g1.clone(), phi.clone());
    let h = MapExpr::region(
        z0.clone(),
        vec![
            (0.0, Piece::Slide { a: w1.clone(), b: w2.clone(), offset: s, denom: omega.at(s), modulus: omega.clone() }),
            (s, Piece::Expr { map: MapExpr::constant(w1.clone()) }),
            (
                s + s_prime,
                Piece::Slide {
                    a: w0.clone(),
                    b: w1.clone(),
                    offset: s + 2.0 * s_prime,
                    denom: omega.at(s_prime),
                    modulus: omega.clone(),
                },
            ),
            (s + 2.0 * s_prime, Piece::Expr { map: g2.clone() }),
        ],
    )?;
    let mut rec = base_record(RecordKind::Step1Bounded, space, omega, f, params);
    rec.p = Some(p);
    rec.t = Some(t);
    rec.s_prime = Some(s_prime);
    rec.m = Some(m);
    rec.r = Some(r);
    rec.omega_sup = Some(big_omega);
    rec.phi_e0 = Some(phi_e0);
    rec.y0 = Some(y0_of(space, &z0, x0, s));
    rec.z0 = Some(z0);
    rec.w0 = Some(w0);
    rec.e0 = Some(e0);
    rec.w1 = Some(w1);
    rec.w2 = Some(w2);
    rec.retraction = Some(phi);
    rec.g1 = Some(g1);
    rec.g = Some(g2);
    rec.h = Some(h);
    Ok(rec.seal())
}
