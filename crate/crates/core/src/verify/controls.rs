use serde_json::json;

use super::space::TSquaredCombine;
use super::step1::h_in_c_omega_checks;
use super::{errored, timed, verify_space, CheckRecord, VerificationReport, VerifyConfig};
use crate::constructions::{porosity_center, step1_unbounded, ConstructionRecord, Step1Params};
use crate::error::{Error, Result};
use crate::funcspace::{MapExpr, Piece};
use crate::geometry::{Point, Space};
use crate::moduli::Modulus;

fn worst(mut checks: Vec<CheckRecord>, id: &str, anchor: &str) -> CheckRecord {
    checks.sort_by(|a, b| a.margin.total_cmp(&b.margin));
    let mut c = checks.into_iter().next().unwrap_or_else(|| CheckRecord::new(id, anchor, 0, 0.0, f64::INFINITY));
    c.id = id.to_string();
    c.anchor = anchor.to_string();
    c.as_control()
}

/// Geodesics traversed with parameter `t²`.
pub fn control_t_squared(space: &Space, trials: usize, tol: f64, seed: u64) -> CheckRecord {
    let rep = verify_space(&TSquaredCombine(space), trials, tol, seed);
    let seg: Vec<_> = rep.checks.into_iter().filter(|c| c.id.starts_with("segment.")).collect();
    worst(seg, "control.t_squared_combine", "segment identities under a t² reparametrisation")
}

/// `h` with the denominator of its inner slide halved.
pub fn control_halved_denominator(space: &Space, rec: &ConstructionRecord, cfg: &VerifyConfig) -> CheckRecord {
    const ID: &str = "control.halved_slide_denominator";
    const ANCHOR: &str = "h ∈ C_ω after halving ω(s) in the slide";
    let run = || -> Result<Vec<CheckRecord>> {
        let mut h = ConstructionRecord::need(&rec.h, "h")?;
        let MapExpr::RegionPiecewise { bands, .. } = &mut h else {
            return Err(Error::Misuse("Step-1 map is not region-piecewise".into()));
        };
        match &mut bands[0].piece {
            Piece::Slide { denom, .. } => *denom /= 2.0,
            Piece::Expr { .. } => return Err(Error::Misuse("no inner slide band".into())),
        }
        Ok(h_in_c_omega_checks(space, rec, &h, cfg)?.into_iter().filter(|c| c.id.starts_with("h_in")).collect())
    };
    match run() {
        Ok(checks) => worst(checks, ID, ANCHOR),
        Err(e) => errored(ID, ANCHOR, &e).as_control(),
    }
}

/// Step-2 neighbours drawn from the ball of radius `10η`.
pub fn control_eta_inflated(space: &Space, rec: &ConstructionRecord, cfg: &VerifyConfig) -> CheckRecord {
    const ID: &str = "control.eta_inflated";
    const ANCHOR: &str = "ω_{h'}(s) > (1 − μ)ω(s) for d(h, h') < 10η";
    let mut rep = VerificationReport::new("step2", cfg.seed);
    match super::step2::run(space, rec, cfg, 10.0, &mut rep) {
        Ok(()) => {
            let c = rep.checks.into_iter().filter(|c| c.id == "neighbours.mod_lower").collect();
            worst(c, ID, ANCHOR)
        }
        Err(e) => errored(ID, ANCHOR, &e).as_control(),
    }
}

/// Porosity neighbours drawn from the ball of radius `10αε`.
pub fn control_inflated_alpha(space: &Space, rec: &ConstructionRecord, cfg: &VerifyConfig) -> CheckRecord {
    const ID: &str = "control.alpha_inflated";
    const ANCHOR: &str = "Rakotch bound for h' ∈ B(g, 10αε)";
    let alpha = match ConstructionRecord::need(&rec.alpha, "alpha") {
        Ok(a) => a,
        Err(e) => return errored(ID, ANCHOR, &e).as_control(),
    };
    let mut rep = VerificationReport::new("porosity", cfg.seed);
    match super::porosity::run(space, rec, cfg, Some(10.0 * alpha), &mut rep) {
        Ok(()) => {
            let c = rep.checks.into_iter().filter(|c| c.id == "neighbours.rakotch").collect();
            worst(c, ID, ANCHOR)
        }
        Err(e) => errored(ID, ANCHOR, &e).as_control(),
    }
}

/// Searches `ω(λs) ≤ λω(s)` (`λ ≥ 1`) over a grid; any concave ω with
/// ω(0) = 0 satisfies it.
pub fn control_non_concave(omega: &Modulus, s_max: f64) -> CheckRecord {
    let mut worst = (f64::INFINITY, 0.0, 0.0);
    let mut trials = 0;
    for i in 1..=200 {
        let s = s_max * i as f64 / 200.0;
        for j in 0..=40 {
            let lambda = 1.0 + 7.0 * j as f64 / 40.0;
            let m = lambda * omega.at(s) - omega.at(lambda * s);
            trials += 1;
            if m < worst.0 {
                worst = (m, lambda, s);
            }
        }
    }
    CheckRecord::new("control.non_concave_modulus", "ω(λs) ≤ λω(s) for λ ≥ 1", trials, 1e-12, worst.0)
        .with_witness(json!({ "lambda": worst.1, "s": worst.2, "omega": omega }))
        .as_control()
}

/// The five deliberately broken inputs on their default scenarios: each
/// check is expected to fail.
pub fn negative_controls(cfg: &VerifyConfig) -> VerificationReport {
    timed("negative_controls", cfg.seed, |rep| {
        rep.budget("pairs", cfg.pairs);
        rep.budget("neighbours", cfg.neighbours);
        rep.push(control_t_squared(&Space::euclidean(2), cfg.pairs / 10, cfg.geometry_tol, cfg.seed));
        let line = Space::euclidean(1);
        let lin = Modulus::Linear { c: 1.0 };
        match step1_unbounded(&line, &lin, &MapExpr::Identity, &Step1Params::new(1.0, 0.5, 0.5)) {
            Ok(rec) => rep.push(control_halved_denominator(&line, &rec, cfg)),
            Err(e) => rep.push(errored("control.step1", "default Step-1 scenario", &e)),
        }
        // A constant f leaves the pair (y₀, z₀) as the only witness for ω_h(s), and
        // ρ(x₀, z₀) ≈ 1155.5 puts z₀ in the first ball that q covers.
        let zero = MapExpr::constant(Point::euclidean(vec![0.0]));
        match step1_unbounded(&line, &lin, &zero, &Step1Params::new(0.5, 0.5, 0.5)) {
            Ok(rec) => rep.push(control_eta_inflated(&line, &rec, cfg)),
            Err(e) => rep.push(errored("control.step2", "constant-map Step-1 scenario", &e)),
        }
        let clamp = MapExpr::Clamp { center: Point::euclidean(vec![0.0]), radius: 1.0 };
        match porosity_center(&line, &lin, &clamp, 1.0, 1.0) {
            Ok(rec) => rep.push(control_inflated_alpha(&line, &rec, cfg)),
            Err(e) => rep.push(errored("control.porosity", "default porosity scenario", &e)),
        }
        let bent = Modulus::piecewise_unchecked(vec![(0.0, 0.0), (1.0, 0.2), (2.0, 2.0)], 0.5);
        rep.push(control_non_concave(&bent, 4.0));
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_control_fails_with_a_witness() {
        let cfg = VerifyConfig { pairs: 20_000, estimate_budget: 3000, neighbours: 30, ..VerifyConfig::default() };
        let rep = negative_controls(&cfg);
        assert_eq!(rep.checks.len(), 5);
        for c in &rep.checks {
            assert!(c.control && !c.pass, "{} passed: {}", c.id, rep.to_markdown());
            assert!(c.witness.is_some());
        }
        assert!(rep.passed());
    }

    #[test]
    fn concave_moduli_pass_the_scaling_search() {
        for w in [Modulus::Linear { c: 2.0 }, Modulus::BoundedExp { cap: 1.0, tau: 0.5 }] {
            assert!(control_non_concave(&w, 5.0).pass);
        }
    }
}
