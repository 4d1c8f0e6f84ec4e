use serde_json::json;

use super::{errored, rel, scalar, timed, CheckRecord, VerificationReport, VerifyConfig};
use crate::constructions::{phi_f_estimate, phi_f_profile, porosity_neighbour, ConstructionRecord};
use crate::error::Result;
use crate::funcspace::{check_in_c_omega, default_pairs, metric_dinf, sep_bound, SampleDomain};
use crate::geometry::Space;
use crate::par::{self, derive};

/// Samples `h'` in `B(g, αε)` and checks `d_∞(f, h') < ε` and the Rakotch
/// bound `ρ(h'(x), h'(y)) ≤ c·ω(ρ(x, y))` for `ρ(x, y) ≥ s`, where
/// `c = 1 − γ/2` (or `1/2` for constant `f`). Also replays the scalar chains
/// behind `α` and `ε₀` and checks the `φ_f` profile.
pub fn verify_porosity(space: &Space, rec: &ConstructionRecord, cfg: &VerifyConfig) -> VerificationReport {
    timed("porosity", cfg.seed, |rep| {
        rep.budget("neighbours", cfg.neighbours);
        rep.budget("pairs_per_neighbour", pairs_per_neighbour(cfg));
        if let Err(e) = run(space, rec, cfg, None, rep) {
            rep.push(errored("construction", "record is a complete porosity record", &e));
        }
    })
}

pub(crate) fn pairs_per_neighbour(cfg: &VerifyConfig) -> usize {
    (cfg.pairs / 10).max(1)
}

pub(crate) fn run(
    space: &Space,
    rec: &ConstructionRecord,
    cfg: &VerifyConfig,
    alpha_override: Option<f64>,
    rep: &mut VerificationReport,
) -> Result<()> {
    let (w, f, s, eps, x0) = (&rec.modulus, &rec.f, rec.s, rec.eps, &rec.x0);
    let (g, alpha, eps0, c) = (
        ConstructionRecord::need(&rec.g, "g")?,
        ConstructionRecord::need(&rec.alpha, "alpha")?,
        ConstructionRecord::need(&rec.eps0, "eps0")?,
        ConstructionRecord::need(&rec.rakotch, "rakotch")?,
    );
    let big = ConstructionRecord::need(&rec.omega_sup, "omega_sup")?;
    let ws = w.at(s);
    let tol = cfg.construction_tol;
    rep.push(scalar("scalars.eps", "ε ≤ ε₀", eps, eps0, 0.0));
    if let Some(gamma) = rec.gamma {
        rep.push(CheckRecord::new("scalars.gamma", "γ = ε/(2Ω)", 1, tol, -(gamma - eps / (2.0 * big)).abs()));
        rep.push(scalar("scalars.alpha", "α ≤ min{1/2, ω(s)/(8Ω)}", alpha, (0.5f64).min(ws / (8.0 * big)), tol));
        rep.push(scalar("scalars.chain", "2αε ≤ γω(s)/2", 2.0 * alpha * eps, gamma * ws / 2.0, tol));
        rep.push(CheckRecord::new("scalars.rakotch", "c = 1 − γ/2", 1, tol, -(c - (1.0 - gamma / 2.0)).abs()));
        let dfg = sep_bound(space, f, &g).unwrap_or(f64::INFINITY);
        rep.push(scalar("g.near_f", "d_∞(f, g) ≤ γΩ = ε/2", dfg, eps / 2.0, tol));
    } else {
        rep.push(scalar("scalars.chain", "2ε ≤ ω(s)/2", 2.0 * eps, ws / 2.0, tol));
        rep.push(CheckRecord::new("scalars.rakotch", "c = 1/2", 1, tol, -(c - 0.5).abs()));
    }

    let reach = 2.0 * s + big + 2.0;
    let base_domains = vec![SampleDomain::new(x0.clone(), reach)];
    let grid = [s / 2.0, s, 2.0 * s, 4.0 * s];
    let prof = phi_f_profile(space, w, f, &grid, cfg.estimate_budget, derive(cfg.seed, 1), &base_domains)?;
    let worst_step = prof.windows(2).map(|p| p[0] - p[1]).fold(f64::INFINITY, f64::min);
    rep.push(
        CheckRecord::new("phi_f.monotone", "φ_f is nonincreasing in s", grid.len(), 0.0, worst_step)
            .with_witness(json!({ "grid": grid, "phi": prof })),
    );
    let phi_g = phi_f_estimate(space, w, &g, s, cfg.estimate_budget, derive(cfg.seed, 2), &base_domains)?;
    rep.push(scalar("phi_g", "φ_g(s) ≤ c", phi_g, c, tol));
    let omega_ok = check_in_c_omega(
        space,
        &g,
        w,
        cfg.pairs / 10,
        derive(cfg.seed, 3),
        tol,
        default_pairs(space, &base_domains, 1e-3, reach),
    )?;
    rep.push(
        CheckRecord::new("g.in_c_omega", "ρ(g(x), g(y)) ≤ ω(ρ(x, y))", omega_ok.trials, tol, omega_ok.worst_margin())
            .with_witness(omega_ok.worst),
    );

    let mut rng = par::rng(derive(cfg.seed, 4));
    let alpha_used = alpha_override.unwrap_or(alpha);
    let nbs = (0..cfg.neighbours)
        .map(|i| porosity_neighbour(space, rec, i, Some(alpha_used), &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let bound = w.scaled(c)?;
    let per = pairs_per_neighbour(cfg);
    let dfg = sep_bound(space, f, &g);
    let results = par::map_indexed(nbs.len(), |i| -> Result<_> {
        let nb = &nbs[i];
        let mut domains = base_domains.clone();
        if let Some(fc) = &nb.focus {
            domains.push(SampleDomain::new(fc.clone(), 2.0 * s));
        }
        let d =
            metric_dinf(space, f, &nb.map, w, cfg.estimate_budget / 10, derive(cfg.seed, 2000 + i as u64), &domains)?;
        let hi = match dfg {
            Some(x) => d.hi.min(x + nb.dinf_hi),
            None => d.hi,
        };
        let gen = default_pairs(space, &domains, s, 4.0 * s + 2.0);
        let rk = check_in_c_omega(space, &nb.map, &bound, per, derive(cfg.seed, 3000 + i as u64), tol, gen)?;
        Ok((d.lo, hi, rk))
    });
    let mut worst_ball: Option<(f64, serde_json::Value)> = None;
    let mut worst_dinf: Option<(f64, serde_json::Value)> = None;
    let mut worst_rk: Option<(f64, serde_json::Value)> = None;
    let mut trials = 0;
    for (nb, res) in nbs.iter().zip(results) {
        let (lo, hi, rk) = res?;
        let info = json!({ "family": nb.family, "u": nb.u, "dinf_g_hi": nb.dinf_hi });
        let m = alpha * eps - nb.dinf_hi;
        if worst_ball.as_ref().is_none_or(|b| m < b.0) {
            worst_ball = Some((m, info.clone()));
        }
        let m = eps - hi;
        if worst_dinf.as_ref().is_none_or(|b| m < b.0) {
            worst_dinf = Some((m, json!({ "neighbour": info, "lo": lo, "hi": hi })));
        }
        let m = rel(rk.worst_margin(), 0.0, 1.0);
        trials += rk.trials;
        if worst_rk.as_ref().is_none_or(|b| m < b.0) {
            worst_rk = Some((m, json!({ "neighbour": info, "map": nb.map, "pair": rk.worst })));
        }
    }
    let n = nbs.len();
    let strict = |m: f64| if m == 0.0 { -f64::MIN_POSITIVE } else { m };
    let (m, wit) = worst_ball.unwrap_or((f64::INFINITY, json!(null)));
    rep.push(CheckRecord::new("neighbours.in_ball", "d_∞(g, h') < αε", n, 0.0, strict(m)).with_witness(wit));
    let (m, wit) = worst_dinf.unwrap_or((f64::INFINITY, json!(null)));
    rep.push(CheckRecord::new("neighbours.dinf", "d_∞(f, h') < ε", n, 0.0, strict(m)).with_witness(wit));
    let (m, wit) = worst_rk.unwrap_or((f64::INFINITY, json!(null)));
    rep.push(
        CheckRecord::new("neighbours.rakotch", "ρ(h'(x), h'(y)) ≤ c·ω(ρ(x, y)) for ρ(x, y) ≥ s", trials, tol, m)
            .with_witness(wit),
    );
    Ok(())
}
