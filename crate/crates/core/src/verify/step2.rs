use rand::Rng as _;
use serde_json::json;

use super::{errored, timed, CheckRecord, VerificationReport, VerifyConfig};
use crate::constructions::{step2_eta_log2, step2_neighbour, step2_q, ConstructionRecord, Step2Neighbour};
use crate::error::Result;
use crate::funcspace::{eval_map, mod_lower, MapExpr, SampleDomain};
use crate::geometry::Space;
use crate::par::{self, derive};

/// Neighbour 0 is `h` itself; the rest flatten `h` on `B(z₀, r)` with `r`
/// stratified over `(0, s)` and blend weights alternating between the edge
/// of the certified ball (`κ = 1 − 10⁻⁶`) and uniformly random `κ`.
pub fn step2_neighbours(
    space: &Space,
    rec: &ConstructionRecord,
    n: usize,
    log2_radius: f64,
    seed: u64,
) -> Result<Vec<Step2Neighbour>> {
    let mut rng = par::rng(seed);
    let mut out = Vec::with_capacity(n);
    let h = ConstructionRecord::need(&rec.h, "h")?;
    out.push(Step2Neighbour {
        map: MapExpr::blend(h.clone(), h, 0.0),
        radius: 0.0,
        u: 0.0,
        log2_d_bound: f64::NEG_INFINITY,
    });
    let k = n.saturating_sub(1).max(1);
    for i in 1..n {
        let frac = ((i - 1) as f64 + rng.gen::<f64>()) / k as f64;
        let r = rec.s * frac.clamp(1e-6, 1.0 - 1e-6);
        let kappa = if i % 2 == 0 { 1.0 - 1e-6 } else { rng.gen::<f64>() };
        out.push(step2_neighbour(space, rec, r, kappa, log2_radius)?);
    }
    Ok(out)
}

/// Samples neighbours `h'` with certified `d(h, h') < η` and checks that each
/// still has `ω_{h'}(s) > (1 − μ)ω(s)`, together with the pointwise bound at
/// `y₀` and the triangle chain through `(y₀, z₀)`.
pub fn verify_step2(space: &Space, rec: &ConstructionRecord, cfg: &VerifyConfig) -> VerificationReport {
    timed("step2", cfg.seed, |rep| {
        rep.budget("neighbours", cfg.neighbours);
        rep.budget("estimate_budget", cfg.estimate_budget);
        if let Err(e) = run(space, rec, cfg, 1.0, rep) {
            rep.push(errored("construction", "record is a complete Step-1 record", &e));
        }
    })
}

pub(crate) fn run(
    space: &Space,
    rec: &ConstructionRecord,
    cfg: &VerifyConfig,
    inflation: f64,
    rep: &mut VerificationReport,
) -> Result<()> {
    let (z0, y0, h, mu) = (
        ConstructionRecord::need(&rec.z0, "z0")?,
        ConstructionRecord::need(&rec.y0, "y0")?,
        ConstructionRecord::need(&rec.h, "h")?,
        ConstructionRecord::need(&rec.mu, "mu")?,
    );
    let (w, s, x0) = (&rec.modulus, rec.s, &rec.x0);
    let ws = w.at(s);
    let q = step2_q(space, x0, &y0, &z0);
    let far = space.dist(x0, &y0).max(space.dist(x0, &z0));
    let gap = q as f64 - far;
    rep.push(
        CheckRecord::new(
            "q.contains",
            "ρ(x₀, y₀), ρ(x₀, z₀) < q",
            1,
            0.0,
            if gap > 0.0 { gap } else { gap - f64::MIN_POSITIVE },
        )
        .with_witness(json!({ "q": q, "max_dist": far })),
    );
    let minimal = q == 1 || (q as f64 - 1.0) <= far;
    rep.push(
        CheckRecord::new(
            "q.minimal",
            "no smaller integer bounds both distances",
            1,
            0.0,
            if minimal { 0.0 } else { -1.0 },
        )
        .with_witness(json!({ "q": q, "max_dist": far })),
    );
    let log2_eta = step2_eta_log2(w, s, mu, q);
    let log2_radius = log2_eta + inflation.log2();
    let nbs = step2_neighbours(space, rec, cfg.neighbours, log2_radius, derive(cfg.seed, 40))?;
    let target = (1.0 - mu) * ws;
    let (hy0, hz0) = (eval_map(space, &h, &y0)?, eval_map(space, &h, &z0)?);
    let sep = space.dist(&hy0, &hz0);
    let domains = [SampleDomain::new(z0.clone(), 2.0 * s)];
    let hints = [(y0.clone(), z0.clone())];
    let results = par::map_indexed(nbs.len(), |i| -> Result<_> {
        let nb = &nbs[i];
        let est =
            mod_lower(space, &nb.map, s, cfg.estimate_budget, derive(cfg.seed, 1000 + i as u64), &domains, &hints)?;
        let dy = space.dist(&eval_map(space, &nb.map, &y0)?, &hy0);
        let dz = space.dist(&eval_map(space, &nb.map, &z0)?, &hz0);
        Ok((est, dy, dz))
    });
    let mut worst: [Option<(f64, serde_json::Value)>; 4] = Default::default();
    let mut keep = |slot: usize, m: f64, w: serde_json::Value| {
        if worst[slot].as_ref().is_none_or(|b| m < b.0) {
            worst[slot] = Some((m, w));
        }
    };
    for (nb, res) in nbs.iter().zip(results) {
        let (est, dy, dz) = res?;
        let info = json!({ "radius": nb.radius, "u": nb.u, "log2_d_bound": nb.log2_d_bound });
        keep(0, log2_radius - nb.log2_d_bound, json!({ "neighbour": info, "log2_eta": log2_radius }));
        keep(1, ws * mu / 4.0 - dy, json!({ "neighbour": info, "displacement": dy }));
        keep(2, sep - dy - dz - target, json!({ "neighbour": info, "sep": sep, "dy": dy, "dz": dz }));
        keep(
            3,
            est.value - target,
            json!({ "neighbour": info, "mod_lower": est.value, "pair": est.pair, "map": nb.map }),
        );
    }
    let n = nbs.len();
    let labels = [
        ("neighbours.certified", "d(h, h') < η from the structure of h'"),
        ("neighbours.displacement_y0", "ρ(h'(y₀), h(y₀)) < ω(s)μ/4"),
        ("neighbours.chain", "ρ(h(y₀), h(z₀)) − ρ(h'(y₀), h(y₀)) − ρ(h'(z₀), h(z₀)) > (1 − μ)ω(s)"),
        ("neighbours.mod_lower", "ω_{h'}(s) > (1 − μ)ω(s)"),
    ];
    for ((id, anchor), slot) in labels.iter().zip(worst) {
        let (m, w) = slot.unwrap_or((f64::INFINITY, json!(null)));
        // strict inequalities: an exact tie counts as a failure
        let m = if m == 0.0 { -f64::MIN_POSITIVE } else { m };
        rep.push(CheckRecord::new(*id, *anchor, n, 0.0, m).with_witness(w));
    }
    rep.push(
        CheckRecord::new("eta", "η = 2^{−q} min{1, ω(s)μ/4}", 1, 0.0, 0.0)
            .with_witness(json!({ "q": q, "log2_eta": log2_eta, "eta": log2_eta.exp2(), "inflation": inflation })),
    );
    Ok(())
}
