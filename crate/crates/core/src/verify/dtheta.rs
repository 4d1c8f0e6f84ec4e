use rand::Rng as _;
use serde_json::json;

use super::{errored, sample_check, timed, CheckRecord, VerificationReport};
use crate::error::Result;
use crate::funcspace::{eval_map, metric_dtheta, DenseSequence, MapExpr};
use crate::geometry::{Point, Space};
use crate::par::{derive, Rng};

/// A random map from a small family: constants, identity, clamps, blends
/// towards a constant and contractive dilations.
fn random_map(space: &Space, rng: &mut Rng) -> MapExpr {
    let c = space.sample_ball(&space.base, 3.0, rng);
    match rng.gen_range(0..5) {
        0 => MapExpr::constant(c),
        1 => MapExpr::Identity,
        2 => MapExpr::Clamp { center: c, radius: 0.1 + 2.0 * rng.gen::<f64>() },
        3 => MapExpr::blend(MapExpr::Identity, MapExpr::constant(c), rng.gen()),
        _ => MapExpr::Dilation { center: c, factor: rng.gen() },
    }
}

/// Metric axioms of `d_Θ` on random map triples and convergence of the family
/// `f_k = (1 − 1/k)f ⊕ (1/k)c` to `f`, using the first `terms` points of Θ.
pub fn verify_dtheta(
    space: &Space,
    theta: &DenseSequence,
    terms: usize,
    trials: usize,
    seed: u64,
) -> VerificationReport {
    timed("dtheta", seed, |rep| {
        rep.budget("terms", terms);
        rep.budget("trials", trials);
        if let Err(e) = run(space, theta, terms, trials, seed, rep) {
            rep.push(errored("setup", "Θ is enumerable", &e));
        }
    })
}

fn run(
    space: &Space,
    theta: &DenseSequence,
    terms: usize,
    trials: usize,
    seed: u64,
    rep: &mut VerificationReport,
) -> Result<()> {
    let pts = theta.points(space, terms)?;
    let pts = &pts;
    let d = |a: &MapExpr, b: &MapExpr| metric_dtheta(space, pts, a, b).expect("maps are total");
    let tail = 0.5f64.powi(terms as i32);
    rep.push(
        CheckRecord::new("enclosure.width", "width 2^{−N} < 2^{−20}", 1, 0.0, 0.5f64.powi(20) - tail)
            .with_witness(json!({ "terms": terms, "width": tail })),
    );
    rep.push(sample_check("metric.self", "d_Θ(f, f) ∈ [0, 2^{−N}]", trials, 0.0, derive(seed, 1), |rng| {
        let f = random_map(space, rng);
        let e = d(&f, &f);
        (-(e.lo.abs()) - (e.hi - tail).abs(), json!({ "f": f, "enclosure": e }))
    }));
    rep.push(sample_check("metric.symmetry", "d_Θ(f, g) = d_Θ(g, f)", trials, 0.0, derive(seed, 2), |rng| {
        let (f, g) = (random_map(space, rng), random_map(space, rng));
        let (a, b) = (d(&f, &g), d(&g, &f));
        (-(a.lo - b.lo).abs(), json!({ "f": f, "g": g, "fg": a, "gf": b }))
    }));
    rep.push(sample_check(
        "metric.triangle",
        "d_Θ(f, h) ≤ d_Θ(f, g) + d_Θ(g, h)",
        trials,
        1e-12,
        derive(seed, 3),
        |rng| {
            let (f, g, h) = (random_map(space, rng), random_map(space, rng), random_map(space, rng));
            let (fh, fg, gh) = (d(&f, &h), d(&f, &g), d(&g, &h));
            (fg.hi + gh.hi - fh.lo, json!({ "f": f, "g": g, "h": h }))
        },
    ));
    rep.push(sample_check(
        "metric.separation",
        "d_Θ(f, g) > 0 when f ≠ g on Θ",
        trials,
        0.0,
        derive(seed, 4),
        |rng| {
            let (f, g) = (random_map(space, rng), random_map(space, rng));
            let differs = pts.iter().any(|p| eval_map(space, &f, p).ok() != eval_map(space, &g, p).ok());
            let lo = d(&f, &g).lo;
            (if differs && lo <= 0.0 { -1.0 } else { 0.0 }, json!({ "f": f, "g": g, "lo": lo }))
        },
    ));

    let k_max = 64;
    let conv = (trials / 10).max(1);
    let monotone = sample_check(
        "convergence.monotone",
        "d_Θ(f_k, f) is nonincreasing in k",
        conv,
        1e-15,
        derive(seed, 5),
        |rng| {
            let f = random_map(space, rng);
            let c = space.sample_ball(&space.base, 3.0, rng);
            let mut prev = f64::INFINITY;
            let mut worst = (f64::INFINITY, 0);
            for k in 1..=k_max {
                let fk = MapExpr::blend(f.clone(), MapExpr::constant(c.clone()), 1.0 / k as f64);
                let lo = d(&fk, &f).lo;
                if prev - lo < worst.0 {
                    worst = (prev - lo, k);
                }
                prev = lo;
            }
            (worst.0, json!({ "f": f, "c": c, "k": worst.1 }))
        },
    );
    rep.push(monotone);
    rep.push(sample_check(
        "convergence.rate",
        "k·d_Θ(f_k, f) ≤ Σ 2^{−n}ρ(f(θ_n), c)",
        conv,
        1e-12,
        derive(seed, 6),
        |rng| {
            let f = random_map(space, rng);
            let c = space.sample_ball(&space.base, 3.0, rng);
            let mut w = 1.0;
            let mut sum = 0.0;
            for p in pts {
                w *= 0.5;
                sum += w * space.dist(&eval_map(space, &f, p).expect("total"), &c);
            }
            let fk = MapExpr::blend(f.clone(), MapExpr::constant(c.clone()), 1.0 / k_max as f64);
            let lo = d(&fk, &f).lo;
            (sum - k_max as f64 * lo, json!({ "f": f, "c": c, "sum": sum, "lo": lo }))
        },
    ));
    rep.push(sample_check(
        "convergence.pointwise",
        "min{1, ρ(f_k(θ_n), f(θ_n))} ≤ 2ⁿ d_Θ(f_k, f)",
        conv,
        1e-12,
        derive(seed, 7),
        |rng| {
            let f = random_map(space, rng);
            let c = space.sample_ball(&space.base, 3.0, rng);
            let k = rng.gen_range(1..=k_max);
            let fk = MapExpr::blend(f.clone(), MapExpr::constant(c.clone()), 1.0 / k as f64);
            let hi = d(&fk, &f).hi;
            let mut worst = (f64::INFINITY, 0usize);
            let mut scale = 1.0;
            for (n, p) in pts.iter().enumerate() {
                scale *= 2.0;
                let disp =
                    space.dist(&eval_map(space, &fk, p).expect("total"), &eval_map(space, &f, p).expect("total"));
                let m = (scale * hi).min(1.0) - disp.min(1.0);
                if m < worst.0 {
                    worst = (m, n + 1);
                }
            }
            let theta: Option<&Point> = pts.get(worst.1.saturating_sub(1));
            (worst.0, json!({ "f": f, "c": c, "k": k, "n": worst.1, "theta": theta }))
        },
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_line_passes() {
        let sp = Space::euclidean(1);
        let rep = verify_dtheta(&sp, &DenseSequence::Dyadic, 24, 300, 5);
        assert!(rep.passed(), "{}", rep.to_markdown());
    }

    #[test]
    fn star_tree_passes() {
        let sp = Space::star_tree(3);
        let rep = verify_dtheta(&sp, &DenseSequence::Dyadic, 24, 200, 6);
        assert!(rep.passed(), "{}", rep.to_markdown());
    }
}
