use rand::Rng as _;
use serde_json::json;

use super::{errored, rel, scalar, timed, CheckRecord, VerificationReport, VerifyConfig};
use crate::constructions::{phi_hat, ConstructionRecord, RecordKind};
use crate::error::{Error, Result};
use crate::funcspace::{check_in_c_omega, default_pairs, eval_map, metric_d, DOptions, MapExpr, SampleDomain};
use crate::geometry::{Point, Space};
use crate::moduli::Modulus;
use crate::par::{derive, Rng};

/// Case of the `h ∈ C_ω` analysis covering a pair whose distances to `z₀`
/// fall in bands `a ≤ b` (see [`step1_cases`] for the bands).
pub fn band_case(kind: RecordKind, a: usize, b: usize) -> Option<u8> {
    let (a, b) = (a.min(b), a.max(b));
    match kind {
        // [0, s), [s, M + s], (M + s, ∞)
        RecordKind::Step1Unbounded => match (a, b) {
            (0, 0) => Some(3),
            (0, 1) => Some(2),
            (0, 2) => Some(4),
            (1 | 2, 1 | 2) => Some(1),
            _ => None,
        },
        // [0, s], (s, s+s'], (s+s', s+2s'], (s+2s', s+3s'], (s+3s', ∞)
        RecordKind::Step1Bounded => match (a, b) {
            (3 | 4, 3 | 4) => Some(1),
            (2, 2) => Some(2),
            (2, 3) => Some(3),
            (2, 4) => Some(4),
            (1, 1) => Some(5),
            (1, 2) => Some(6),
            (0 | 1, 3 | 4) => Some(7),
            (0, 0) => Some(8),
            (0, 1) => Some(9),
            (0, 2) => Some(10),
            _ => None,
        },
        RecordKind::Porosity => None,
    }
}

/// Radial bands `[lo, hi]` around `z₀`; the outer band is cut at `R + 4`,
/// beyond which the retraction is the identity.
pub fn step1_cases(rec: &ConstructionRecord) -> Result<Vec<(f64, f64)>> {
    let s = rec.s;
    let m = ConstructionRecord::need(&rec.m, "m")?;
    let r = ConstructionRecord::need(&rec.r, "r")?;
    match rec.kind {
        RecordKind::Step1Unbounded => Ok(vec![(0.0, s), (s, m + s), (m + s, r + 4.0)]),
        RecordKind::Step1Bounded => {
            let sp = ConstructionRecord::need(&rec.s_prime, "s_prime")?;
            Ok(vec![(0.0, s), (s, s + sp), (s + sp, s + 2.0 * sp), (s + 2.0 * sp, m), (m, r + 4.0)])
        }
        RecordKind::Porosity => Err(Error::Misuse("not a Step-1 record".into())),
    }
}

/// Pairs `(x, y)` with `ρ(x, z₀)` in band `a` and `ρ(y, z₀)` in band `b`.
/// Half of them lie on a common ray from `z₀`, where distances between the
/// bands are smallest.
pub struct StratifiedPairs<'a> {
    pub space: &'a Space,
    pub z0: Point,
    pub bands: Vec<(f64, f64)>,
}

impl StratifiedPairs<'_> {
    fn radius(&self, band: usize, rng: &mut Rng) -> f64 {
        let (lo, hi) = self.bands[band];
        let u: f64 = rng.gen();
        let f = match rng.gen_range(0..3) {
            0 => u,
            1 => u.powi(4),
            _ => 1.0 - u.powi(4),
        };
        (lo + (hi - lo) * f).clamp(lo, hi)
    }

    pub fn sample(&self, a: usize, b: usize, rng: &mut Rng) -> (Point, Point) {
        let (dx, dy) = (self.radius(a, rng), self.radius(b, rng));
        let x = self.space.sample_sphere(&self.z0, dx, rng);
        let y = if dx > 0.0 && rng.gen::<bool>() {
            self.space.along(&self.z0, &x, dy / dx)
        } else {
            self.space.sample_sphere(&self.z0, dy, rng)
        };
        (x, y)
    }

    /// Band index of `x` (closed on the side the case analysis uses).
    pub fn band_of(&self, kind: RecordKind, x: &Point) -> usize {
        let d = self.space.dist(&self.z0, x);
        let last = self.bands.len() - 1;
        match kind {
            RecordKind::Step1Unbounded => {
                if d < self.bands[0].1 {
                    0
                } else if d <= self.bands[1].1 {
                    1
                } else {
                    2
                }
            }
            _ => self.bands[..last].iter().position(|&(_, hi)| d <= hi).unwrap_or(last),
        }
    }
}

fn falsification_record(id: String, anchor: &str, tol: f64, f: crate::funcspace::Falsification) -> CheckRecord {
    let margin = f.worst_margin();
    let mut c = CheckRecord::new(id, anchor, f.trials, tol, margin);
    if let Some(w) = f.worst {
        c = c.with_witness(w);
    }
    c
}

/// `h ∈ C_ω` on every band-pair case with at least one pair per case.
pub(crate) fn h_in_c_omega_checks(
    space: &Space,
    rec: &ConstructionRecord,
    h: &MapExpr,
    cfg: &VerifyConfig,
) -> Result<Vec<CheckRecord>> {
    let z0 = ConstructionRecord::need(&rec.z0, "z0")?;
    let strat = StratifiedPairs { space, z0, bands: step1_cases(rec)? };
    let n = strat.bands.len();
    let ncases = if rec.kind == RecordKind::Step1Unbounded { 4 } else { 10 };
    let mut by_case: Vec<Vec<(usize, usize)>> = vec![Vec::new(); ncases];
    for a in 0..n {
        for b in a..n {
            let c = band_case(rec.kind, a, b).expect("every band pair has a case");
            by_case[c as usize - 1].push((a, b));
        }
    }
    let per_case = (cfg.pairs / ncases).max(1);
    let mut out = Vec::new();
    for (i, pairs) in by_case.iter().enumerate() {
        let gen = |rng: &mut Rng| {
            let (a, b) = pairs[rng.gen_range(0..pairs.len())];
            if rng.gen::<bool>() {
                strat.sample(a, b, rng)
            } else {
                let (y, x) = strat.sample(a, b, rng);
                (x, y)
            }
        };
        let f = check_in_c_omega(
            space,
            h,
            &rec.modulus,
            per_case,
            derive(cfg.seed, 100 + i as u64),
            cfg.construction_tol,
            gen,
        )?;
        out.push(falsification_record(
            format!("h_in_c_omega.case{}", i + 1),
            "ρ(h(x), h(y)) ≤ ω(ρ(x, y))",
            cfg.construction_tol,
            f,
        ));
        // coverage: the first sampled pairs of each band pair land in it
        let mut rng = crate::par::rng(derive(cfg.seed, 200 + i as u64));
        let mut hits = 0;
        let mut witness = None;
        for &(a, b) in pairs {
            for _ in 0..16 {
                let (x, y) = strat.sample(a, b, &mut rng);
                let (ba, bb) = (strat.band_of(rec.kind, &x), strat.band_of(rec.kind, &y));
                if band_case(rec.kind, ba, bb) == Some(i as u8 + 1) {
                    hits += 1;
                } else if witness.is_none() {
                    witness = Some(json!({ "x": x, "y": y, "bands": [ba, bb], "intended": [a, b] }));
                }
            }
        }
        let total = 16 * pairs.len();
        let mut c = CheckRecord::new(
            format!("coverage.case{}", i + 1),
            "stratified sampler lands in the case",
            total,
            0.0,
            if hits > 0 { 0.0 } else { -1.0 },
        );
        c = c.with_witness(witness.unwrap_or(json!({ "hits": hits, "of": total })));
        out.push(c);
    }
    Ok(out)
}

/// Re-checks the defining relations of every recorded scalar and point,
/// the contraction bound on `g`, `h ∈ C_ω` on each case of the analysis,
/// `d(f, h) < ε`, the separation at `(y₀, z₀)`, and the exact values of `h`.
pub fn verify_step1(space: &Space, rec: &ConstructionRecord, cfg: &VerifyConfig) -> VerificationReport {
    let suite = match rec.kind {
        RecordKind::Step1Unbounded => "step1_unbounded",
        RecordKind::Step1Bounded => "step1_bounded",
        RecordKind::Porosity => "step1",
    };
    timed(suite, cfg.seed, |rep| {
        rep.budget("pairs", cfg.pairs);
        rep.budget("estimate_budget", cfg.estimate_budget);
        if let Err(e) = run(space, rec, cfg, rep) {
            rep.push(errored("construction", "record is a complete Step-1 record", &e));
        }
    })
}

fn run(space: &Space, rec: &ConstructionRecord, cfg: &VerifyConfig, rep: &mut VerificationReport) -> Result<()> {
    let (w, f, s, eps, x0) = (&rec.modulus, &rec.f, rec.s, rec.eps, &rec.x0);
    let tol = cfg.construction_tol;
    let (mu, p, t, m, r) = (
        ConstructionRecord::need(&rec.mu, "mu")?,
        ConstructionRecord::need(&rec.p, "p")?,
        ConstructionRecord::need(&rec.t, "t")?,
        ConstructionRecord::need(&rec.m, "m")?,
        ConstructionRecord::need(&rec.r, "r")?,
    );
    let (z0, y0, w0, e0, h, g) = (
        ConstructionRecord::need(&rec.z0, "z0")?,
        ConstructionRecord::need(&rec.y0, "y0")?,
        ConstructionRecord::need(&rec.w0, "w0")?,
        ConstructionRecord::need(&rec.e0, "e0")?,
        ConstructionRecord::need(&rec.h, "h")?,
        ConstructionRecord::need(&rec.g, "g")?,
    );
    let ws = w.at(s);
    let pf = p as f64;

    rep.push(scalar("scalars.p", "Σ_{n>p} 2^{−n} < ε/2", 0.5f64.powi(p as i32), eps / 2.0, 0.0));
    rep.push(scalar("scalars.z0", "ρ(z₀, x₀) > p + R", pf + r, space.dist(&z0, x0), 0.0));
    rep.push(CheckRecord::new("scalars.y0", "ρ(y₀, z₀) = s", 1, tol, -(space.dist(&y0, &z0) - s).abs()));
    let fx0 = eval_map(space, f, x0)?;
    let bounded = rec.kind == RecordKind::Step1Bounded;
    if !bounded {
        rep.push(scalar("scalars.t", "t < 1/2", t, 0.5, 0.0));
        rep.push(scalar("scalars.t_eps", "ω(p)·t < ε/2", w.at(pf) * t, eps / 2.0, 0.0));
        rep.push(scalar("scalars.m", "ω(M) ≥ ω(s)/(t/2)", ws / (t / 2.0), w.at(m), tol));
        let r_def = (2.0 - t) * (m + s) / t;
        rep.push(CheckRecord::new("scalars.r", "R = t⁻¹(2 − t)(M + s)", 1, tol, rel(0.0, (r - r_def).abs(), r)));
        let lip = (1.0 - t) * r / (r - (m + s));
        rep.push(CheckRecord::new(
            "scalars.r_lip",
            "(1 − t)R/(R − (M + s)) = 1 − t/2",
            1,
            tol,
            -(lip - (1.0 - t / 2.0)).abs(),
        ));
        let w0_def = space.combine(&eval_map(space, f, &z0)?, &fx0, t);
        rep.push(CheckRecord::new("points.w0", "w₀ = (1 − t)f(z₀) ⊕ t f(x₀)", 1, tol, -space.dist(&w0, &w0_def)));
        rep.push(CheckRecord::new("points.e0", "ρ(w₀, e₀) = ω(s)", 1, tol, -(space.dist(&w0, &e0) - ws).abs()));
        let g_mod = w.scaled(1.0 - t / 2.0)?;
        rep.push(contraction(space, rec, &g, &g_mod, "g_bound", "ρ(g(x), g(y)) ≤ (1 − t/2)ω(ρ(x, y))", cfg, 1)?);
        exact(rep, space, &h, &[("h(z0)", z0.clone(), e0.clone())], tol)?;
        let ring = space.sample_sphere(&z0, s + 0.5 * m, &mut crate::par::rng(derive(cfg.seed, 3)));
        exact(rep, space, &g, &[("g on B(z0, M+s)", ring, w0.clone())], tol)?;
    } else {
        let big = ConstructionRecord::need(&rec.omega_sup, "omega_sup")?;
        let sp = ConstructionRecord::need(&rec.s_prime, "s_prime")?;
        let (w1, w2, g1) = (
            ConstructionRecord::need(&rec.w1, "w1")?,
            ConstructionRecord::need(&rec.w2, "w2")?,
            ConstructionRecord::need(&rec.g1, "g1")?,
        );
        rep.push(scalar("scalars.t", "t ≤ min{μ/4, ε/(2Ω)}", t, (mu / 4.0).min(eps / (2.0 * big)), tol));
        rep.push(scalar("scalars.s_prime", "ω(s') ≥ (1 − t)Ω", (1.0 - t) * big, w.at(sp), tol));
        rep.push(CheckRecord::new("scalars.m", "M = s + 3s'", 1, tol, -(m - (s + 3.0 * sp)).abs()));
        rep.push(scalar("scalars.r", "R ≥ M/t", m / t, r, tol));
        rep.push(scalar("scalars.r_lip", "(1 − t)R/(R − M) ≤ 1", (1.0 - t) * r / (r - m), 1.0, tol));
        rep.push(CheckRecord::new("points.w0", "w₀ = g₁(z₀)", 1, tol, -space.dist(&w0, &eval_map(space, &g1, &z0)?)));
        let image = crate::constructions::sample_image_for_check(
            space,
            &g1,
            &z0,
            m + 1.0,
            cfg.estimate_budget,
            derive(cfg.seed, 5),
        )?;
        let phi_e0 = phi_hat(space, &image, &e0).0.max(ConstructionRecord::need(&rec.phi_e0, "phi_e0")?);
        rep.push(
            CheckRecord::new(
                "points.phi_e0",
                "|φ(e₀) − (1 − t)Ω| ≤ tΩ/4",
                image.len(),
                tol,
                t * big / 4.0 - (phi_e0 - (1.0 - t) * big).abs(),
            )
            .with_witness(json!({ "phi_e0": phi_e0, "target": (1.0 - t) * big })),
        );
        rep.push(scalar("points.w1_far", "ρ(w₁, e₀) > (1 − 2t)Ω", (1.0 - 2.0 * t) * big, space.dist(&w1, &e0), 0.0));
        rep.push(scalar("points.w0_w1", "ρ(w₀, w₁) ≤ (1 − t)Ω", space.dist(&w0, &w1), (1.0 - t) * big, tol));
        let w2_def = space.combine(&w1, &e0, ws / big);
        rep.push(CheckRecord::new("points.w2", "w₂ = (1 − ω(s)/Ω)w₁ ⊕ (ω(s)/Ω)e₀", 1, tol, -space.dist(&w2, &w2_def)));
        let g1_mod = w.scaled(1.0 - t)?;
        rep.push(contraction(space, rec, &g1, &g1_mod, "g1_bound", "ρ(g₁(x), g₁(y)) ≤ (1 − t)ω(ρ(x, y))", cfg, 1)?);
        rep.push(contraction(space, rec, &g, w, "g2_in_c_omega", "ρ(g₂(x), g₂(y)) ≤ ω(ρ(x, y))", cfg, 2)?);
        let mut rng = crate::par::rng(derive(cfg.seed, 3));
        let at = |d: f64, rng: &mut Rng| space.sample_sphere(&z0, d, rng);
        let pts = [
            ("h(z0)", z0.clone(), w2.clone()),
            ("h on (s, s+s']", at(s + 0.5 * sp, &mut rng), w1.clone()),
            ("h at s+2s'", at(s + 2.0 * sp, &mut rng), w0.clone()),
            ("h on (s+2s', M]", at(s + 2.5 * sp, &mut rng), w0.clone()),
        ];
        exact(rep, space, &h, &pts, tol)?;
    }
    for c in h_in_c_omega_checks(space, rec, &h, cfg)? {
        rep.push(c);
    }
    let sep = space.dist(&eval_map(space, &h, &y0)?, &eval_map(space, &h, &z0)?);
    rep.push(scalar("separation", "ρ(h(y₀), h(z₀)) ≥ (1 − μ/2)ω(s)", (1.0 - mu / 2.0) * ws, sep, tol));
    let opts = DOptions { terms: 16, ..DOptions::default() };
    let d = metric_d(space, f, &h, x0, w, &opts)?;
    rep.push(
        CheckRecord::new("d_f_h", "d(f, h) < ε (upper end of the enclosure)", opts.terms as usize, 0.0, eps - d.hi)
            .with_witness(json!({ "lo": d.lo, "hi": d.hi, "eps": eps })),
    );
    Ok(())
}

fn exact(
    rep: &mut VerificationReport,
    space: &Space,
    m: &MapExpr,
    pts: &[(&str, Point, Point)],
    tol: f64,
) -> Result<()> {
    for (label, x, want) in pts {
        let got = eval_map(space, m, x)?;
        rep.push(
            CheckRecord::new(
                format!("values.{label}"),
                "value prescribed by the construction",
                1,
                tol,
                -space.dist(&got, want),
            )
            .with_witness(json!({ "x": x, "got": got, "want": want })),
        );
    }
    Ok(())
}

/// `ρ(m(x), m(y)) ≤ bound(ρ(x, y))` on radial pairs through the retraction
/// annulus around `z₀` and on pairs around `x₀`.
#[allow(clippy::too_many_arguments)]
fn contraction(
    space: &Space,
    rec: &ConstructionRecord,
    m: &MapExpr,
    bound: &Modulus,
    id: &str,
    anchor: &str,
    cfg: &VerifyConfig,
    stream: u64,
) -> Result<CheckRecord> {
    let z0 = ConstructionRecord::need(&rec.z0, "z0")?;
    let r = ConstructionRecord::need(&rec.r, "r")?;
    let strat = StratifiedPairs { space, z0: z0.clone(), bands: vec![(0.0, r + 4.0)] };
    let domains = [SampleDomain::new(rec.x0.clone(), 4.0 * rec.s.max(1.0))];
    let around_x0 = default_pairs(space, &domains, 1e-3, 4.0 * rec.s.max(1.0));
    let gen = |rng: &mut Rng| if rng.gen::<bool>() { strat.sample(0, 0, rng) } else { around_x0(rng) };
    let f = check_in_c_omega(space, m, bound, cfg.pairs / 4, derive(cfg.seed, 10 + stream), cfg.construction_tol, gen)?;
    Ok(falsification_record(id.to_string(), anchor, cfg.construction_tol, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{step1_bounded, step1_unbounded, Step1Params};

    fn small() -> VerifyConfig {
        VerifyConfig { pairs: 8000, estimate_budget: 4000, ..VerifyConfig::default() }
    }

    #[test]
    fn case_tables_are_total() {
        for (kind, n, cases) in [(RecordKind::Step1Unbounded, 3, 4), (RecordKind::Step1Bounded, 5, 10)] {
            let mut seen = std::collections::BTreeSet::new();
            for a in 0..n {
                for b in 0..n {
                    let c = band_case(kind, a, b).unwrap();
                    assert_eq!(Some(c), band_case(kind, b, a));
                    seen.insert(c);
                }
            }
            assert_eq!(seen.len(), cases);
        }
    }

    #[test]
    fn unbounded_line_passes() {
        let sp = Space::euclidean(1);
        let w = Modulus::linear(1.0).unwrap();
        let rec = step1_unbounded(&sp, &w, &MapExpr::Identity, &Step1Params::new(1.0, 0.5, 0.5)).unwrap();
        let rep = verify_step1(&sp, &rec, &small());
        assert!(rep.passed(), "{}", rep.to_markdown());
        assert!(rep.check("h_in_c_omega.case4").is_some());
    }

    #[test]
    fn bounded_star_passes() {
        let sp = Space::star_tree(4);
        let w = Modulus::truncated_linear(1.0, 2.0).unwrap();
        let rec = step1_bounded(&sp, &w, &MapExpr::constant(Point::hub()), &Step1Params::new(1.0, 0.5, 0.5)).unwrap();
        let rep = verify_step1(&sp, &rec, &small());
        assert!(rep.passed(), "{}", rep.to_markdown());
        assert!(rep.check("coverage.case10").unwrap().pass);
    }
}
