use std::path::PathBuf;

use hypermod::constructions::{porosity_center, step1, ConstructionRecord, Step1Params};
use hypermod::funcspace::{mod_lower, DenseSequence, RetractionParams, SampleDomain};
use hypermod::par::derive;
use hypermod::verify::{
    verify_dtheta, verify_porosity, verify_retraction, verify_space, verify_step1, verify_step2, CheckRecord,
    VerificationReport,
};
use hypermod::{MapExpr, Modulus, Space};
use serde_json::json;

use crate::config::{RunConfig, Scenario};
use crate::output::{self, Curve};

/// Why a run stopped before producing a report.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Construction(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::Io(_) => 2,
            Failure::Construction(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e:#}"),
            Failure::Construction(e) => write!(f, "{e:#}"),
            Failure::Io(e) => write!(f, "output error: {e:#}"),
        }
    }
}

fn config(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

/// Domain errors come from parameters; every other core error is a failed
/// or infeasible construction.
fn construction(e: hypermod::Error) -> Failure {
    match e {
        hypermod::Error::Domain(_) => Failure::Config(e.into()),
        _ => Failure::Construction(e.into()),
    }
}

pub struct Outcome {
    pub record: Option<ConstructionRecord>,
    pub report: VerificationReport,
    pub curve: Option<Curve>,
}

pub fn execute(cfg: &RunConfig, scenario: Scenario) -> Result<Outcome, Failure> {
    cfg.validate(scenario).map_err(config)?;
    let space = cfg.space.build().map_err(config)?;
    let vcfg = cfg.verify_config();
    let mut curve = None;
    let (record, report) = match scenario {
        Scenario::VerifySpace => {
            let trials = cfg.trials(scenario);
            let tol = cfg.tolerances.geometry;
            let mut rep = VerificationReport::new("verify-space", cfg.seed);
            rep.extend(verify_space(&space, trials, tol, cfg.seed));
            let phi = RetractionParams::new(space.base.clone(), 1.0, 2.0).map_err(config)?;
            rep.extend(verify_retraction(&space, &phi, trials, tol, derive(cfg.seed, 1)));
            (None, rep)
        }
        Scenario::Step1 | Scenario::Step2 => {
            let rec = step1_record(cfg, &space)?;
            let rep = if scenario == Scenario::Step1 {
                verify_step1(&space, &rec, &vcfg)
            } else {
                verify_step2(&space, &rec, &vcfg)
            };
            if cfg.output.plot {
                curve = Some(record_curve(cfg, &space, &rec, "h")?);
            }
            (Some(rec), rep)
        }
        Scenario::Porosity => {
            let omega = cfg.modulus().map_err(config)?;
            let f = cfg.map.build(&space).map_err(config)?;
            let (s, eps) = (cfg.scalars.s.unwrap_or_default(), cfg.scalars.eps.unwrap_or_default());
            let rec = porosity_center(&space, &omega, &f, s, eps).map_err(construction)?;
            let rep = verify_porosity(&space, &rec, &vcfg);
            if cfg.output.plot {
                curve = Some(record_curve(cfg, &space, &rec, "g")?);
            }
            (Some(rec), rep)
        }
        Scenario::Dtheta => {
            let theta = cfg.theta.unwrap_or(DenseSequence::Dyadic);
            (None, verify_dtheta(&space, &theta, cfg.budgets.terms, cfg.trials(scenario), cfg.seed))
        }
        Scenario::EstimateModulus => {
            let omega = cfg.modulus().map_err(config)?;
            let f = cfg.map.build(&space).map_err(config)?;
            let start = std::time::Instant::now();
            let c = modulus_curve(cfg, &space, &omega, &f, &[], "f")?;
            let mut rep = estimate_report(cfg, &c);
            rep.wall_time_s = start.elapsed().as_secs_f64();
            curve = Some(c);
            (None, rep)
        }
    };
    Ok(Outcome { record, report, curve })
}

fn step1_record(cfg: &RunConfig, space: &Space) -> Result<ConstructionRecord, Failure> {
    let omega = cfg.modulus().map_err(config)?;
    let f = cfg.map.build(space).map_err(config)?;
    let sc = &cfg.scalars;
    let mut params = Step1Params::new(sc.s.unwrap_or_default(), sc.mu.unwrap_or_default(), sc.eps.unwrap_or_default());
    params.seed = cfg.seed;
    params.budget = cfg.budgets.construction;
    step1(space, &omega, &f, &params).map_err(construction)
}

fn record_curve(cfg: &RunConfig, space: &Space, rec: &ConstructionRecord, which: &str) -> Result<Curve, Failure> {
    let m = match which {
        "h" => rec.h.clone(),
        _ => rec.g.clone(),
    }
    .ok_or_else(|| Failure::Construction(anyhow::anyhow!("record has no `{which}`")))?;
    let mut domains = Vec::new();
    if let Some(z0) = &rec.z0 {
        let reach = rec.m.unwrap_or(0.0) + 4.0 * rec.s;
        domains.push(SampleDomain::new(z0.clone(), reach.max(1.0)));
    }
    modulus_curve(cfg, space, &rec.modulus, &m, &domains, which)
}

/// `mod_lower(m, s)` on `grid` points of `(0, 4s]`, sampled around the base
/// point and `extra`.
fn modulus_curve(
    cfg: &RunConfig,
    space: &Space,
    omega: &Modulus,
    m: &MapExpr,
    extra: &[SampleDomain],
    label: &str,
) -> Result<Curve, Failure> {
    let s0 = cfg.scalars.s.unwrap_or(1.0);
    let n = cfg.budgets.grid;
    let mut rows = Vec::with_capacity(n);
    for k in 1..=n {
        let s = 4.0 * s0 * k as f64 / n as f64;
        let mut domains = vec![SampleDomain::new(space.base.clone(), (4.0 * s).max(4.0))];
        domains.extend_from_slice(extra);
        let est = mod_lower(space, m, s, cfg.budgets.estimate, derive(cfg.seed, k as u64), &domains, &[])
            .map_err(construction)?;
        rows.push((s, omega.at(s), est.value));
    }
    Ok(Curve { label: format!("ω(s) and sampled ω_{label}(s)"), rows })
}

fn estimate_report(cfg: &RunConfig, curve: &Curve) -> VerificationReport {
    let mut rep = VerificationReport::new("estimate-modulus", cfg.seed);
    rep.budget("estimate", cfg.budgets.estimate);
    rep.budget("grid", cfg.budgets.grid);
    for (i, (s, w, m)) in curve.rows.iter().enumerate() {
        let c = CheckRecord::new(
            format!("mod_lower.s{:02}", i + 1),
            "ω_f(s) ≤ ω(s)",
            cfg.budgets.estimate,
            cfg.tolerances.construction,
            w - m,
        );
        rep.push(c.with_witness(json!({ "s": s, "omega": w, "mod_lower": m })));
    }
    rep
}

/// Writes the record, the report and, when present, the plot data; returns
/// the written paths.
pub fn emit(cfg: &RunConfig, scenario: Scenario, out: &Outcome) -> Result<Vec<PathBuf>, Failure> {
    let dir = cfg.out_dir();
    let name = scenario.name();
    let mut paths = Vec::new();
    let mut put = |file: String, body: &str| -> Result<(), Failure> {
        paths.push(output::write(&dir, &file, body).map_err(Failure::Io)?);
        Ok(())
    };
    if let Some(rec) = &out.record {
        put(format!("{name}.record.json"), &rec.to_json())?;
    }
    put(format!("{name}.report.json"), &out.report.to_json())?;
    put(format!("{name}.report.md"), &out.report.to_markdown())?;
    if let (true, Some(c)) = (cfg.output.plot, &out.curve) {
        put(format!("{name}.modulus.csv"), &c.to_csv())?;
        put(format!("{name}.modulus.svg"), &c.to_svg())?;
    }
    Ok(paths)
}
