#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Overrides, RunConfig, Scenario};
use run::Failure;

/// Builds the perturbation constructions on a chosen space and checks the
/// inequalities they are meant to satisfy.
#[derive(Debug, Parser)]
#[command(name = "hypermod", version)]
struct Cli {
    #[command(subcommand)]
    scenario: Scenario,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sample budget for every sampled check and estimate.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Trials for the geometry and d_Θ suites.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Tolerance for every check.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Space model: euclidean, half_plane or star_tree.
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Also write ω(s) against the sampled modulus as CSV and SVG.
    #[arg(long, global = true)]
    plot: bool,
}

#[cfg(feature = "parallel")]
fn cap_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("HYPERMOD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Config(anyhow::anyhow!("HYPERMOD_THREADS = `{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Config(e.into()))
}

#[cfg(not(feature = "parallel"))]
fn cap_threads() -> Result<(), Failure> {
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("hypermod: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn real_main(cli: &Cli) -> Result<u8, Failure> {
    cap_threads()?;
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(Failure::Config)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        budget: cli.budget,
        trials: cli.trials,
        tol: cli.tol,
        model: cli.model.clone(),
        out_dir: cli.out_dir.clone(),
        plot: cli.plot,
    });
    let outcome = run::execute(&cfg, cli.scenario)?;
    let paths = run::emit(&cfg, cli.scenario, &outcome)?;
    let rep = &outcome.report;
    let verdict = if rep.passed() { "PASS" } else { "FAIL" };
    println!("{}: {verdict} ({} checks, {:.2} s)", cli.scenario.name(), rep.checks.len(), rep.wall_time_s);
    for c in rep.failures() {
        println!("  unexpected: {} margin {:.3e}", c.id, c.margin);
    }
    for p in paths {
        println!("  wrote {}", p.display());
    }
    Ok(if rep.passed() { 0 } else { 1 })
}
