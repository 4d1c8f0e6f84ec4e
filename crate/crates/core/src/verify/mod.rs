//! Seeded property checks and their reports.
//!
//! Every check records the worst margin `rhs − lhs` it saw; it passes when
//! that margin is at least `−tolerance`. Checks flagged as controls run on
//! deliberately broken inputs and are expected to fail.

mod controls;
mod dtheta;
mod porosity;
mod space;
mod step1;
mod step2;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::par::{self, Rng};

pub use controls::{
    control_eta_inflated, control_halved_denominator, control_inflated_alpha, control_non_concave, control_t_squared,
    negative_controls,
};
pub use dtheta::verify_dtheta;
pub use porosity::verify_porosity;
pub use space::{verify_retraction, verify_space, TSquaredCombine};
pub use step1::{band_case, step1_cases, verify_step1, StratifiedPairs};
pub use step2::{step2_neighbours, verify_step2};

/// Sizes and tolerances shared by the suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Pairs per sampled inequality.
    pub pairs: usize,
    /// Sample budget for each modulus or displacement estimate.
    pub estimate_budget: usize,
    /// Number of sampled neighbours in the Step-2 and porosity suites.
    pub neighbours: usize,
    /// Tolerance for geometric identities.
    pub geometry_tol: f64,
    /// Tolerance for construction inequalities.
    pub construction_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            pairs: 100_000,
            estimate_budget: 20_000,
            neighbours: 60,
            geometry_tol: 1e-9,
            construction_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    /// Statement the check replays.
    pub anchor: String,
    pub trials: usize,
    pub tolerance: f64,
    /// Worst `rhs − lhs` observed.
    pub margin: f64,
    pub pass: bool,
    /// Points and scalars attaining the worst margin.
    pub witness: Option<serde_json::Value>,
    /// Set on checks run against deliberately broken inputs.
    #[serde(default)]
    pub control: bool,
}

impl CheckRecord {
    pub fn new(id: impl Into<String>, anchor: impl Into<String>, trials: usize, tolerance: f64, margin: f64) -> Self {
        CheckRecord {
            id: id.into(),
            anchor: anchor.into(),
            trials,
            tolerance,
            margin,
            pass: margin >= -tolerance,
            witness: None,
            control: false,
        }
    }

    pub fn with_witness(mut self, w: impl Serialize) -> Self {
        self.witness = Some(serde_json::to_value(w).expect("witness serialises"));
        self
    }

    pub fn as_control(mut self) -> Self {
        self.control = true;
        self
    }

    /// A regular check that passed, or a control that failed.
    pub fn as_expected(&self) -> bool {
        self.pass != self.control
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub checks: Vec<CheckRecord>,
    pub seed: u64,
    pub budgets: BTreeMap<String, usize>,
    pub wall_time_s: f64,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>, seed: u64) -> Self {
        VerificationReport { suite: suite.into(), checks: Vec::new(), seed, budgets: BTreeMap::new(), wall_time_s: 0.0 }
    }

    pub fn push(&mut self, c: CheckRecord) {
        self.checks.push(c);
    }

    pub fn budget(&mut self, name: &str, n: usize) {
        self.budgets.insert(name.to_string(), n);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        let prefix = other.suite.clone();
        for mut c in other.checks {
            c.id = format!("{prefix}/{}", c.id);
            self.checks.push(c);
        }
        for (k, v) in other.budgets {
            self.budgets.insert(format!("{prefix}/{k}"), v);
        }
        self.wall_time_s += other.wall_time_s;
    }

    /// Every regular check passed and every control failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckRecord::as_expected)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.as_expected())
    }

    pub fn check(&self, id: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise")
    }

    /// JSON of everything except the wall time, for reproducibility checks.
    pub fn stable_json(&self) -> String {
        let mut c = self.clone();
        c.wall_time_s = 0.0;
        c.to_json()
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "# {}: {verdict}\n", self.suite);
        let _ = writeln!(out, "seed `{}`, wall time {:.2} s\n", self.seed, self.wall_time_s);
        let _ = writeln!(out, "| check | result | margin | tolerance | trials | statement |");
        let _ = writeln!(out, "|---|---|---|---|---|---|");
        for c in &self.checks {
            let result = match (c.pass, c.control) {
                (true, false) => "pass",
                (false, false) => "**FAIL**",
                (false, true) => "fail (control, expected)",
                (true, true) => "**pass (control, unexpected)**",
            };
            let _ = writeln!(
                out,
                "| {} | {result} | {:.3e} | {:.0e} | {} | {} |",
                c.id, c.margin, c.tolerance, c.trials, c.anchor
            );
        }
        let bad: Vec<_> = self.failures().collect();
        if !bad.is_empty() {
            let _ = writeln!(out, "\n## Unexpected outcomes\n");
            for c in bad {
                let w = c.witness.as_ref().map_or("none".to_string(), |w| w.to_string());
                let _ = writeln!(out, "- `{}`: margin {:.6e}, witness `{w}`", c.id, c.margin);
            }
        }
        out
    }
}

/// Times `body`, which fills a fresh report.
pub(crate) fn timed(suite: &str, seed: u64, body: impl FnOnce(&mut VerificationReport)) -> VerificationReport {
    let start = Instant::now();
    let mut r = VerificationReport::new(suite, seed);
    body(&mut r);
    r.wall_time_s = start.elapsed().as_secs_f64();
    r
}

/// Runs `trial` `trials` times on seeded generators; each call returns a
/// margin and its witness. Keeps the smallest margin, first one on ties.
pub(crate) fn sample_check<W, F>(id: &str, anchor: &str, trials: usize, tol: f64, seed: u64, trial: F) -> CheckRecord
where
    W: Serialize + Send,
    F: Fn(&mut Rng) -> (f64, W) + Sync + Send,
{
    let worst = par::chunks(seed, trials, |rng, _, len| {
        let mut worst: Option<(f64, W)> = None;
        for _ in 0..len {
            let (m, w) = trial(rng);
            if worst.as_ref().is_none_or(|b| m < b.0 || m.is_nan()) {
                worst = Some((m, w));
            }
        }
        worst
    });
    let mut best: Option<(f64, W)> = None;
    for (m, w) in worst.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| m < b.0 || m.is_nan()) {
            best = Some((m, w));
        }
    }
    match best {
        Some((m, w)) => {
            let m = if m.is_nan() { f64::NEG_INFINITY } else { m };
            CheckRecord::new(id, anchor, trials, tol, m).with_witness(w)
        }
        None => CheckRecord::new(id, anchor, 0, tol, f64::INFINITY),
    }
}

/// A check that failed to run because a computation returned an error.
pub(crate) fn errored(id: &str, anchor: &str, e: &crate::Error) -> CheckRecord {
    CheckRecord::new(id, anchor, 0, 0.0, f64::NEG_INFINITY).with_witness(serde_json::json!({ "error": e.to_string() }))
}

/// A single scalar inequality `lhs ≤ rhs`.
pub(crate) fn scalar(id: &str, anchor: &str, lhs: f64, rhs: f64, tol: f64) -> CheckRecord {
    CheckRecord::new(id, anchor, 1, tol, rhs - lhs).with_witness(serde_json::json!({ "lhs": lhs, "rhs": rhs }))
}

/// Relative margin for `lhs ≤ rhs` on quantities of size `scale`.
pub(crate) fn rel(rhs: f64, lhs: f64, scale: f64) -> f64 {
    (rhs - lhs) / scale.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controls_invert_the_verdict() {
        let ok = CheckRecord::new("a", "", 1, 1e-9, 0.5);
        let bad = CheckRecord::new("b", "", 1, 1e-9, -0.5);
        assert!(ok.as_expected() && !bad.as_expected());
        assert!(!ok.clone().as_control().as_expected());
        assert!(bad.clone().as_control().as_expected());
        let mut r = VerificationReport::new("s", 0);
        r.push(ok);
        r.push(bad.as_control());
        assert!(r.passed());
        assert!(r.to_markdown().contains("expected"));
    }

    #[test]
    fn sampled_worst_is_kept() {
        let c = sample_check("x", "", 5000, 0.0, 1, |rng| {
            let v: f64 = rand::Rng::gen(rng);
            (v, v)
        });
        assert!(c.margin >= 0.0 && c.margin < 1e-2);
        assert_eq!(c.witness, Some(serde_json::json!(c.margin)));
        let again = sample_check("x", "", 5000, 0.0, 1, |rng| {
            let v: f64 = rand::Rng::gen(rng);
            (v, v)
        });
        assert_eq!(c, again);
    }

    #[test]
    fn stable_json_ignores_time() {
        let mut a = VerificationReport::new("s", 0);
        a.wall_time_s = 1.0;
        let mut b = a.clone();
        b.wall_time_s = 2.0;
        assert_eq!(a.stable_json(), b.stable_json());
    }
}
