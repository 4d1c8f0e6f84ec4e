use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use serde::{Deserialize, Serialize};

use hypermod::funcspace::DenseSequence;
use hypermod::geometry::{Model, SpaceSpec};
use hypermod::moduli::ModulusSpec;
use hypermod::verify::VerifyConfig;
use hypermod::{MapExpr, Modulus, Point, Space};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Geodesic and retraction identities on one model.
    VerifySpace,
    /// Step-1 perturbation h of f and its checks.
    Step1,
    /// Robustness radius η around the Step-1 map.
    Step2,
    /// Porosity centre g and the ball B(g, αε).
    Porosity,
    /// Metric and convergence checks for d_Θ.
    Dtheta,
    /// Sampled lower bounds on the modulus of continuity of f.
    EstimateModulus,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::VerifySpace => "verify-space",
            Scenario::Step1 => "step1",
            Scenario::Step2 => "step2",
            Scenario::Porosity => "porosity",
            Scenario::Dtheta => "dtheta",
            Scenario::EstimateModulus => "estimate-modulus",
        }
    }
}

/// A map given either as a named preset or as MapExpr JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    /// `identity`, `constant`, `clamp`, `dilation` or `blend`.
    pub preset: Option<String>,
    pub expr: Option<String>,
    pub point: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub factor: Option<f64>,
    pub t: Option<f64>,
}

impl MapSpec {
    pub fn build(&self, space: &Space) -> Result<MapExpr> {
        let m = match (&self.preset, &self.expr) {
            (Some(_), Some(_)) => bail!("map: give either `preset` or `expr`, not both"),
            (None, Some(json)) => serde_json::from_str(json).context("map: `expr` is not MapExpr JSON")?,
            (preset, None) => {
                let base = space.base.clone();
                let point = || -> Result<Point> {
                    match &self.point {
                        Some(c) => point_in(space, c),
                        None => Ok(space.ray_point(&space.default_ray(&space.base), 1.0)),
                    }
                };
                match preset.as_deref().unwrap_or("identity") {
                    "identity" => MapExpr::Identity,
                    "constant" => MapExpr::constant(match &self.point {
                        Some(c) => point_in(space, c)?,
                        None => base,
                    }),
                    "clamp" => MapExpr::Clamp { center: base, radius: self.radius.unwrap_or(1.0) },
                    "dilation" => MapExpr::Dilation { center: base, factor: self.factor.unwrap_or(0.5) },
                    "blend" => MapExpr::blend(
                        MapExpr::Clamp { center: base, radius: self.radius.unwrap_or(1.0) },
                        MapExpr::constant(point()?),
                        self.t.unwrap_or(0.5),
                    ),
                    other => bail!("map: unknown preset `{other}`"),
                }
            }
        };
        m.validate().context("map")?;
        Ok(m)
    }
}

/// Reads model coordinates: a vector (euclidean), `[x, y]` (half-plane) or
/// `[ray, offset]` (star tree).
pub fn point_in(space: &Space, c: &[f64]) -> Result<Point> {
    let p = match space.model {
        Model::Euclidean { dimension } => {
            if c.len() != dimension {
                bail!("point {c:?} does not have {dimension} coordinates");
            }
            Point::euclidean(c.to_vec())
        }
        Model::HalfPlane => match c {
            [x, y] => Point::half_plane(*x, *y)?,
            _ => bail!("half-plane points are [x, y]"),
        },
        Model::StarTree { .. } => match c {
            [r, o] if *r >= 0.0 && r.fract() == 0.0 => Point::star(*r as u32, *o)?,
            _ => bail!("star-tree points are [ray_index, offset]"),
        },
    };
    space.check(&p)?;
    Ok(p)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scalars {
    pub s: Option<f64>,
    pub mu: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Pairs per sampled inequality.
    pub pairs: usize,
    /// Samples per modulus estimate.
    pub estimate: usize,
    pub neighbours: usize,
    /// Image samples drawn by the bounded Step-1 construction.
    pub construction: usize,
    /// Trials for the geometry and d_Θ suites; 10⁵ and 10³ when unset.
    pub trials: Option<usize>,
    /// Terms of Θ used by d_Θ.
    pub terms: usize,
    /// Points on the s-grid of plots and modulus estimates.
    pub grid: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        let v = VerifyConfig::default();
        Budgets {
            pairs: v.pairs,
            estimate: v.estimate_budget,
            neighbours: v.neighbours,
            construction: 20_000,
            trials: None,
            terms: 24,
            grid: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub geometry: f64,
    pub construction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let v = VerifyConfig::default();
        Tolerances { geometry: v.geometry_tol, construction: v.construction_tol }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: Option<PathBuf>,
    pub plot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub seed: u64,
    pub space: SpaceSpec,
    #[serde(default)]
    pub modulus: Option<ModulusSpec>,
    #[serde(default)]
    pub map: MapSpec,
    #[serde(default)]
    pub scalars: Scalars,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Output,
    /// Enumeration of Θ for the d_Θ suite.
    #[serde(default)]
    pub theta: Option<DenseSequence>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: None,
            seed: 0,
            space: SpaceSpec { model: "euclidean".into(), dimension: Some(2), base_point: None, rays: None },
            modulus: None,
            map: MapSpec::default(),
            scalars: Scalars::default(),
            budgets: Budgets::default(),
            tolerances: Tolerances::default(),
            output: Output::default(),
            theta: None,
        }
    }
}

/// Values from the command line; each one set replaces the config value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub trials: Option<usize>,
    pub tol: Option<f64>,
    pub model: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub plot: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(b) = o.budget {
            self.budgets.pairs = b;
            self.budgets.estimate = b;
            self.budgets.trials = Some(b);
        }
        if let Some(t) = o.trials {
            self.budgets.trials = Some(t);
        }
        if let Some(tol) = o.tol {
            self.tolerances.geometry = tol;
            self.tolerances.construction = tol;
        }
        if let Some(model) = &o.model {
            if *model != self.space.model {
                self.space = SpaceSpec { model: model.clone(), dimension: None, base_point: None, rays: None };
            }
        }
        if let Some(dir) = &o.out_dir {
            self.output.dir = Some(dir.clone());
        }
        self.output.plot |= o.plot;
    }

    /// Checks that `scenario` has everything it needs.
    pub fn validate(&self, scenario: Scenario) -> Result<()> {
        if let Some(s) = self.scenario {
            if s != scenario {
                bail!("config is for `{}` but `{}` was requested", s.name(), scenario.name());
            }
        }
        let needs: &[&str] = match scenario {
            Scenario::VerifySpace | Scenario::Dtheta => &[],
            Scenario::Step1 | Scenario::Step2 => &["modulus", "s", "mu", "eps"],
            Scenario::Porosity => &["modulus", "s", "eps"],
            Scenario::EstimateModulus => &["modulus", "s"],
        };
        let sc = &self.scalars;
        for n in needs {
            let present = match *n {
                "modulus" => self.modulus.is_some(),
                "s" => sc.s.is_some(),
                "mu" => sc.mu.is_some(),
                _ => sc.eps.is_some(),
            };
            if !present {
                bail!("`{}` needs `{n}`", scenario.name());
            }
        }
        if let Some(s) = sc.s {
            if !(s > 0.0 && s.is_finite()) {
                bail!("s = {s} must be > 0");
            }
        }
        if let Some(mu) = sc.mu {
            if !(mu > 0.0 && mu < 1.0) {
                bail!("μ = {mu} must lie in (0, 1)");
            }
        }
        if let Some(eps) = sc.eps {
            if !(eps > 0.0 && eps.is_finite()) {
                bail!("ε = {eps} must be > 0");
            }
        }
        let b = &self.budgets;
        if b.pairs == 0 || b.estimate == 0 || b.trials == Some(0) || b.construction == 0 || b.terms == 0 || b.grid == 0
        {
            bail!("budgets must be ≥ 1");
        }
        if !(self.tolerances.geometry >= 0.0 && self.tolerances.construction >= 0.0) {
            bail!("tolerances must be ≥ 0");
        }
        Ok(())
    }

    pub fn verify_config(&self) -> VerifyConfig {
        VerifyConfig {
            seed: self.seed,
            pairs: self.budgets.pairs,
            estimate_budget: self.budgets.estimate,
            neighbours: self.budgets.neighbours,
            geometry_tol: self.tolerances.geometry,
            construction_tol: self.tolerances.construction,
        }
    }

    pub fn trials(&self, scenario: Scenario) -> usize {
        let default = if scenario == Scenario::Dtheta { 1_000 } else { 100_000 };
        self.budgets.trials.unwrap_or(default)
    }

    pub fn modulus(&self) -> Result<Modulus> {
        match &self.modulus {
            Some(m) => Ok(m.build()?),
            None => bail!("no modulus configured"),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("hypermod-out"))
    }
}
