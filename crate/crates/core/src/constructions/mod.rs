//! Explicit perturbations of a map `f ∈ C_ω(X)`: the radial retraction, the
//! two Step-1 maps `h`, the Step-2 neighbourhood radius, the porosity centre
//! `g`, the gauge estimate `φ_f` and the pointwise-topology choice of `p`.

mod pointwise;
mod porosity;
mod step1;
mod step2;

use serde::{Deserialize, Serialize};

use crate::funcspace::{MapExpr, RetractionParams};
use crate::geometry::{Point, Space};
use crate::moduli::Modulus;

pub use crate::funcspace::RetractionParams as Retraction;
pub use pointwise::{choose_p_pointwise, pointwise_tail};
pub use porosity::{phi_f_estimate, phi_f_profile, porosity_center, porosity_neighbour, PorosityNeighbour};
pub use step1::{choose_p, phi_hat, step1, step1_bounded, step1_unbounded, Step1Params};
pub use step2::{step2_eta, step2_eta_log2, step2_neighbour, step2_q, Step2Neighbour};

pub(crate) use step1::sample_image as sample_image_for_check;

/// `Φ(x)` for the radial retraction.
pub fn retraction_eval(space: &Space, phi: &RetractionParams, x: &Point) -> Point {
    phi.apply(space, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Step1Unbounded,
    Step1Bounded,
    Porosity,
}

/// Every scalar, point and map chosen by a construction, sufficient to replay
/// and re-check it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionRecord {
    pub kind: RecordKind,
    pub space: Space,
    pub modulus: Modulus,
    pub f: MapExpr,
    pub x0: Point,
    pub s: f64,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_prime: Option<f64>,
    /// `Ω`: supremum of ω (Step 1 bounded) or the displacement bound of `f`
    /// (porosity).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_sup: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    /// Factor `c < 1` with `ρ(h(x), h(y)) ≤ c·ω(ρ(x, y))` for `ρ(x, y) ≥ s`
    /// on the porosity ball.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rakotch: Option<f64>,
    /// Sampled `φ(e₀)` at the time of construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_e0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e0: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w2: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retraction: Option<RetractionParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g1: Option<MapExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<MapExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<MapExpr>,
    /// Content hashes of `f`, `g1`, `g`, `h`, keyed by name.
    pub hashes: std::collections::BTreeMap<String, String>,
    pub seed: u64,
    pub budget: usize,
}

impl ConstructionRecord {
    pub(crate) fn new(kind: RecordKind, space: &Space, modulus: &Modulus, f: &MapExpr, s: f64, eps: f64) -> Self {
        ConstructionRecord {
            kind,
            space: space.clone(),
            modulus: modulus.clone(),
            f: f.clone(),
            x0: space.base.clone(),
            s,
            eps,
            mu: None,
            p: None,
            t: None,
            m: None,
            r: None,
            s_prime: None,
            omega_sup: None,
            gamma: None,
            alpha: None,
            eps0: None,
            rakotch: None,
            phi_e0: None,
            z0: None,
            y0: None,
            w0: None,
            e0: None,
            w1: None,
            w2: None,
            retraction: None,
            g1: None,
            g: None,
            h: None,
            hashes: Default::default(),
            seed: 0,
            budget: 0,
        }
    }

    pub(crate) fn seal(mut self) -> Self {
        let mut hashes = std::collections::BTreeMap::new();
        hashes.insert("f".to_string(), self.f.content_hash());
        for (name, m) in [("g1", &self.g1), ("g", &self.g), ("h", &self.h)] {
            if let Some(m) = m {
                hashes.insert(name.to_string(), m.content_hash());
            }
        }
        self.hashes = hashes;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialise")
    }

    pub(crate) fn need<T: Clone>(v: &Option<T>, name: &str) -> crate::Result<T> {
        v.clone().ok_or_else(|| crate::Error::Misuse(format!("record has no `{name}`")))
    }
}
