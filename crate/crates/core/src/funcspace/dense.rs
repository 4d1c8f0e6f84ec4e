use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{Model, Point, Space};

/// Enumerations of countable dense subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenseSequence {
    /// Stage `k = 1, 2, …` lists the dyadic grid of step `2^{−k}` inside the
    /// cube of side `2k` around the base point (euclidean), the same grid in
    /// `(x, log y)` (half-plane), or offsets `j·2^{−k} ≤ k` on every configured
    /// branch, branches interleaved (star tree).
    Dyadic,
    /// `0, 1, −1, 2, −2, …` along the first axis of a euclidean space. Not
    /// dense; used as a test sequence.
    Integers,
}

impl DenseSequence {
    /// First `n` terms `θ₁, …, θ_n`.
    pub fn points(&self, space: &Space, n: usize) -> Result<Vec<Point>> {
        let mut out = Vec::with_capacity(n);
        match (self, &space.model) {
            (DenseSequence::Integers, Model::Euclidean { dimension }) => {
                for i in 0..n {
                    let k = i.div_ceil(2) as f64;
                    let mut v = vec![0.0; *dimension];
                    v[0] = if i % 2 == 1 { k } else { -k };
                    out.push(Point::Euclidean(v));
                }
            }
            (DenseSequence::Integers, _) => return domain("the integer sequence lives on a euclidean space"),
            (DenseSequence::Dyadic, model) => {
                let mut k = 1u32;
                while out.len() < n {
                    stage(space, model, k, n, &mut out);
                    k += 1;
                }
            }
        }
        Ok(out)
    }
}

fn stage(space: &Space, model: &Model, k: u32, n: usize, out: &mut Vec<Point>) {
    let scale = 2f64.powi(k as i32);
    let half = (k as f64 * scale) as i64;
    let full = |out: &Vec<Point>| out.len() >= n;
    match (model, &space.base) {
        (Model::Euclidean { dimension }, Point::Euclidean(c)) => {
            let side = (2 * half + 1) as u64;
            let total = side.saturating_pow(*dimension as u32);
            for mut idx in 0..total {
                if full(out) {
                    return;
                }
                let v = c
                    .iter()
                    .map(|ci| {
                        let j = (idx % side) as i64 - half;
                        idx /= side;
                        ci + j as f64 / scale
                    })
                    .collect();
                out.push(Point::Euclidean(v));
            }
        }
        (Model::HalfPlane, Point::HalfPlane { x, y }) => {
            for i in -half..=half {
                for j in -half..=half {
                    if full(out) {
                        return;
                    }
                    out.push(Point::HalfPlane { x: x + i as f64 / scale, y: y * (j as f64 / scale).exp() });
                }
            }
        }
        (Model::StarTree { rays }, _) => {
            for j in 0..=half {
                for r in 0..*rays {
                    if full(out) {
                        return;
                    }
                    if j == 0 && r > 0 {
                        continue;
                    }
                    out.push(Point::Star { ray: r, offset: j as f64 / scale });
                }
            }
        }
        _ => unreachable!("space base point does not match its model"),
    }
}
