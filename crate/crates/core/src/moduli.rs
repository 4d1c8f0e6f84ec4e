//! Concave, nondecreasing, nonzero moduli ω with ω(0) = 0.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Bisection steps used by every inverse search.
const BISECTION_STEPS: usize = 64;
/// Doublings tried before an inverse search gives up.
const MAX_DOUBLINGS: usize = 1100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Modulus {
    /// `c·s`
    Linear { c: f64 },
    /// `c·s^α`, `α ∈ (0, 1]`
    Power { c: f64, alpha: f64 },
    /// `min(c·s, cap)`
    TruncatedLinear { c: f64, cap: f64 },
    /// `cap·(1 − e^{−s/τ})`
    BoundedExp { cap: f64, tau: f64 },
    /// Linear interpolation of `nodes` (first node `(0, 0)`, slopes strictly
    /// decreasing), continued with `tail_slope` past the last node.
    PiecewiseLinear { nodes: Vec<(f64, f64)>, tail_slope: f64 },
}

impl Modulus {
    pub fn linear(c: f64) -> Result<Self> {
        positive("c", c)?;
        Ok(Modulus::Linear { c })
    }

    pub fn power(c: f64, alpha: f64) -> Result<Self> {
        positive("c", c)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return domain(format!("power exponent {alpha} must lie in (0, 1]"));
        }
        Ok(Modulus::Power { c, alpha })
    }

    pub fn truncated_linear(c: f64, cap: f64) -> Result<Self> {
        positive("c", c)?;
        positive("cap", cap)?;
        Ok(Modulus::TruncatedLinear { c, cap })
    }

    pub fn bounded_exp(cap: f64, tau: f64) -> Result<Self> {
        positive("cap", cap)?;
        positive("tau", tau)?;
        Ok(Modulus::BoundedExp { cap, tau })
    }

    /// Validated piecewise-linear modulus. A missing `(0, 0)` node is
    /// prepended and consecutive segments with equal slope are merged.
    pub fn piecewise(nodes: &[(f64, f64)], tail_slope: f64) -> Result<Self> {
        let (nodes, slopes) = normalise_nodes(nodes)?;
        if !(tail_slope >= 0.0) || !tail_slope.is_finite() {
            return domain(format!("tail slope {tail_slope} must be finite and ≥ 0"));
        }
        if slopes.iter().any(|&m| m < 0.0) {
            return domain("piecewise modulus must be nondecreasing");
        }
        if slopes.windows(2).any(|w| w[1] >= w[0]) {
            return domain("piecewise modulus is not concave: slopes must strictly decrease");
        }
        let last = *slopes.last().unwrap();
        if tail_slope > last {
            return domain(format!("tail slope {tail_slope} exceeds the last segment slope {last}"));
        }
        if nodes.last().unwrap().1 <= 0.0 && tail_slope == 0.0 {
            return domain("modulus must be nonzero");
        }
        let mut nodes = nodes;
        // equal tail slope continues the last segment
        if tail_slope == last && nodes.len() > 2 {
            nodes.pop();
        }
        Ok(Modulus::PiecewiseLinear { nodes, tail_slope })
    }

    /// Piecewise-linear function without the concavity checks; only for
    /// building negative controls.
    pub fn piecewise_unchecked(nodes: Vec<(f64, f64)>, tail_slope: f64) -> Self {
        Modulus::PiecewiseLinear { nodes, tail_slope }
    }

    /// Re-runs the constructor checks, e.g. after deserialisation.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Modulus::Linear { c } => Modulus::linear(c).map(|_| ()),
            Modulus::Power { c, alpha } => Modulus::power(c, alpha).map(|_| ()),
            Modulus::TruncatedLinear { c, cap } => Modulus::truncated_linear(c, cap).map(|_| ()),
            Modulus::BoundedExp { cap, tau } => Modulus::bounded_exp(cap, tau).map(|_| ()),
            Modulus::PiecewiseLinear { ref nodes, tail_slope } => Modulus::piecewise(nodes, tail_slope).map(|_| ()),
        }
    }

    /// `ω(s)` for `s ≥ 0`; negative input is clamped to 0.
    #[inline]
    pub fn at(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match *self {
            Modulus::Linear { c } => c * s,
            Modulus::Power { c, alpha } => {
                if alpha == 1.0 {
                    c * s
                } else {
                    c * s.powf(alpha)
                }
            }
            Modulus::TruncatedLinear { c, cap } => (c * s).min(cap),
            Modulus::BoundedExp { cap, tau } => -cap * (-s / tau).exp_m1(),
            Modulus::PiecewiseLinear { ref nodes, tail_slope } => {
                let i = nodes.partition_point(|&(x, _)| x <= s);
                if i >= nodes.len() {
                    let (x, y) = nodes[nodes.len() - 1];
                    y + tail_slope * (s - x)
                } else {
                    let (x0, y0) = nodes[i - 1];
                    let (x1, y1) = nodes[i];
                    y0 + (y1 - y0) * (s - x0) / (x1 - x0)
                }
            }
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return domain(format!("modulus argument {s} must be ≥ 0"));
        }
        Ok(self.at(s))
    }

    /// `Ω = sup_{u>0} ω(u)`, or `None` when ω is unbounded.
    pub fn sup(&self) -> Option<f64> {
        match *self {
            Modulus::Linear { .. } | Modulus::Power { .. } => None,
            Modulus::TruncatedLinear { cap, .. } | Modulus::BoundedExp { cap, .. } => Some(cap),
            Modulus::PiecewiseLinear { ref nodes, tail_slope } => {
                if tail_slope > 0.0 {
                    None
                } else {
                    Some(nodes[nodes.len() - 1].1)
                }
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.sup().is_some()
    }

    /// `k·ω` for `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        positive("k", k)?;
        Ok(match *self {
            Modulus::Linear { c } => Modulus::Linear { c: k * c },
            Modulus::Power { c, alpha } => Modulus::Power { c: k * c, alpha },
            Modulus::TruncatedLinear { c, cap } => Modulus::TruncatedLinear { c: k * c, cap: k * cap },
            Modulus::BoundedExp { cap, tau } => Modulus::BoundedExp { cap: k * cap, tau },
            Modulus::PiecewiseLinear { ref nodes, tail_slope } => Modulus::PiecewiseLinear {
                nodes: nodes.iter().map(|&(x, y)| (x, k * y)).collect(),
                tail_slope: k * tail_slope,
            },
        })
    }

    /// Checks `ω(λs) ≤ λω(s)` for `λ ≥ 1`, which every concave ω with
    /// ω(0) = 0 satisfies. `false` means the modulus is broken.
    pub fn check_concavity_scaling(&self, lambda: f64, s: f64) -> Result<bool> {
        if !(lambda >= 1.0) {
            return domain(format!("scaling factor {lambda} must be ≥ 1"));
        }
        if !(s >= 0.0) {
            return domain(format!("modulus argument {s} must be ≥ 0"));
        }
        let lhs = self.at(lambda * s);
        let rhs = lambda * self.at(s);
        Ok(lhs <= rhs * (1.0 + 1e-12))
    }

    /// Smallest `s` (to bisection precision, from above) with `ω(s) ≥ y`,
    /// found on a doubling grid followed by bisection.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        if y <= 0.0 {
            return Some(0.0);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut n = 0;
        while self.at(hi) < y {
            lo = hi;
            hi *= 2.0;
            n += 1;
            if n > MAX_DOUBLINGS || !hi.is_finite() {
                return None;
            }
        }
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.at(mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// `M > 0` with `ω(M) ≥ k/λ`; then `ω(M + s) ≥ k + (1 − λ)ω(s)` for all
    /// `s ≥ 0`.
    pub fn find_m(&self, k: f64, lambda: f64) -> Result<f64> {
        positive("k", k)?;
        if !(lambda > 0.0 && lambda < 1.0) {
            return domain(format!("λ = {lambda} must lie in (0, 1)"));
        }
        let target = k / lambda;
        if let Some(cap) = self.sup() {
            if cap < target {
                return Err(Error::Infeasible(format!("bounded modulus with Ω = {cap} never reaches k/λ = {target}")));
            }
        }
        self.inverse(target)
            .map(|m| m.max(f64::MIN_POSITIVE))
            .ok_or_else(|| Error::Infeasible(format!("no M with ω(M) ≥ {target} (supremum not attained)")))
    }

    /// `s' > 0` with `ω(s') ≥ (1 − guard·t)Ω` for a bounded ω.
    pub fn find_sprime(&self, t: f64, guard: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return domain(format!("t = {t} must lie in (0, 1)"));
        }
        if !(guard > 0.0 && guard <= 1.0) {
            return domain(format!("guard = {guard} must lie in (0, 1]"));
        }
        let cap = self.sup().ok_or_else(|| Error::Misuse("find_sprime needs a bounded modulus".into()))?;
        let target = (1.0 - guard * t) * cap;
        self.inverse(target).ok_or_else(|| Error::Infeasible(format!("no s' with ω(s') ≥ {target}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} = {v} must be finite and > 0"))
    }
}

/// Sorted nodes and the slopes between consecutive ones.
type Nodes = (Vec<(f64, f64)>, Vec<f64>);

fn normalise_nodes(raw: &[(f64, f64)]) -> Result<Nodes> {
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(raw.len() + 1);
    if raw.first().is_none_or(|&(s, _)| s != 0.0) {
        nodes.push((0.0, 0.0));
    }
    nodes.extend_from_slice(raw);
    if nodes[0].1 != 0.0 {
        return domain("piecewise modulus must satisfy ω(0) = 0");
    }
    if nodes.len() < 2 {
        return domain("piecewise modulus needs at least one node besides the origin");
    }
    if nodes.iter().any(|&(s, w)| !s.is_finite() || !w.is_finite()) {
        return domain("piecewise nodes must be finite");
    }
    if nodes.windows(2).any(|w| w[1].0 <= w[0].0) {
        return domain("piecewise nodes must have strictly increasing abscissae");
    }
    let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
    let mut merged = vec![nodes[0]];
    for &node in &nodes[1..] {
        if merged.len() >= 2 {
            let n = merged.len();
            let prev = slope(merged[n - 2], merged[n - 1]);
            let cur = slope(merged[n - 1], node);
            if (prev - cur).abs() <= 1e-12 * prev.abs().max(cur.abs()) {
                merged[n - 1] = node;
                continue;
            }
        }
        merged.push(node);
    }
    let slopes = merged.windows(2).map(|w| slope(w[0], w[1])).collect();
    Ok((merged, slopes))
}

/// Modulus description in run configurations: a variant name plus parameters,
/// with piecewise nodes given as `s,ω(s)` pairs separated by `;` or newlines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModulusSpec {
    pub variant: String,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub cap: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub nodes: Option<String>,
    #[serde(default)]
    pub tail_slope: Option<f64>,
}

impl ModulusSpec {
    pub fn build(&self) -> Result<Modulus> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Domain(format!("modulus `{}` needs parameter `{name}`", self.variant)))
        };
        match self.variant.as_str() {
            "linear" => Modulus::linear(self.c.unwrap_or(1.0)),
            "power" => Modulus::power(self.c.unwrap_or(1.0), need(self.alpha, "alpha")?),
            "truncated_linear" => Modulus::truncated_linear(self.c.unwrap_or(1.0), need(self.cap, "cap")?),
            "bounded_exp" => Modulus::bounded_exp(need(self.cap, "cap")?, self.tau.unwrap_or(1.0)),
            "piecewise_linear" | "piecewise_linear_concave" => {
                let text =
                    self.nodes.as_deref().ok_or_else(|| Error::Domain("piecewise modulus needs `nodes`".into()))?;
                Modulus::piecewise(&parse_nodes(text)?, self.tail_slope.unwrap_or(0.0))
            }
            other => domain(format!("unknown modulus variant `{other}`")),
        }
    }
}

/// Parses `s,ω(s)` pairs separated by `;` or newlines.
pub fn parse_nodes(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split([';', '\n'])
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let mut it = l.split(',').map(|x| x.trim().parse::<f64>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(s)), Some(Ok(w)), None) => Ok((s, w)),
                _ => domain(format!("cannot parse modulus node `{l}`")),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(Modulus::linear(1.0).unwrap().eval(3.0).unwrap(), 3.0);
        assert_eq!(Modulus::truncated_linear(1.0, 2.0).unwrap().eval(5.0).unwrap(), 2.0);
        assert_eq!(Modulus::power(1.0, 0.5).unwrap().eval(4.0).unwrap(), 2.0);
        assert!(Modulus::linear(1.0).unwrap().eval(-1.0).is_err());
        for m in all_variants() {
            assert_eq!(m.at(0.0), 0.0, "{m:?}");
        }
    }

    fn all_variants() -> Vec<Modulus> {
        vec![
            Modulus::linear(2.0).unwrap(),
            Modulus::power(1.5, 0.3).unwrap(),
            Modulus::truncated_linear(1.0, 2.0).unwrap(),
            Modulus::bounded_exp(1.0, 1.0).unwrap(),
            Modulus::piecewise(&[(1.0, 2.0), (3.0, 3.0)], 0.1).unwrap(),
            Modulus::piecewise(&[(1.0, 1.0), (2.0, 1.5)], 0.0).unwrap(),
        ]
    }

    #[test]
    fn concavity_scaling_examples() {
        let p = Modulus::power(1.0, 0.5).unwrap();
        assert!(p.check_concavity_scaling(4.0, 1.0).unwrap());
        for m in all_variants() {
            assert!(m.check_concavity_scaling(1.0, 2.7).unwrap());
        }
        let l = Modulus::linear(3.0).unwrap();
        assert!(l.check_concavity_scaling(7.3, 0.9).unwrap());
        assert!(p.check_concavity_scaling(0.5, 1.0).is_err());
        let bad = Modulus::piecewise_unchecked(vec![(0.0, 0.0), (1.0, 0.1), (2.0, 2.0)], 0.0);
        assert!(!bad.check_concavity_scaling(2.0, 1.0).unwrap());
    }

    #[test]
    fn scaling_multiplies_values() {
        for m in all_variants() {
            let half = m.scaled(0.5).unwrap();
            for s in [0.0, 0.3, 1.0, 2.5, 40.0] {
                assert!((half.at(s) - 0.5 * m.at(s)).abs() < 1e-12);
            }
            assert_eq!(half.is_bounded(), m.is_bounded());
        }
        assert!(Modulus::linear(1.0).unwrap().scaled(0.0).is_err());
    }

    #[test]
    fn find_m_examples() {
        let l = Modulus::linear(1.0).unwrap();
        let m = l.find_m(1.0, 0.25).unwrap();
        assert_eq!(m, 4.0);
        let grid = (0..=1000).map(|i| i as f64 * 0.1);
        for s in grid {
            assert!(l.at(m + s) >= 1.0 + 0.75 * l.at(s));
        }
        let p = Modulus::power(1.0, 0.5).unwrap();
        let m = p.find_m(1.0, 0.5).unwrap();
        assert!((m - 4.0).abs() < 1e-12);
        assert!(p.at(m) >= 2.0);
        for i in 0..=1000 {
            let s = i as f64 * 0.1;
            assert!(p.at(m + s) >= 1.0 + 0.5 * p.at(s) - 1e-12);
        }
        let t = Modulus::truncated_linear(1.0, 2.0).unwrap();
        assert!(matches!(t.find_m(1.0, 0.25), Err(Error::Infeasible(_))));
    }

    #[test]
    fn find_sprime_examples() {
        let t = Modulus::truncated_linear(1.0, 2.0).unwrap();
        let s = t.find_sprime(0.1, 0.5).unwrap();
        assert!(s <= 2.0 && t.at(s) >= 0.95 * 2.0);
        let e = Modulus::bounded_exp(1.0, 1.0).unwrap();
        let s = e.find_sprime(0.2, 0.5).unwrap();
        assert!((s - 10f64.ln()).abs() < 1e-9, "{s}");
        let s = e.find_sprime(0.5, 1.0).unwrap();
        assert!((s - 2f64.ln()).abs() < 1e-9);
        assert!(matches!(Modulus::linear(1.0).unwrap().find_sprime(0.1, 0.5), Err(Error::Misuse(_))));
    }

    #[test]
    fn piecewise_validation() {
        let m = Modulus::piecewise(&[(1.0, 1.0), (2.0, 2.0), (3.0, 2.5)], 0.0).unwrap();
        match &m {
            Modulus::PiecewiseLinear { nodes, .. } => assert_eq!(nodes, &vec![(0.0, 0.0), (2.0, 2.0), (3.0, 2.5)]),
            _ => unreachable!(),
        }
        assert_eq!(m.at(1.0), 1.0);
        assert_eq!(m.at(10.0), 2.5);
        assert_eq!(m.sup(), Some(2.5));
        assert!(Modulus::piecewise(&[(1.0, 0.1), (2.0, 2.0)], 0.0).is_err());
        assert!(Modulus::piecewise(&[(1.0, 1.0), (2.0, 0.5)], 0.0).is_err());
        assert!(Modulus::piecewise(&[(1.0, 1.0)], 2.0).is_err());
        let n = parse_nodes("0,0; 1,1\n2,1.5").unwrap();
        assert_eq!(n, vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.5)]);
        assert!(parse_nodes("1;2").is_err());
    }

    #[test]
    fn spec_builds() {
        let spec =
            ModulusSpec { variant: "truncated_linear".into(), c: Some(1.0), cap: Some(2.0), ..Default::default() };
        assert_eq!(spec.build().unwrap(), Modulus::truncated_linear(1.0, 2.0).unwrap());
        let spec = ModulusSpec { variant: "power".into(), ..Default::default() };
        assert!(spec.build().is_err());
    }
}
