use crate::error::{domain, Error, Result};
use crate::funcspace::DenseSequence;
use crate::geometry::{Point, Space};

/// Largest number of explicit terms; beyond it `2^{−N}` loses meaning in f64.
const MAX_TERMS: u32 = 60;

/// `Σ_{n ≤ N, ρ(θ_n, x₀) ≥ p} 2^{−n} + 2^{−N}` for `N = theta.len()`: an upper
/// bound on `Σ_{ρ(θ_n, x₀) ≥ p} 2^{−n}`.
pub fn pointwise_tail(space: &Space, theta: &[Point], x0: &Point, p: f64) -> f64 {
    let mut w = 1.0;
    let mut sum = 0.0;
    for t in theta {
        w *= 0.5;
        if space.dist(t, x0) >= p {
            sum += w;
        }
    }
    sum + w
}

/// Smallest integer `p ∈ [1, p_max]` whose certified tail bound is below `ε/2`.
pub fn choose_p_pointwise(space: &Space, theta: &DenseSequence, x0: &Point, eps: f64, p_max: u32) -> Result<u32> {
    if !(eps > 0.0) {
        return domain(format!("ε = {eps} must be > 0"));
    }
    let n = ((4.0 / eps).log2().ceil().max(0.0) as u32 + 4).min(MAX_TERMS);
    let pts = theta.points(space, n as usize)?;
    (1..=p_max)
        .find(|&p| pointwise_tail(space, &pts, x0, p as f64) < eps / 2.0)
        .ok_or_else(|| Error::Infeasible(format!("no p ≤ {p_max} certifies a tail below ε/2 = {}", eps / 2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_with_quarter() {
        let sp = Space::euclidean(1);
        let x0 = sp.base.clone();
        let p = choose_p_pointwise(&sp, &DenseSequence::Integers, &x0, 0.25, 100).unwrap();
        // direct summation over the first 10⁴ terms
        let pts = DenseSequence::Integers.points(&sp, 10_000).unwrap();
        let direct = |p: f64| {
            let mut w = 1.0;
            let mut s = 0.0;
            for t in &pts {
                w *= 0.5;
                if sp.dist(t, &x0) >= p {
                    s += w;
                }
            }
            s
        };
        assert!(direct(p as f64) < 0.125);
        assert!(direct(p as f64 - 1.0) >= 0.125);
        assert_eq!(p, 3);
    }

    #[test]
    fn generous_and_impossible_eps() {
        let sp = Space::euclidean(1);
        assert_eq!(choose_p_pointwise(&sp, &DenseSequence::Dyadic, &sp.base, 2.0, 5).unwrap(), 1);
        assert!(matches!(
            choose_p_pointwise(&sp, &DenseSequence::Dyadic, &sp.base, 1e-30, 5),
            Err(Error::Infeasible(_))
        ));
    }
}
