//! Poincaré upper half-plane `{(x, y) : y > 0}` with `ds² = (dx² + dy²) / y²`.
//!
//! Geodesics are computed after moving the start point to `i` by the
//! isometry `z ↦ (z − x₁) / y₁`. A geodesic leaving `i` is the image of the
//! imaginary axis under the elliptic rotation about `i` by angle `φ`; the
//! point at arclength `s` then has the closed form used in [`walk`], which
//! stays well conditioned for nearly vertical geodesics and long distances.

/// Hyperbolic distance, written with `asinh` to avoid the cancellation in
/// `arccosh(1 + ·)` for nearby points.
#[inline]
pub fn dist(x1: f64, y1: f64, x2: f64, y2: f64) -> f64 {
    let dx = x2 - x1;
    let dy = y2 - y1;
    let chord = (dx * dx + dy * dy).sqrt();
    if chord == 0.0 {
        return 0.0;
    }
    2.0 * (chord / (2.0 * (y1 * y2).sqrt())).asinh()
}

/// Rotation angle about `i` taking the upward vertical geodesic through the
/// normalised point `(u, v)`.
#[inline]
pub fn heading(x1: f64, y1: f64, x2: f64, y2: f64) -> f64 {
    let u = (x2 - x1) / y1;
    let v = y2 / y1;
    (-2.0 * u).atan2(u * u + v * v - 1.0)
}

/// Point at arclength `s ≥ 0` from `(x1, y1)` along the geodesic with the
/// given heading.
#[inline]
pub fn walk(x1: f64, y1: f64, heading: f64, s: f64) -> (f64, f64) {
    if s == 0.0 {
        return (x1, y1);
    }
    let (sn, cs) = (0.5 * heading).sin_cos();
    let a = (-s).exp();
    let den = a * a * cs * cs + sn * sn;
    let x = (a * a - 1.0) * sn * cs / den;
    let y = a / den;
    (x1 + y1 * x, y1 * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Length of the geodesic arc computed by integrating `|dz| / y` over
    /// the points produced by `walk`.
    fn integrated_length(x1: f64, y1: f64, h: f64, s: f64) -> f64 {
        let n = 20_000;
        let mut len = 0.0;
        let mut prev = walk(x1, y1, h, 0.0);
        for k in 1..=n {
            let cur = walk(x1, y1, h, s * k as f64 / n as f64);
            let (mx, my) = (cur.0 - prev.0, cur.1 - prev.1);
            let ymid = 0.5 * (cur.1 + prev.1);
            len += (mx * mx + my * my).sqrt() / ymid;
            prev = cur;
        }
        len
    }

    #[test]
    fn vertical_unit_distance() {
        assert!((dist(0.0, 1.0, 0.0, std::f64::consts::E) - 1.0).abs() < 1e-15);
        let (x, y) = walk(0.0, 1.0, 0.0, 1.0);
        assert_eq!(x, 0.0);
        assert!((y - std::f64::consts::E).abs() < 1e-14);
    }

    #[test]
    fn distance_matches_arccosh_and_quadrature() {
        let (x1, y1, x2, y2) = (-0.3, 0.7, 1.9, 2.4);
        let d = dist(x1, y1, x2, y2);
        let oracle = (1.0 + ((x2 - x1).powi(2) + (y2 - y1).powi(2)) / (2.0 * y1 * y2)).acosh();
        assert!((d - oracle).abs() < 1e-12);
        let h = heading(x1, y1, x2, y2);
        assert!((integrated_length(x1, y1, h, d) - d).abs() < 1e-6);
        let end = walk(x1, y1, h, d);
        assert!((end.0 - x2).abs() < 1e-12 && (end.1 - y2).abs() < 1e-12);
    }

    #[test]
    fn downward_heading_reaches_lower_point() {
        let h = heading(2.0, 3.0, 2.0, 0.5);
        let d = dist(2.0, 3.0, 2.0, 0.5);
        let (x, y) = walk(2.0, 3.0, h, d);
        assert!((x - 2.0).abs() < 1e-12 && (y - 0.5).abs() < 1e-12);
    }
}
