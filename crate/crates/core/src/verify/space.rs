use rand::Rng as _;
use serde_json::json;

use super::{rel, sample_check, timed, VerificationReport};
use crate::funcspace::RetractionParams;
use crate::geometry::{Geodesic, Point, Ray, Space};
use crate::par::{derive, Rng};

/// A model whose convex combinations use the parameter `t²` instead of `t`,
/// so geodesics are traversed at the wrong speed.
pub struct TSquaredCombine<'a>(pub &'a Space);

impl Geodesic for TSquaredCombine<'_> {
    fn dist(&self, p: &Point, q: &Point) -> f64 {
        self.0.dist(p, q)
    }
    fn combine(&self, p: &Point, q: &Point, t: f64) -> Point {
        self.0.combine(p, q, t * t)
    }
    fn ray_point(&self, ray: &Ray, d: f64) -> Point {
        self.0.ray_point(ray, d)
    }
    fn random_ray(&self, origin: &Point, rng: &mut Rng) -> Ray {
        self.0.random_ray(origin, rng)
    }
    fn sample_ball(&self, center: &Point, radius: f64, rng: &mut Rng) -> Point {
        self.0.sample_ball(center, radius, rng)
    }
    fn base(&self) -> &Point {
        self.0.base()
    }
    fn label(&self) -> String {
        format!("{} (t² combine)", self.0.label())
    }
}

/// Random point at a log-uniform scale in `[0.05, 10]` around the base.
fn point<G: Geodesic + ?Sized>(g: &G, rng: &mut Rng) -> Point {
    let r = (0.05f64.ln() + (10.0f64 / 0.05).ln() * rng.gen::<f64>()).exp();
    g.sample_ball(g.base(), r, rng)
}

fn triple<G: Geodesic + ?Sized>(g: &G, rng: &mut Rng) -> (Point, Point, Point) {
    let x = point(g, rng);
    let near = rng.gen_range(0..3);
    let y = if near == 0 { g.sample_ball(&x, 0.5, rng) } else { point(g, rng) };
    let z = if near == 1 { g.sample_ball(&y, 0.5, rng) } else { point(g, rng) };
    (x, y, z)
}

/// Metric axioms, the segment identities, coherence of the geodesic system,
/// the hyperbolicity inequality, convexity of balls for triangles and ray
/// isometry, each on `trials` random configurations. Identities are compared
/// relative to the largest distance involved (at least 1).
pub fn verify_space<G: Geodesic + ?Sized>(g: &G, trials: usize, tol: f64, seed: u64) -> VerificationReport {
    let suite = format!("space:{}", g.label());
    timed(&suite, seed, |rep| {
        rep.budget("trials", trials);
        let s = |k: u64| derive(seed, k);
        rep.push(sample_check("metric.zero", "ρ(x, x) = 0", trials, tol, s(1), |rng| {
            let x = point(g, rng);
            (-g.dist(&x, &x), json!({ "x": x }))
        }));
        rep.push(sample_check("metric.symmetry", "ρ(x, y) = ρ(y, x)", trials, tol, s(2), |rng| {
            let (x, y, _) = triple(g, rng);
            let (a, b) = (g.dist(&x, &y), g.dist(&y, &x));
            (rel(0.0, (a - b).abs(), a), json!({ "x": x, "y": y, "xy": a, "yx": b }))
        }));
        rep.push(sample_check("metric.triangle", "ρ(x, z) ≤ ρ(x, y) + ρ(y, z)", trials, tol, s(3), |rng| {
            let (x, y, z) = triple(g, rng);
            let (xz, xy, yz) = (g.dist(&x, &z), g.dist(&x, &y), g.dist(&y, &z));
            (rel(xy + yz, xz, xy + yz), json!({ "x": x, "y": y, "z": z }))
        }));
        rep.push(sample_check(
            "segment.isometry",
            "ρ((1−λ₁)x⊕λ₁y, (1−λ₂)x⊕λ₂y) = |λ₁ − λ₂|ρ(x, y)",
            trials,
            tol,
            s(4),
            |rng| {
                let (x, y, _) = triple(g, rng);
                let (l1, l2): (f64, f64) = (rng.gen(), rng.gen());
                let d = g.dist(&x, &y);
                let got = g.dist(&g.combine(&x, &y, l1), &g.combine(&x, &y, l2));
                let want = (l1 - l2).abs() * d;
                (
                    rel(0.0, (got - want).abs(), d),
                    json!({ "x": x, "y": y, "l1": l1, "l2": l2, "got": got, "want": want }),
                )
            },
        ));
        rep.push(sample_check(
            "segment.additivity",
            "ρ(x, y) = ρ(x, z) + ρ(z, y) for z ∈ [x, y]",
            trials,
            tol,
            s(5),
            |rng| {
                let (x, y, _) = triple(g, rng);
                let l: f64 = rng.gen();
                let z = g.combine(&x, &y, l);
                let d = g.dist(&x, &y);
                let err = (g.dist(&x, &z) + g.dist(&z, &y) - d).abs();
                (rel(0.0, err, d), json!({ "x": x, "y": y, "lambda": l }))
            },
        ));
        rep.push(sample_check("coherence.reversal", "(1−t)x⊕ty = ty⊕(1−t)x", trials, tol, s(6), |rng| {
            let (x, y, _) = triple(g, rng);
            let t: f64 = rng.gen();
            let err = g.dist(&g.combine(&x, &y, t), &g.combine(&y, &x, 1.0 - t));
            (rel(0.0, err, g.dist(&x, &y)), json!({ "x": x, "y": y, "t": t }))
        }));
        rep.push(sample_check(
            "coherence.restriction",
            "sub-segments of a geodesic are the chosen geodesics",
            trials,
            tol,
            s(7),
            |rng| {
                let (x, y, _) = triple(g, rng);
                let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                let (t1, t2) = (a.min(b), a.max(b));
                let u: f64 = rng.gen();
                let z1 = g.combine(&x, &y, t1);
                let z2 = g.combine(&x, &y, t2);
                let err = g.dist(&g.combine(&z1, &z2, u), &g.combine(&x, &y, t1 + u * (t2 - t1)));
                (rel(0.0, err, g.dist(&x, &y)), json!({ "x": x, "y": y, "t1": t1, "t2": t2, "u": u }))
            },
        ));
        rep.push(sample_check(
            "hyperbolicity",
            "ρ((1−t)x⊕ty, (1−t)x⊕tz) ≤ tρ(y, z)",
            trials,
            tol,
            s(8),
            |rng| {
                let (x, y, z) = triple(g, rng);
                let t: f64 = rng.gen();
                let lhs = g.dist(&g.combine(&x, &y, t), &g.combine(&x, &z, t));
                let rhs = t * g.dist(&y, &z);
                let scale = g.dist(&x, &y).max(g.dist(&x, &z));
                (rel(rhs, lhs, scale), json!({ "x": x, "y": y, "z": z, "t": t, "lhs": lhs, "rhs": rhs }))
            },
        ));
        rep.push(sample_check(
            "triangle.convexity",
            "ρ(x, y) ≤ C for x ∈ [a, b], y ∈ [b, c] when all sides are ≤ C",
            trials,
            tol,
            s(9),
            |rng| {
                let (a, b, c) = triple(g, rng);
                let cap = g.dist(&a, &b).max(g.dist(&b, &c)).max(g.dist(&c, &a));
                let (l, k): (f64, f64) = (rng.gen(), rng.gen());
                let lhs = g.dist(&g.combine(&a, &b, l), &g.combine(&b, &c, k));
                (rel(cap, lhs, cap), json!({ "a": a, "b": b, "c": c, "l": l, "k": k, "lhs": lhs, "cap": cap }))
            },
        ));
        rep.push(sample_check(
            "ray.isometry",
            "ρ(γ(d₁), γ(d₂)) = |d₁ − d₂| along rays",
            trials,
            tol,
            s(10),
            |rng| {
                let x = point(g, rng);
                let ray = g.random_ray(&x, rng);
                let (d1, d2) = (8.0 * rng.gen::<f64>(), 8.0 * rng.gen::<f64>());
                let got = g.dist(&g.ray_point(&ray, d1), &g.ray_point(&ray, d2));
                let start = g.dist(&g.ray_point(&ray, 0.0), &x);
                let err = (got - (d1 - d2).abs()).abs() + start;
                (rel(0.0, err, d1.max(d2)), json!({ "ray": ray, "d1": d1, "d2": d2, "got": got }))
            },
        ));
    })
}

/// The three properties of the radial retraction `Φ` about `center`:
/// `Φ ≡ center` on `B(center, δ)`, `Φ = id` off `B(center, r)`, and
/// `Lip Φ ≤ r/(r − δ)` on pairs in and across the annulus.
pub fn verify_retraction(
    space: &Space,
    phi: &RetractionParams,
    trials: usize,
    tol: f64,
    seed: u64,
) -> VerificationReport {
    let suite = format!("retraction:{}", space.name());
    let (z0, delta, r) = (&phi.center, phi.delta, phi.radius);
    let lip = phi.lipschitz();
    timed(&suite, seed, |rep| {
        rep.budget("trials", trials);
        rep.push(sample_check(
            "retraction.collapse",
            "Φ(x) = z₀ when ρ(x, z₀) ≤ δ",
            trials,
            0.0,
            derive(seed, 1),
            |rng| {
                let x = space.sample_ball(z0, delta, rng);
                let img = phi.apply(space, &x);
                (
                    if &img == z0 { 0.0 } else { -space.dist(&img, z0).max(f64::MIN_POSITIVE) },
                    json!({ "x": x, "image": img }),
                )
            },
        ));
        rep.push(sample_check(
            "retraction.identity",
            "Φ(x) = x when ρ(x, z₀) ≥ r",
            trials,
            0.0,
            derive(seed, 2),
            |rng| {
                let x = space.sample_sphere(z0, r * (1.0 + 2.0 * rng.gen::<f64>()), rng);
                let img = phi.apply(space, &x);
                (
                    if img == x { 0.0 } else { -space.dist(&img, &x).max(f64::MIN_POSITIVE) },
                    json!({ "x": x, "image": img }),
                )
            },
        ));
        rep.push(sample_check(
            "retraction.lipschitz",
            "ρ(Φ(x), Φ(y)) ≤ r/(r − δ)·ρ(x, y)",
            trials,
            tol,
            derive(seed, 3),
            |rng| {
                let x = space.sample_sphere(z0, 1.2 * r * rng.gen::<f64>(), rng);
                let y = match rng.gen_range(0..3) {
                    0 => space.sample_sphere(z0, 1.2 * r * rng.gen::<f64>(), rng),
                    1 => {
                        let d = space.dist(z0, &x);
                        let e = d + (rng.gen::<f64>() - 0.5) * 0.2 * r;
                        if d > 0.0 {
                            space.along(z0, &x, e.max(0.0) / d)
                        } else {
                            space.sample_sphere(z0, e.abs(), rng)
                        }
                    }
                    _ => space.sample_sphere(&x, (1e-4f64.ln() + (1e4f64).ln() * rng.gen::<f64>()).exp(), rng),
                };
                let d = space.dist(&x, &y);
                if d < 1e-9 {
                    return (f64::INFINITY, json!(null));
                }
                let ratio = space.dist(&phi.apply(space, &x), &phi.apply(space, &y)) / d;
                (lip - ratio, json!({ "x": x, "y": y, "ratio": ratio, "bound": lip }))
            },
        ));
    })
}
