use proptest::prelude::*;

use hypermod::constructions::{choose_p, step2_eta, step2_eta_log2};
use hypermod::funcspace::{eval_map, metric_dtheta, DenseSequence};
use hypermod::par::rng;
use hypermod::{MapExpr, Modulus, Point, Space};

fn space() -> impl Strategy<Value = Space> {
    prop_oneof![(1usize..4).prop_map(Space::euclidean), Just(Space::half_plane()), (2u32..6).prop_map(Space::star_tree),]
}

/// A space with three points drawn from a ball around its base point.
fn triple() -> impl Strategy<Value = (Space, Point, Point, Point)> {
    (space(), any::<u64>(), 0.1f64..20.0).prop_map(|(sp, seed, r)| {
        let mut g = rng(seed);
        let (a, b, c) = (
            sp.sample_ball(&sp.base, r, &mut g),
            sp.sample_ball(&sp.base, r, &mut g),
            sp.sample_ball(&sp.base, r, &mut g),
        );
        (sp, a, b, c)
    })
}

fn modulus() -> impl Strategy<Value = Modulus> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|c| Modulus::linear(c).unwrap()),
        (0.1f64..5.0, 0.05f64..1.0).prop_map(|(c, a)| Modulus::power(c, a).unwrap()),
        (0.1f64..5.0, 0.1f64..5.0).prop_map(|(c, cap)| Modulus::truncated_linear(c, cap).unwrap()),
        (0.1f64..5.0, 0.1f64..5.0).prop_map(|(cap, tau)| Modulus::bounded_exp(cap, tau).unwrap()),
    ]
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn distance_is_a_metric((sp, a, b, c) in triple()) {
        let (ab, ba, bc, ac) = (sp.dist(&a, &b), sp.dist(&b, &a), sp.dist(&b, &c), sp.dist(&a, &c));
        prop_assert!(ab >= 0.0 && sp.dist(&a, &a) == 0.0);
        prop_assert!(close(ab, ba, ab));
        prop_assert!(ac <= ab + bc + 1e-9 * (ab + bc).max(1.0));
    }

    #[test]
    fn combine_walks_the_segment((sp, a, b, _) in triple(), t in 0.0f64..=1.0) {
        let p = sp.combine(&a, &b, t);
        let d = sp.dist(&a, &b);
        prop_assert!(close(sp.dist(&a, &p), t * d, d));
        prop_assert!(close(sp.dist(&p, &b), (1.0 - t) * d, d));
    }

    #[test]
    fn combine_is_convex_in_the_second_endpoint((sp, x, y, z) in triple(), t in 0.0f64..=1.0) {
        let lhs = sp.dist(&sp.combine(&x, &y, t), &sp.combine(&x, &z, t));
        let rhs = t * sp.dist(&y, &z);
        prop_assert!(lhs <= rhs + 1e-9 * rhs.max(1.0));
    }

    #[test]
    fn moduli_are_monotone_and_scale_concavely(w in modulus(), s in 0.0f64..50.0, lambda in 1.0f64..10.0) {
        prop_assert!(w.at(0.0) == 0.0);
        prop_assert!(w.at(s) <= w.at(s + 0.5));
        prop_assert!(w.check_concavity_scaling(lambda, s).unwrap());
    }

    #[test]
    fn find_m_clears_its_target(w in modulus(), k in 0.01f64..1.0, lambda in 0.05f64..0.95) {
        match w.find_m(k, lambda) {
            Ok(m) => prop_assert!(w.at(m) >= k / lambda * (1.0 - 1e-12)),
            Err(_) => prop_assert!(w.sup().is_some_and(|cap| cap <= k / lambda)),
        }
    }

    #[test]
    fn choose_p_is_the_smallest_tail_below_half_eps(eps in 1e-6f64..4.0) {
        let p = choose_p(eps);
        prop_assert!(0.5f64.powi(p as i32) < eps / 2.0);
        prop_assert!(p == 1 || 0.5f64.powi(p as i32 - 1) >= eps / 2.0);
    }

    #[test]
    fn eta_is_a_small_positive_radius(w in modulus(), s in 0.01f64..10.0, mu in 0.01f64..0.99, q in 1u32..60) {
        let eta = step2_eta(&w, s, mu, q);
        prop_assert!(eta > 0.0 && eta <= 0.5f64.powi(q as i32));
        prop_assert!(step2_eta(&w, s, mu, q + 1) < eta);
        prop_assert!(close(step2_eta_log2(&w, s, mu, q), eta.log2(), 1.0));
    }

    #[test]
    fn map_json_round_trips((sp, a, _, _) in triple(), t in 0.0f64..=1.0, r in 0.1f64..5.0) {
        let m = MapExpr::blend(MapExpr::Clamp { center: sp.base.clone(), radius: r }, MapExpr::constant(a.clone()), t);
        let back: MapExpr = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        prop_assert_eq!(back.content_hash(), m.content_hash());
        prop_assert_eq!(eval_map(&sp, &back, &a).unwrap(), eval_map(&sp, &m, &a).unwrap());
    }

    #[test]
    fn blends_stay_within_the_displacement((sp, x, c, _) in triple(), t in 0.0f64..=1.0) {
        let m = MapExpr::blend(MapExpr::Identity, MapExpr::constant(c.clone()), t);
        let d = sp.dist(&eval_map(&sp, &m, &x).unwrap(), &x);
        let full = sp.dist(&c, &x);
        prop_assert!(d <= t * full + 1e-9 * full.max(1.0));
    }

    #[test]
    fn dtheta_is_symmetric_and_bounded((sp, a, b, _) in triple(), t in 0.0f64..=1.0) {
        let theta = DenseSequence::Dyadic.points(&sp, 20).unwrap();
        let f = MapExpr::constant(a);
        let g = MapExpr::blend(MapExpr::Identity, MapExpr::constant(b), t);
        let (fg, gf) = (metric_dtheta(&sp, &theta, &f, &g).unwrap(), metric_dtheta(&sp, &theta, &g, &f).unwrap());
        prop_assert_eq!(fg, gf);
        prop_assert!(0.0 <= fg.lo && fg.lo <= fg.hi && fg.hi <= 1.0 + 1e-12);
    }
}
