use cp1_brownian::fuchsian::Word;
use cp1_brownian::hbm::{disc_translate, hyperbolic_distance};
use cp1_brownian::moebius::{cartan, chordal_distance, contraction_data, CP1Point, MoebiusMap, C64};
use cp1_brownian::walk::ScaledMap;
use proptest::prelude::*;

fn map_strategy() -> impl Strategy<Value = MoebiusMap> {
    prop::array::uniform8(-10.0f64..10.0).prop_filter_map("singular", |e| {
        let z = |i: usize| C64::new(e[2 * i], e[2 * i + 1]);
        let det = z(0) * z(3) - z(1) * z(2);
        if det.norm() < 1e-3 {
            return None;
        }
        MoebiusMap::new(z(0), z(1), z(2), z(3)).ok()
    })
}

fn point_strategy() -> impl Strategy<Value = CP1Point> {
    (-1.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(h, phi)| {
        let s = (1.0 - h * h).sqrt();
        CP1Point::from_sphere([s * phi.cos(), s * phi.sin(), h])
    })
}

fn disc_point() -> impl Strategy<Value = C64> {
    (0.0f64..0.95, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

/// Conditioning-aware tolerance for products of maps with entries up to 10.
fn tol(g: &MoebiusMap) -> f64 {
    1e-10 * g.operator_norm().powi(4).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, ..ProptestConfig::default() })]

    #[test]
    fn inverse_and_identity(g in map_strategy()) {
        prop_assert!(g.compose(&g.inverse()).is_identity(tol(&g)));
        prop_assert!(g.inverse().compose(&g).is_identity(tol(&g)));
        prop_assert!(g.compose(&MoebiusMap::identity()).approx_eq(&g, 1e-12 * g.operator_norm()));
    }

    #[test]
    fn composition_is_associative(f in map_strategy(), g in map_strategy(), h in map_strategy()) {
        let a = f.compose(&g).compose(&h);
        let b = f.compose(&g.compose(&h));
        let scale = f.operator_norm() * g.operator_norm() * h.operator_norm();
        prop_assert!(a.approx_eq(&b, 1e-11 * scale.max(1.0)));
    }

    #[test]
    fn action_is_a_homomorphism(f in map_strategy(), g in map_strategy(), p in point_strategy()) {
        let a = f.compose(&g).apply(&p);
        let b = f.apply(&g.apply(&p));
        let scale = (f.operator_norm() * g.operator_norm()).powi(2);
        prop_assert!(chordal_distance(&a, &b) < 1e-10 * scale.max(1.0));
    }

    #[test]
    fn unitary_maps_are_isometries(p in point_strategy(), q in point_strategy(), seed in any::<u64>()) {
        let mut r = cp1_brownian::rng::rng(seed);
        let u = MoebiusMap::random_unitary(&mut r);
        let d0 = chordal_distance(&p, &q);
        let d1 = chordal_distance(&u.apply(&p), &u.apply(&q));
        prop_assert!((d0 - d1).abs() < 1e-12);
    }

    #[test]
    fn chordal_range_and_symmetry(p in point_strategy(), q in point_strategy()) {
        let d = chordal_distance(&p, &q);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - chordal_distance(&q, &p)).abs() < 1e-15);
        prop_assert!(chordal_distance(&p, &p) < 1e-15);
        prop_assert!((chordal_distance(&p, &p.antipode()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cartan_reconstructs(g in map_strategy()) {
        let t = cartan(&g);
        prop_assert!(t.k.is_unitary(1e-10) && t.kprime.is_unitary(1e-10));
        prop_assert!(t.alpha.norm() >= 1.0 - 1e-12);
        prop_assert!(t.reconstruct().approx_eq(&g, 1e-10 * g.operator_norm().max(1.0)));
    }

    #[test]
    fn norm_is_sup_of_inverse_derivative(g in map_strategy(), p in point_strategy()) {
        let norm2 = g.operator_norm().powi(2);
        let ginv = g.inverse();
        // the supremum is attained at the top left singular direction of g
        let (sigma, v) = g.mat().top_singular();
        let (w1, w2) = g.mat().apply_vec(v[0], v[1]);
        let top = CP1Point::new(w1 / sigma, w2 / sigma).unwrap();
        let at_top = ginv.spherical_derivative(&top);
        prop_assert!((at_top - norm2).abs() <= 1e-6 * norm2);
        prop_assert!(ginv.spherical_derivative(&p) <= norm2 * (1.0 + 1e-9));
    }

    #[test]
    fn contraction_centers_follow_cartan(g in map_strategy()) {
        let d = contraction_data(&g);
        let t = cartan(&g);
        prop_assert!(chordal_distance(&t.kprime.apply(&d.y), &CP1Point::e2()) < 1e-9);
        prop_assert!(chordal_distance(&t.k.inverse().apply(&d.z), &CP1Point::e1()) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2_000, ..ProptestConfig::default() })]

    #[test]
    fn disc_translation_is_an_isometry(a in disc_point(), z in disc_point(), w in disc_point()) {
        let d0 = hyperbolic_distance(z, w);
        let d1 = hyperbolic_distance(disc_translate(a, z), disc_translate(a, w));
        prop_assert!((d0 - d1).abs() < 1e-8 * d0.max(1.0));
    }

    #[test]
    fn scaled_products_match_plain_products(gs in prop::collection::vec(map_strategy(), 1..6), p in point_strategy()) {
        let plain = gs.iter().fold(MoebiusMap::identity(), |acc, g| acc.compose(g));
        let scaled = gs.iter().fold(ScaledMap::identity(), |acc, g| acc.mul_map(g));
        let cond: f64 = gs.iter().map(|g| g.operator_norm().powi(2)).product();
        prop_assert!(chordal_distance(&plain.apply(&p), &scaled.apply(&p)) < 1e-12 * cond.max(1.0));
        prop_assert!((scaled.norm_log() - plain.operator_norm().ln()).abs() < 1e-9 * cond.max(1.0));
    }

    #[test]
    fn words_form_a_group(a in "[TtSs]{0,12}", b in "[TtSs]{0,12}") {
        let (a, b) = (Word::parse(&a).unwrap(), Word::parse(&b).unwrap());
        prop_assert_eq!(a.mul(&a.inverse()), Word::identity());
        prop_assert_eq!(a.mul(&b).inverse(), b.inverse().mul(&a.inverse()));
    }
}
