mod common;

use cp1_brownian::experiments::{
    chordal_diameter, dichotomy_experiment, write_curves_csv, CurveRow, ExperimentConfig,
};
use cp1_brownian::fls::{
    discretize_with, harnack_constant, simulate_fls, simulate_fls_seeded, CoinSource, FLSConfig, FlsStop, NoProbe,
};
use cp1_brownian::fuchsian::{build_gamma2_model, Word};
use cp1_brownian::hbm::euclid_radius;
use cp1_brownian::moebius::{contraction_data, CP1Point, MoebiusMap, C64};
use cp1_brownian::projective::StructureKind;
use cp1_brownian::rng::rng;

#[test]
fn harnack_constant_matches_grid_maximum() {
    for (d, dp) in [(0.15, 0.35), (0.1, 0.5), (0.3, 0.4)] {
        let closed = harnack_constant(d, dp).unwrap();
        let grid = common::harnack_grid_max(euclid_radius(d), euclid_radius(dp));
        assert!((grid / closed - 1.0).abs() < 5e-3, "{d} {dp}: grid {grid} closed {closed}");
        assert!(grid <= closed * (1.0 + 1e-12));
    }
}

#[test]
fn diagonal_lemma_on_grid() {
    let g = MoebiusMap::diag(C64::new(2.0, 0.0));
    let pts = common::lemma_grid(&CP1Point::e2(), 2.0, 10_000);
    assert_eq!(pts.len(), 10_000);
    assert_eq!(common::lemma_violations(&g, &CP1Point::e2(), &CP1Point::e1(), 2.0, &pts), (0, 0));
}

#[test]
fn lemma_holds_in_cartan_frame_of_random_maps() {
    let mut r = rng(11);
    let mut checked = 0;
    while checked < 20 {
        let g = MoebiusMap::random(&mut r, 4.0);
        let d = contraction_data(&g);
        if d.degenerate {
            continue;
        }
        checked += 1;
        let a = d.alpha.norm();
        let pts = common::lemma_grid(&d.y, a, 2_000);
        assert_eq!(common::lemma_violations(&g, &d.y, &d.z, a, &pts), (0, 0), "{g:?}");
    }
}

#[test]
fn discretization_commutes_with_left_translation() {
    let model = build_gamma2_model(9).unwrap();
    let cfg = FLSConfig::new(0.15, 0.35, &model).unwrap();
    let mut compared = 0;
    for seed in 0..24u64 {
        let g = Word::parse(["T", "s", "S", "t", "Ts"][seed as usize % 5]).unwrap();
        let gm = model.word_map(&g);
        let mut pr = rng(300 + seed);
        let run = simulate_fls(
            &model,
            &cfg,
            C64::new(0.0, 0.0),
            2e-3,
            FlsStop { accepted: 2, horizon: 15.0 },
            &mut pr,
            &mut CoinSource::seeded(seed),
            &mut NoProbe,
            true,
        )
        .unwrap();
        let trace = run.trace.unwrap();
        let moved = trace.map_points(|z| gm.apply_affine(z).unwrap());
        let a = discretize_with(&trace, &model, &cfg, &Word::identity(), &mut CoinSource::seeded(seed), &mut NoProbe)
            .unwrap();
        let b = discretize_with(&moved, &model, &cfg, &g, &mut CoinSource::seeded(seed), &mut NoProbe).unwrap();
        if a.truncated.is_some() || b.truncated.is_some() {
            continue;
        }
        compared += 1;
        let shifted: Vec<Word> = a.visited.iter().map(|w| g.mul(w)).collect();
        assert_eq!(b.visited, shifted);
        assert_eq!(a.accepted, b.accepted);
        assert_eq!(a.stop_times.len(), b.stop_times.len());
        for (x, y) in a.stop_times.iter().zip(&b.stop_times) {
            assert!((x.0 - y.0).abs() < 1e-9 && (x.1 - y.1).abs() < 1e-9);
        }
        for (x, y) in a.kappas.iter().zip(&b.kappas) {
            assert!((x - y).abs() < 1e-6);
        }
    }
    assert!(compared >= 4, "only {compared} untruncated pairs");
}

#[test]
fn simulated_records_satisfy_invariants() {
    let model = build_gamma2_model(3).unwrap();
    let cfg = FLSConfig::new(0.15, 0.35, &model).unwrap();
    let c = cfg.harnack_c;
    for seed in 0..40 {
        let rec = simulate_fls_seeded(&model, &cfg, 2e-3, FlsStop { accepted: 4, horizon: 1e4 }, seed, &mut NoProbe)
            .unwrap();
        rec.check_invariants().unwrap();
        assert!(rec.kappas.iter().all(|k| (1.0 / (c * c)..=1.0).contains(k)));
        for &n in &rec.accepted {
            assert!(rec.coins[n - 1] < rec.kappas[n - 1]);
        }
    }
}

#[test]
fn twisted_limits_lie_on_image_circle() {
    let twist = [[1.2, 0.3], [0.5, -0.1], [0.2, 0.0], [0.9, 0.2]];
    let cfg = ExperimentConfig {
        structure: StructureKind::MoebiusTwisted { twist },
        trials: 8,
        horizon: 50.0,
        dtau: 1e-2,
        ..Default::default()
    };
    let rep = dichotomy_experiment(&cfg).unwrap();
    assert!(rep.max_circle_distance < 1e-3, "{}", rep.max_circle_distance);
}

#[test]
fn diameter_of_antipodal_pair_is_one() {
    let p = CP1Point::from_affine(C64::new(0.3, -0.7));
    assert!((chordal_diameter(&[p.to_sphere(), p.antipode().to_sphere()]) - 1.0).abs() < 1e-12);
    assert_eq!(chordal_diameter(&[]), 0.0);
}

#[test]
fn curves_csv_header() {
    let rows = vec![CurveRow { trial: 0, t_or_k: 1.5, value: 0.25, series_name: "osc".into() }];
    let mut buf = Vec::new();
    write_curves_csv(&rows, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "trial,t_or_k,value,series_name\n0,1.5,0.25,osc\n");
}
