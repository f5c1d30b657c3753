use cp1_brownian::experiments::{
    cesaro_experiment, conformal_exit_check, dichotomy_experiment, ek_statistics, harmonic_experiment,
    occupation_experiment, write_curves_csv, CurveRow,
};
use cp1_brownian::fls::{
    discrete_walk_statistics, harnack_constant, simulate_fls_seeded, write_record_csv, FLSConfig, FlsStop, NoProbe,
};
use cp1_brownian::fuchsian::build_gamma2_model;
use cp1_brownian::hbm::{
    annulus_hitting_mc, annulus_hitting_probability, euclid_radius, green_occupation, simulate_hyperbolic,
    write_path_csv,
};
use cp1_brownian::moebius::{cartan, chordal_distance, CP1Point, MoebiusMap, C64};
use cp1_brownian::rng::{derive_seed, rng};
use cp1_brownian::stats::MeanCi;
use cp1_brownian::walk::{
    contraction_check, contraction_records, lyapunov_estimate, sample_walk, write_walk_csv, StepMeasure,
};
use cp1_brownian::{Error, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{BmFile, BmMode, ExperimentFile, FlsFile, SelftestFile, WalkFile};

/// What a subcommand produces: the report and named CSV files.
pub struct Output {
    pub report: Value,
    pub csvs: Vec<(String, Vec<u8>)>,
    /// False when the run finished but its own checks failed.
    pub ok: bool,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports are serializable")
}

fn curves(rows: &[CurveRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_curves_csv(rows, &mut buf)?;
    Ok(buf)
}

fn done(report: Value, csvs: Vec<(String, Vec<u8>)>) -> Result<Output> {
    Ok(Output { report, csvs, ok: true })
}

fn walk_window(m: &StepMeasure, n: usize, trials: usize, seed: u64, manual: Option<[f64; 2]>) -> Result<(f64, f64)> {
    match manual {
        Some([a, b]) => Ok((a, b)),
        None => {
            let l = lyapunov_estimate(m, n, trials.max(2), seed)?;
            Ok((0.5 * l.lambda_hat, 1.5 * l.lambda_hat))
        }
    }
}

pub fn walk(cfg: &WalkFile, seed: u64) -> Result<Output> {
    let w = &cfg.walk;
    let m = w.measure.build()?;
    let rates: Vec<f64> = (0..w.trials)
        .into_par_iter()
        .map(|i| sample_walk(&m, w.n, derive_seed(seed, i as u64)).products[w.n].norm_log() / w.n.max(1) as f64)
        .collect();
    let first = sample_walk(&m, w.n, derive_seed(seed, 0));
    let last = contraction_records(&first).last().map(|r| {
        json!({"n": r.n, "norm_log": r.norm_log, "y": r.y.to_sphere(), "z": r.z.to_sphere(), "degenerate": r.degenerate})
    });
    let mut csv = Vec::new();
    write_walk_csv(&first, &mut csv)?;
    let rows: Vec<CurveRow> = rates
        .iter()
        .enumerate()
        .map(|(i, &v)| CurveRow { trial: i, t_or_k: w.n as f64, value: v, series_name: "growth_rate".into() })
        .collect();
    done(
        json!({"n": w.n, "trials": w.trials, "growth_rate": to_value(&MeanCi::of(&rates)), "trial0_final": last}),
        vec![("walk.csv".into(), csv), ("curves.csv".into(), curves(&rows)?)],
    )
}

pub fn lyapunov(cfg: &WalkFile, seed: u64) -> Result<Output> {
    let w = &cfg.walk;
    let m = w.measure.build()?;
    let est = lyapunov_estimate(&m, w.n, w.trials, seed)?;
    let rows: Vec<CurveRow> = est
        .per_trial
        .iter()
        .enumerate()
        .map(|(i, &v)| CurveRow { trial: i, t_or_k: w.n as f64, value: v, series_name: "lambda".into() })
        .collect();
    done(to_value(&est), vec![("curves.csv".into(), curves(&rows)?)])
}

pub fn contraction(cfg: &WalkFile, seed: u64) -> Result<Output> {
    let w = &cfg.walk;
    let m = w.measure.build()?;
    let (lp, ldp) = walk_window(&m, w.n, w.trials, derive_seed(seed, u64::MAX), w.lambda_window)?;
    let checks: Vec<_> = (0..w.trials)
        .into_par_iter()
        .map(|i| contraction_check(&sample_walk(&m, w.n, derive_seed(seed, i as u64)), lp, ldp, w.grid))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, c) in checks.iter().enumerate() {
        rows.push(CurveRow { trial: i, t_or_k: w.n as f64, value: c.last_failure as f64, series_name: "last_failure".into() });
    }
    if let Some(c) = checks.first() {
        for r in &c.per_n {
            rows.push(CurveRow { trial: 0, t_or_k: r.n as f64, value: r.both() as u8 as f64, series_name: "both".into() });
        }
    }
    let settled = checks.iter().filter(|c| c.last_failure <= w.n / 2).count();
    let summary: Vec<Value> = checks
        .iter()
        .map(|c| json!({"last_failure": c.last_failure, "first_success": c.first_success, "tail_pass_rate": c.tail_pass_rate}))
        .collect();
    done(
        json!({
            "lambda_prime": lp,
            "lambda_dblprime": ldp,
            "n": w.n,
            "trials": w.trials,
            "settled_by_half": settled,
            "settled_fraction": settled as f64 / w.trials.max(1) as f64,
            "per_trial": summary,
        }),
        vec![("curves.csv".into(), curves(&rows)?)],
    )
}

pub fn bm(cfg: &BmFile, seed: u64) -> Result<Output> {
    let start = C64::new(cfg.bm.start[0], cfg.bm.start[1]);
    match &cfg.bm.mode {
        BmMode::Path { dtau, stop, samples } => {
            let paths: Vec<_> = (0..*samples)
                .into_par_iter()
                .map(|i| simulate_hyperbolic(start, *dtau, *stop, derive_seed(seed, i as u64)))
                .collect::<Result<_>>()?;
            let horizons: Vec<f64> = paths.iter().map(|p| p.horizon()).collect();
            let rows: Vec<CurveRow> = paths
                .iter()
                .enumerate()
                .map(|(i, p)| CurveRow {
                    trial: i,
                    t_or_k: p.horizon(),
                    value: p.trace.end().norm(),
                    series_name: "end_radius".into(),
                })
                .collect();
            let mut csvs = vec![("curves.csv".into(), curves(&rows)?)];
            if let Some(p) = paths.first() {
                let mut buf = Vec::new();
                write_path_csv(p, &mut buf)?;
                csvs.push(("path.csv".into(), buf));
            }
            done(json!({"mode": "path", "samples": samples, "hyperbolic_duration": to_value(&MeanCi::of(&horizons))}), csvs)
        }
        BmMode::Annulus { c2, inner, paths, step } => {
            let target = annulus_hitting_probability(*c2, *inner)?;
            let est = annulus_hitting_mc(*c2, *inner, *paths, *step, seed)?;
            done(
                json!({"mode": "annulus", "formula": target, "estimate": to_value(&est), "within_3_sigma": est.within_sigmas(target, 3.0)}),
                vec![],
            )
        }
        BmMode::Green { center, rho, samples } => {
            let g = green_occupation(C64::new(center[0], center[1]), *rho, *samples, seed)?;
            done(json!({"mode": "green", "result": to_value(&g), "relative_gap": (g.mc_estimate / g.quadrature_value - 1.0).abs()}), vec![])
        }
        BmMode::ConformalExit { radius, samples } => {
            let ks = conformal_exit_check(start, *radius, *samples, seed)?;
            done(json!({"mode": "conformal_exit", "ks": to_value(&ks)}), vec![])
        }
    }
}

pub fn fls(cfg: &FlsFile, seed: u64) -> Result<Output> {
    let model = build_gamma2_model(cfg.group.word_radius.max(1))?;
    let fc = FLSConfig::new(cfg.fls.delta, cfg.fls.delta_prime, &model)?.with_time_cap(cfg.fls.time_cap);
    let run = &cfg.run;
    let recs: Vec<_> = (0..run.records)
        .into_par_iter()
        .map(|i| {
            simulate_fls_seeded(
                &model,
                &fc,
                run.dtau,
                FlsStop { accepted: run.accepted, horizon: f64::INFINITY },
                derive_seed(seed, i as u64),
                &mut NoProbe,
            )
        })
        .collect::<Result<_>>()?;
    let stats = discrete_walk_statistics(&recs, &model, run.accepted)?;
    let violations = recs.iter().filter(|r| r.check_invariants().is_err()).count();
    let mut rows = Vec::new();
    for (i, r) in recs.iter().enumerate() {
        for (k, &s) in r.discrete_times.iter().enumerate() {
            rows.push(CurveRow { trial: i, t_or_k: (k + 1) as f64, value: s, series_name: "s_nk".into() });
        }
    }
    let mut rec0 = Vec::new();
    if let Some(r) = recs.first() {
        write_record_csv(r, &mut rec0)?;
    }
    done(
        json!({"harnack_c": fc.harnack_c, "invariant_violations": violations, "statistics": to_value(&stats)}),
        vec![("curves.csv".into(), curves(&rows)?), ("record0.csv".into(), rec0)],
    )
}

pub fn experiment(name: &str, cfg: &ExperimentFile) -> Result<Output> {
    let e = &cfg.experiment;
    let (report, rows) = match name {
        "dichotomy" => {
            let r = dichotomy_experiment(e)?;
            (to_value(&r), r.rows())
        }
        "cesaro" => {
            let r = cesaro_experiment(e)?;
            (to_value(&r), r.rows())
        }
        "harmonic" => {
            let r = harmonic_experiment(e)?;
            (to_value(&r), r.rows())
        }
        "ek" => {
            let r = ek_statistics(e)?;
            (to_value(&r), r.rows())
        }
        "occupation" => {
            let r = occupation_experiment(e)?;
            (to_value(&r), r.rows())
        }
        other => return Err(Error::InvalidConfig(format!("unknown experiment {other}"))),
    };
    done(report, vec![("curves.csv".into(), curves(&rows)?)])
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Fast invariant suite: algebra, lemma, Harnack constant, discretization
/// records and experiment determinism.
pub fn selftest(_cfg: &SelftestFile, seed: u64) -> Result<Output> {
    let mut checks = Vec::new();
    let mut r = rng(seed);
    let mut bad = 0;
    for _ in 0..1000 {
        let g = MoebiusMap::random(&mut r, 10.0);
        let s = g.operator_norm().max(1.0);
        let p = CP1Point::random(&mut r);
        let inv_ok = g.compose(&g.inverse()).is_identity(1e-10 * s * s);
        let cartan_ok = cartan(&g).reconstruct().max_entry_diff(&g) <= 1e-10 * s;
        let back = g.inverse().apply(&g.apply(&p));
        if !(inv_ok && cartan_ok && chordal_distance(&back, &p) < 1e-8 * s * s) {
            bad += 1;
        }
    }
    checks.push(Check { name: "moebius_algebra", pass: bad == 0, detail: format!("{bad} failures on 1000 maps") });

    let g = MoebiusMap::diag(C64::new(2.0, 0.0));
    let mut viol = 0;
    for i in 0..2000 {
        let h = 1.0 - 2.0 * (i as f64 + 0.5) / 2000.0;
        let phi = 2.399963229728653 * i as f64;
        let s = (1.0 - h * h).sqrt();
        let p = CP1Point::from_sphere([s * phi.cos(), s * phi.sin(), h]);
        let (dy, dz) = (chordal_distance(&p, &CP1Point::e2()), chordal_distance(&g.apply(&p), &CP1Point::e1()));
        if (dy >= 0.5 && dz > 0.5) || (dy <= 0.25 && dz < 0.5) {
            viol += 1;
        }
    }
    checks.push(Check { name: "diagonal_lemma", pass: viol == 0, detail: format!("{viol} violations on 2000 points") });

    let closed = harnack_constant(0.15, 0.35)?;
    let (rr, big) = (euclid_radius(0.15), euclid_radius(0.35));
    let worst = (0..720)
        .map(|j| {
            let z = C64::from_polar(big, std::f64::consts::TAU * j as f64 / 720.0);
            let k = |x: C64| (big * big - x.norm_sqr()) / (x - z).norm_sqr();
            k(C64::new(rr, 0.0)) / k(C64::new(-rr, 0.0))
        })
        .fold(0.0f64, f64::max);
    checks.push(Check {
        name: "harnack_constant",
        pass: (worst / closed - 1.0).abs() < 5e-3,
        detail: format!("closed {closed:.5}, kernel ratio {worst:.5}"),
    });

    let model = build_gamma2_model(3)?;
    let fc = FLSConfig::new(0.15, 0.35, &model)?;
    let recs: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            simulate_fls_seeded(&model, &fc, 2e-3, FlsStop { accepted: 3, horizon: 1e4 }, derive_seed(seed, i), &mut NoProbe)
        })
        .collect::<Result<_>>()?;
    let broken = recs.iter().filter(|r| r.check_invariants().is_err()).count();
    checks.push(Check { name: "fls_invariants", pass: broken == 0, detail: format!("{broken} of 20 records broken") });

    let small = cp1_brownian::experiments::ExperimentConfig { trials: 3, horizon: 4.0, dtau: 1e-2, seed, ..Default::default() };
    let a = serde_json::to_string(&dichotomy_experiment(&small)?).expect("serializable");
    let b = serde_json::to_string(&dichotomy_experiment(&small)?).expect("serializable");
    checks.push(Check { name: "determinism", pass: a == b, detail: "dichotomy report reproduced".into() });

    let ok = checks.iter().all(|c| c.pass);
    let report = json!({
        "passed": ok,
        "checks": checks.iter().map(|c| json!({"name": c.name, "pass": c.pass, "detail": c.detail})).collect::<Vec<_>>(),
    });
    Ok(Output { report, csvs: vec![], ok })
}
