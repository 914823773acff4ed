mod common;

use optsel::convergence::{build_training_set, default_basis, fit, ConvergenceError, FitOptions};
use optsel::data::{synth_classification, SynthParams};
use optsel::eval::{forward_prediction_iters, forward_prediction_time, loo_m_cv, EvalError};
use optsel::optim::{reference_optimum, run_bsp};
use optsel::recommender::{h, recommend_for_deadline, recommend_for_epsilon, ModelPair};
use optsel::{Algorithm, AlgorithmConfig, ConvergenceModel, SvmProblem, SystemModel, Trace};
use proptest::prelude::*;

fn planted(i: f64, m: f64) -> f64 {
    -0.4 * (i / m) + 2.0
}

#[test]
fn log_identity_and_floor() {
    let mut t = common::planted_trace(2, 3, 1.0, |i, _| if i == 2.0 { f64::NEG_INFINITY } else { -3.0 });
    t.records[3].primal = 0.9995; // reference overshoot, within the certified gap
    let ts = build_training_set(&[t], 1.0, 1e-3).unwrap();
    assert_eq!(ts.dropped, 2);
    assert_eq!(ts.rows.len(), 1);
    assert!((ts.rows[0].y + 3.0).abs() < 1e-12);
    assert_eq!(ts.rows[0].i, 1.0);
}

#[test]
fn training_set_rejects_mixed_or_empty() {
    let a = common::planted_trace(2, 5, 0.0, planted);
    let mut b = common::planted_trace(4, 5, 0.0, planted);
    b.meta.dataset_hash = "other".into();
    assert!(matches!(build_training_set(&[a.clone(), b], 0.0, 0.0), Err(ConvergenceError::Mismatch(_))));
    let mut c = common::planted_trace(4, 5, 0.0, planted);
    c.meta.algorithm = Algorithm::Cocoa;
    assert!(matches!(build_training_set(&[a.clone(), c], 0.0, 0.0), Err(ConvergenceError::Mismatch(_))));
    let flat = common::planted_trace(1, 5, 0.0, |_, _| -40.0);
    assert!(matches!(build_training_set(&[flat], 0.0, 0.0), Err(ConvergenceError::InsufficientData(_))));
    // p* far above every recorded primal
    assert!(build_training_set(&[a], 100.0, 1e-9).is_err());
}

#[test]
fn real_cocoa_trace_gives_decreasing_targets() {
    let ds = synth_classification(&SynthParams { n: 300, d: 10, margin: 0.1, noise_frac: 0.0, seed: 3 }).unwrap();
    let problem = SvmProblem::new(&ds, 0.05).unwrap();
    let r = reference_optimum(&problem, 500);
    let mut c = AlgorithmConfig::new(Algorithm::Cocoa, 4);
    c.p_star = Some(r.p_star);
    c.max_iters = 60;
    let trace = run_bsp(&problem, &c).unwrap();
    let primal: Vec<f64> = trace.records.iter().map(|r| r.primal).collect();
    if primal.windows(2).all(|w| w[1] < w[0]) {
        let ts = build_training_set(&[trace], r.p_star, r.gap).unwrap();
        assert!(ts.rows.windows(2).all(|w| w[1].y < w[0].y));
    } else {
        // the primal of a dual method need not decrease; the transform is still monotone
        let ts = build_training_set(std::slice::from_ref(&trace), r.p_star, r.gap).unwrap();
        for w in ts.rows.windows(2) {
            let (pa, pb) = (primal[w[0].i as usize], primal[w[1].i as usize]);
            assert_eq!(pb < pa, w[1].y < w[0].y);
        }
    }
}

fn planted_traces(ms: &[usize]) -> Vec<Trace> {
    ms.iter().map(|&m| common::planted_trace(m, 200, 0.0, planted)).collect()
}

#[test]
fn loo_on_planted_model_is_exact() {
    let traces = planted_traces(&[1, 2, 4, 8, 16]);
    let rep = loo_m_cv(&traces, &default_basis(), 0.0, 0.0, &FitOptions::default()).unwrap();
    assert_eq!(rep.rows.len(), 5);
    for row in &rep.rows {
        assert!(row.rmse_log <= 1e-6, "{row:?}");
        assert!(row.r2_log.unwrap() <= 1.0);
    }
    assert!(rep.summary_csv().lines().count() == 7);
}

#[test]
fn loo_needs_three_m() {
    let traces = planted_traces(&[1, 2]);
    assert!(matches!(
        loo_m_cv(&traces, &default_basis(), 0.0, 0.0, &FitOptions::default()),
        Err(EvalError::InsufficientData(_))
    ));
}

#[test]
fn duplicate_traces_do_not_change_loo() {
    let noisy = |i: f64, m: f64| planted(i, m) + 0.05 * (i * 1.7 + m).sin();
    let ms = [1, 2, 4, 8];
    let base: Vec<Trace> = ms.iter().map(|&m| common::planted_trace(m, 120, 0.0, noisy)).collect();
    let mut doubled = base.clone();
    doubled.push(base[2].clone());
    let opts = FitOptions::default();
    let a = loo_m_cv(&base, &default_basis(), 0.0, 0.0, &opts).unwrap();
    let b = loo_m_cv(&doubled, &default_basis(), 0.0, 0.0, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn forward_prediction_on_planted_trace() {
    let t = common::planted_trace(32, 200, 0.0, planted);
    for horizon in [1, 10] {
        let rep = forward_prediction_iters(&t, &default_basis(), 50, horizon, 0.0, 0.0).unwrap();
        assert_eq!(rep.points.len(), 200 - 50 - horizon + 1);
        assert!(rep.points.iter().all(|p| p.abs_err() <= 1e-6), "h={horizon} worst {}", rep.mean_abs_err());
    }
    assert!(matches!(
        forward_prediction_iters(&t, &default_basis(), 50, 0, 0.0, 0.0),
        Err(EvalError::InvalidHorizon(_))
    ));
    assert!(forward_prediction_iters(&t, &default_basis(), 190, 20, 0.0, 0.0).is_err());
}

#[test]
fn time_horizon_converts_through_f() {
    let t = common::planted_trace(8, 150, 0.0, |i, m| planted(i, m) + 0.01 * (i / 3.0).cos());
    let half = SystemModel::from_theta([0.5, 0.0, 0.0, 0.0], 1.0);
    let by_time = forward_prediction_time(&t, &half, &default_basis(), 25.0, 1.0, 0.0, 0.0).unwrap();
    let by_iter = forward_prediction_iters(&t, &default_basis(), 50, 2, 0.0, 0.0).unwrap();
    assert_eq!(by_time.rows, by_iter.rows);
    assert_eq!(by_time.points, by_iter.points);

    let f = SystemModel::from_theta([0.1, 2.0, 0.05, 0.01], 1.0);
    let fm = f.predict_time(8);
    for k in [1usize, 3, 10] {
        let a = forward_prediction_time(&t, &f, &default_basis(), 50.0 * fm, k as f64 * fm, 0.0, 0.0).unwrap();
        let b = forward_prediction_iters(&t, &default_basis(), 50, k, 0.0, 0.0).unwrap();
        assert_eq!(a.points, b.points);
    }
    let clamped = forward_prediction_time(&t, &half, &default_basis(), 25.0, 0.2, 0.0, 0.0).unwrap();
    assert!(clamped.notes.iter().any(|n| n.contains("evaluated at 1 iteration")));
    // 0.9 s holds one completed 0.5 s iteration
    let short = forward_prediction_time(&t, &half, &default_basis(), 0.9, 1.0, 0.0, 0.0);
    assert!(matches!(short, Err(EvalError::InvalidWindow(msg)) if msg.contains("1 iterations")));
}

#[test]
fn fitted_model_round_trips_through_disk() {
    let traces = planted_traces(&[1, 4, 16]);
    let ts = build_training_set(&traces, 0.0, 0.0).unwrap();
    let model = fit(&ts, &default_basis(), 3).unwrap();
    let dir = std::env::temp_dir().join(format!("optsel-model-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("conv.model");
    model.write(&path).unwrap();
    let back = ConvergenceModel::read(&path).unwrap();
    assert_eq!(back, model);
    std::fs::remove_dir_all(&dir).unwrap();
}

fn random_system() -> impl Strategy<Value = SystemModel> {
    (0.0..1.0f64, 0.0..5.0f64, 0.0..0.2f64, 0.0..0.05f64)
        .prop_filter("f(m) > 0", |t| t.0 + t.1 > 1e-3)
        .prop_map(|(a, b, c, d)| SystemModel::from_theta([a, b, c, d], 1.0))
}

fn random_convergence() -> impl Strategy<Value = ConvergenceModel> {
    (-1.0..0.0f64, -0.5..0.0f64, -0.3..0.3f64, -1.0..3.0f64).prop_map(|(a, b, c, b0)| {
        ConvergenceModel::from_raw(default_basis(), &[("i/m", a), ("ln(1+i)", b), ("1/m", c)], b0).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_identity(sys in random_system(), conv in random_convergence(), i in 1u32..2000, m in 1usize..200) {
        let pair = ModelPair::new(Algorithm::Cocoa, sys.clone(), conv.clone()).unwrap();
        let t = i as f64 * sys.predict_time(m);
        let hv = h(&pair, t, m).unwrap();
        prop_assert!((hv.sub_optimality - conv.predict_g(i as f64, m)).abs() <= 1e-12);
    }

    #[test]
    fn recommendation_is_table_optimum_and_refinement_helps(
        sys in random_system(),
        conv in random_convergence(),
        conv2 in random_convergence(),
        eps_exp in -6.0..-1.0f64,
        extra in 1usize..300,
    ) {
        let pairs = [
            ModelPair::new(Algorithm::Cocoa, sys.clone(), conv).unwrap(),
            ModelPair::new(Algorithm::CocoaPlus, sys, conv2).unwrap(),
        ];
        let grid = vec![1, 4, 16];
        let mut finer = grid.clone();
        finer.push(extra);
        let eps = 10f64.powf(eps_exp);
        if let Ok(rec) = recommend_for_epsilon(&pairs, eps, &grid) {
            prop_assert!(rec.table.iter().filter(|c| c.feasible).all(|c| rec.predicted_value <= c.value));
            let refined = recommend_for_epsilon(&pairs, eps, &finer).unwrap();
            prop_assert!(refined.predicted_value <= rec.predicted_value);
            prop_assert_eq!(rec, recommend_for_epsilon(&pairs, eps, &grid).unwrap());
        }
        let dl = recommend_for_deadline(&pairs, 5.0, &grid).unwrap();
        prop_assert!(dl.table.iter().all(|c| dl.predicted_value <= c.value));
        prop_assert!(recommend_for_deadline(&pairs, 5.0, &finer).unwrap().predicted_value <= dl.predicted_value);
    }
}
