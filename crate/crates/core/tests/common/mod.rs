#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use optsel::data::{synth_classification, SynthParams};
use optsel::optim::{reference_optimum, run_bsp, ReferenceOptimum, TraceMeta};
use optsel::{Algorithm, AlgorithmConfig, Dataset, SvmProblem, TimingMode, Trace, TraceRecord};

pub const DESK_REG: f64 = 1e-2;
pub const DESK_SEED: u64 = 1;

/// n = 2000, d = 50, margin 0.1, 5% flipped labels.
pub fn desk_dataset() -> Dataset {
    synth_classification(&SynthParams { n: 2000, d: 50, margin: 0.1, noise_frac: 0.05, seed: 7 }).unwrap()
}

pub fn desk_reference(ds: &Dataset) -> ReferenceOptimum {
    reference_optimum(&SvmProblem::new(ds, DESK_REG).unwrap(), 500)
}

/// One trace per `m`, run to sub-optimality 1e-4 or 500 rounds.
pub fn desk_traces(ds: &Dataset, p_star: f64, algorithm: Algorithm, ms: &[usize]) -> Vec<Trace> {
    let problem = SvmProblem::new(ds, DESK_REG).unwrap();
    ms.iter()
        .map(|&m| {
            let mut c = AlgorithmConfig::new(algorithm, m);
            c.p_star = Some(p_star);
            c.seed = DESK_SEED;
            run_bsp(&problem, &c).unwrap()
        })
        .collect()
}

/// Trace whose primal at iteration `i` is `p_star + exp(ln_sub(i, m))`.
pub fn planted_trace(m: usize, iters: usize, p_star: f64, ln_sub: impl Fn(f64, f64) -> f64) -> Trace {
    let records = (0..=iters)
        .map(|i| TraceRecord {
            algorithm: Algorithm::CocoaPlus,
            m,
            iteration: i,
            primal: p_star + ln_sub(i as f64, m as f64).exp(),
            duality_gap: None,
            iter_wall_time: if i == 0 { 0.0 } else { 1.0 },
            cumulative_time: i as f64,
        })
        .collect();
    Trace { meta: planted_meta(m, iters), records }
}

fn planted_meta(m: usize, iters: usize) -> TraceMeta {
    TraceMeta {
        dataset_hash: "planted".into(),
        dataset_path: None,
        n: 0,
        d: 0,
        reg: DESK_REG,
        algorithm: Algorithm::CocoaPlus,
        m,
        local_iters: 0,
        gamma: 1.0,
        sigma_prime: m as f64,
        batch_size: 0,
        max_iters: iters,
        epsilon: 0.0,
        seed: 0,
        timing_mode: TimingMode::Measured.as_str().into(),
        p_star: Some(0.0),
        p_star_gap: Some(0.0),
        diverged: false,
        stop_reason: "max_iters".into(),
        extra: vec![],
    }
}

/// Lasso minimum by enumerating every sign pattern `s ∈ {−1, 0, +1}^p`.
///
/// For each pattern, solves the centered stationarity system
/// `G_SS β_S = c_S − reg·s_S`, keeps it if the signs agree, and evaluates the
/// objective. The centered problem is equivalent because the intercept is
/// unpenalized. Returns `(objective, beta, intercept)` of the best pattern.
pub fn lasso_by_support_enumeration(x: &DMatrix<f64>, y: &[f64], reg: f64) -> (f64, Vec<f64>, f64) {
    let (n, p) = x.shape();
    assert!(p <= 10, "3^p patterns");
    let nf = n as f64;
    let means: Vec<f64> = (0..p).map(|j| x.column(j).iter().sum::<f64>() / nf).collect();
    let ybar = y.iter().sum::<f64>() / nf;
    let objective = |beta: &[f64]| {
        let b0 = ybar - means.iter().zip(beta).map(|(m, b)| m * b).sum::<f64>();
        let mut sq = 0.0;
        for r in 0..n {
            let fit: f64 = (0..p).map(|j| x[(r, j)] * beta[j]).sum();
            sq += (y[r] - fit - b0).powi(2);
        }
        (sq / (2.0 * nf) + reg * beta.iter().map(|b| b.abs()).sum::<f64>(), b0)
    };
    let mut best = {
        let zero = vec![0.0; p];
        let (obj, b0) = objective(&zero);
        (obj, zero, b0)
    };
    let total = 3usize.pow(p as u32);
    for code in 0..total {
        let mut signs = vec![0i32; p];
        let mut c = code;
        for s in signs.iter_mut() {
            *s = (c % 3) as i32 - 1;
            c /= 3;
        }
        let support: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
        if support.is_empty() {
            continue;
        }
        let k = support.len();
        let mut g = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        for (a, &ja) in support.iter().enumerate() {
            let mut cj = 0.0;
            for r in 0..n {
                cj += (x[(r, ja)] - means[ja]) * (y[r] - ybar);
            }
            rhs[a] = cj / nf - reg * signs[ja] as f64;
            for (b, &jb) in support.iter().enumerate() {
                let mut s = 0.0;
                for r in 0..n {
                    s += (x[(r, ja)] - means[ja]) * (x[(r, jb)] - means[jb]);
                }
                g[(a, b)] = s / nf;
            }
        }
        let Some(sol) = g.lu().solve(&rhs) else { continue };
        if support.iter().enumerate().any(|(a, &j)| sol[a] * signs[j] as f64 <= 0.0) {
            continue;
        }
        let mut beta = vec![0.0; p];
        for (a, &j) in support.iter().enumerate() {
            beta[j] = sol[a];
        }
        let (obj, b0) = objective(&beta);
        if obj < best.0 {
            best = (obj, beta, b0);
        }
    }
    best
}
