//! Configuration selection over (algorithm, m) from `h(t, m) = g(t / f(m), m)`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::convergence::ConvergenceModel;
use crate::optim::Algorithm;
use crate::system_model::SystemModel;

/// Largest iteration count searched by [`recommend_for_epsilon`].
pub const I_MAX: u64 = 1_000_000;
/// Relative slack used when flooring `t / f(m)`, so that `t = i·f(m)` maps
/// back to `i` despite rounding.
pub const FLOOR_TOL: f64 = 1e-9;
pub const RECOMMENDATION_HEADER: [&str; 5] = ["algorithm", "m", "metric", "value", "feasible"];

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("models disagree: {0}")]
    Mismatch(String),
    #[error("no configuration reaches the target within {} iterations", I_MAX)]
    NoFeasible { table: Vec<Candidate> },
}

/// Powers of two from 1 to 128.
pub fn default_m_grid() -> Vec<usize> {
    (0..8).map(|k| 1 << k).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelPair {
    algorithm: Algorithm,
    system: SystemModel,
    convergence: ConvergenceModel,
}

impl ModelPair {
    /// Rejects models whose recorded algorithm or dataset hash disagree.
    pub fn new(algorithm: Algorithm, system: SystemModel, convergence: ConvergenceModel) -> Result<Self, RecommendError> {
        if let (Some(a), Some(b)) = (&system.dataset_hash, &convergence.dataset_hash) {
            if a != b {
                return Err(RecommendError::Mismatch(format!("system model dataset {a} vs convergence model dataset {b}")));
            }
        }
        for (what, recorded) in [("system", &system.algorithm), ("convergence", &convergence.algorithm)] {
            if let Some(r) = recorded {
                let parsed: Result<Algorithm, _> = r.parse();
                if parsed.as_ref().ok() != Some(&algorithm) {
                    return Err(RecommendError::Mismatch(format!("{what} model was fitted for {r}, not {algorithm}")));
                }
            }
        }
        Ok(ModelPair { algorithm, system, convergence })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn system(&self) -> &SystemModel {
        &self.system
    }

    pub fn convergence(&self) -> &ConvergenceModel {
        &self.convergence
    }

    fn time_per_iter(&self, m: usize) -> Result<f64, RecommendError> {
        let f = self.system.predict_time(m);
        if f > 0.0 && f.is_finite() {
            Ok(f)
        } else {
            Err(RecommendError::InvalidModel(format!("f({m}) = {f} for {}", self.algorithm)))
        }
    }
}

/// `h(t, m)` together with the iteration count it was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HValue {
    pub sub_optimality: f64,
    pub iterations: f64,
    /// `t / f(m)` was below one and was raised to one.
    pub clamped: bool,
}

/// `g(max(t / f(m), 1), m)`.
pub fn h(pair: &ModelPair, t: f64, m: usize) -> Result<HValue, RecommendError> {
    check_query(t, m)?;
    let q = t / pair.time_per_iter(m)?;
    Ok(at_iterations(pair, q, m))
}

/// Like [`h`], but only completed iterations count:
/// `g(max(⌊t / f(m)⌋, 1), m)`.
pub fn h_completed(pair: &ModelPair, t: f64, m: usize) -> Result<HValue, RecommendError> {
    check_query(t, m)?;
    let q = completed_iterations(t, pair.time_per_iter(m)?);
    Ok(at_iterations(pair, q, m))
}

fn at_iterations(pair: &ModelPair, q: f64, m: usize) -> HValue {
    let clamped = q < 1.0;
    let i = q.max(1.0);
    HValue { sub_optimality: pair.convergence.predict_g(i, m), iterations: i, clamped }
}

fn check_query(t: f64, m: usize) -> Result<(), RecommendError> {
    if !(t >= 0.0) || !t.is_finite() || m == 0 {
        return Err(RecommendError::InvalidQuery(format!("t={t} m={m}")));
    }
    Ok(())
}

/// `⌊t / f⌋` with a small relative tolerance.
pub fn completed_iterations(t: f64, f: f64) -> f64 {
    let q = t / f;
    let r = q.round();
    if (q - r).abs() <= FLOOR_TOL * q.abs().max(1.0) {
        r
    } else {
        q.floor()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TimeS,
    SubOptimality,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::TimeS => "time_s",
            Metric::SubOptimality => "sub_optimality",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub algorithm: Algorithm,
    pub m: usize,
    pub iterations: Option<u64>,
    pub time_per_iter: f64,
    /// Predicted time for [`Metric::TimeS`], sub-optimality otherwise;
    /// infinite when infeasible.
    pub value: f64,
    pub feasible: bool,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub algorithm: Algorithm,
    pub m: usize,
    pub metric: Metric,
    pub predicted_value: f64,
    pub iterations: u64,
    pub time_s: f64,
    pub table: Vec<Candidate>,
}

impl Recommendation {
    pub fn to_csv(&self) -> String {
        table_csv(&self.table, self.metric)
    }

    /// `best: <alg> m=<k> t=<seconds>`, plus the predicted sub-optimality
    /// for deadline queries.
    pub fn verdict(&self) -> String {
        let mut s = format!("best: {} m={} t={}", self.algorithm, self.m, self.time_s);
        if self.metric == Metric::SubOptimality {
            let _ = write!(s, " sub_optimality={}", self.predicted_value);
        }
        s
    }
}

pub fn table_csv(table: &[Candidate], metric: Metric) -> String {
    let mut out = RECOMMENDATION_HEADER.join(",");
    out.push('\n');
    for c in table {
        let _ = writeln!(out, "{},{},{},{},{}", c.algorithm, c.m, metric.as_str(), c.value, c.feasible);
    }
    out
}

fn validate(pairs: &[ModelPair], m_grid: &[usize]) -> Result<(), RecommendError> {
    if pairs.is_empty() {
        return Err(RecommendError::InvalidQuery("no model pairs".into()));
    }
    if m_grid.is_empty() || m_grid.contains(&0) {
        return Err(RecommendError::InvalidQuery(format!("m grid must be nonempty with entries >= 1: {m_grid:?}")));
    }
    Ok(())
}

/// Smallest integer `i ≥ 1` with `ln g(i, m) ≤ ln ε`, or `None` if none is
/// found up to [`I_MAX`]. Doubling search followed by bisection.
pub fn iterations_to_epsilon(model: &ConvergenceModel, epsilon: f64, m: usize) -> Option<u64> {
    let target = epsilon.ln();
    let slack = 1e-12 * target.abs().max(1.0);
    let reached = |i: u64| model.predict_ln(i as f64, m) <= target + slack;
    if reached(1) {
        return Some(1);
    }
    let (mut lo, mut hi) = (1u64, 2u64);
    while !reached(hi) {
        if hi >= I_MAX {
            return None;
        }
        lo = hi;
        hi = (hi * 2).min(I_MAX);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reached(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

fn pick(table: &[Candidate]) -> Option<&Candidate> {
    table.iter().filter(|c| c.feasible).min_by(|a, b| {
        a.value.total_cmp(&b.value).then(a.m.cmp(&b.m)).then(a.algorithm.cmp(&b.algorithm))
    })
}

/// Fastest (algorithm, m) predicted to reach sub-optimality `epsilon`.
pub fn recommend_for_epsilon(pairs: &[ModelPair], epsilon: f64, m_grid: &[usize]) -> Result<Recommendation, RecommendError> {
    validate(pairs, m_grid)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(RecommendError::InvalidQuery(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut table = Vec::with_capacity(pairs.len() * m_grid.len());
    for pair in pairs {
        for &m in m_grid {
            let f = pair.time_per_iter(m)?;
            let iters = iterations_to_epsilon(&pair.convergence, epsilon, m);
            table.push(Candidate {
                algorithm: pair.algorithm,
                m,
                iterations: iters,
                time_per_iter: f,
                value: iters.map_or(f64::INFINITY, |i| i as f64 * f),
                feasible: iters.is_some(),
                clamped: false,
            });
        }
    }
    let best = pick(&table).cloned().ok_or_else(|| RecommendError::NoFeasible { table: table.clone() })?;
    Ok(Recommendation {
        algorithm: best.algorithm,
        m: best.m,
        metric: Metric::TimeS,
        predicted_value: best.value,
        iterations: best.iterations.expect("feasible candidate has iterations"),
        time_s: best.value,
        table,
    })
}

/// (algorithm, m) with the lowest predicted sub-optimality after `t_budget`
/// seconds, counting completed iterations only.
pub fn recommend_for_deadline(pairs: &[ModelPair], t_budget: f64, m_grid: &[usize]) -> Result<Recommendation, RecommendError> {
    validate(pairs, m_grid)?;
    if !(t_budget > 0.0) || !t_budget.is_finite() {
        return Err(RecommendError::InvalidQuery(format!("deadline must be positive, got {t_budget}")));
    }
    let mut table = Vec::with_capacity(pairs.len() * m_grid.len());
    for pair in pairs {
        for &m in m_grid {
            let f = pair.time_per_iter(m)?;
            let hv = h_completed(pair, t_budget, m)?;
            table.push(Candidate {
                algorithm: pair.algorithm,
                m,
                iterations: Some(hv.iterations as u64),
                time_per_iter: f,
                value: hv.sub_optimality,
                feasible: true,
                clamped: hv.clamped,
            });
        }
    }
    let best = pick(&table).cloned().expect("deadline table is nonempty");
    let iterations = best.iterations.expect("deadline candidates carry iterations");
    Ok(Recommendation {
        algorithm: best.algorithm,
        m: best.m,
        metric: Metric::SubOptimality,
        predicted_value: best.value,
        iterations,
        time_s: iterations as f64 * best.time_per_iter,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::default_basis;

    fn planted(slope: f64) -> ConvergenceModel {
        ConvergenceModel::from_raw(default_basis(), &[("i/m", -slope)], 2.0).unwrap()
    }

    fn theta1_only(theta1: f64) -> SystemModel {
        SystemModel::from_theta([0.0, theta1, 0.0, 0.0], 1.0)
    }

    fn pair(alg: Algorithm, slope: f64, sys: SystemModel) -> ModelPair {
        ModelPair::new(alg, sys, planted(slope)).unwrap()
    }

    #[test]
    fn composition_identity() {
        let p = pair(Algorithm::Cocoa, 0.4, SystemModel::from_theta([0.1, 2.0, 0.05, 0.01], 1.0));
        for m in [1, 3, 16, 128] {
            let f = p.system().predict_time(m);
            for i in [1u32, 2, 7, 50, 499] {
                let hv = h(&p, i as f64 * f, m).unwrap();
                assert!((hv.sub_optimality - p.convergence().predict_g(i as f64, m)).abs() <= 1e-12);
                assert_eq!(h_completed(&p, i as f64 * f, m).unwrap().iterations, i as f64);
            }
        }
    }

    #[test]
    fn zero_time_clamps_to_one_iteration() {
        let p = pair(Algorithm::Cocoa, 0.4, theta1_only(1.0));
        let hv = h(&p, 0.0, 4).unwrap();
        assert!(hv.clamped);
        assert_eq!(hv.sub_optimality, p.convergence().predict_g(1.0, 4));
    }

    #[test]
    fn constant_model_ignores_t_and_m() {
        let p = ModelPair::new(Algorithm::Cocoa, theta1_only(1.0), ConvergenceModel::constant(default_basis(), -1.0)).unwrap();
        let v = h(&p, 3.0, 2).unwrap().sub_optimality;
        assert_eq!(h(&p, 300.0, 64).unwrap().sub_optimality, v);
    }

    #[test]
    fn all_zero_system_model_is_invalid() {
        let p = pair(Algorithm::Cocoa, 0.4, SystemModel::from_theta([0.0; 4], 1.0));
        assert!(matches!(h(&p, 1.0, 2), Err(RecommendError::InvalidModel(_))));
    }

    #[test]
    fn planted_inversion_ties_to_smallest_m() {
        let p = pair(Algorithm::Cocoa, 0.4, theta1_only(3.0));
        let rec = recommend_for_epsilon(&[p], (-2.0f64).exp(), &default_m_grid()).unwrap();
        for c in &rec.table {
            assert_eq!(c.iterations, Some(10 * c.m as u64));
            assert_eq!(c.value, 30.0);
        }
        assert_eq!(rec.m, 1);
        assert!(rec.verdict().starts_with("best: cocoa m=1 t=30"));
    }

    #[test]
    fn immediate_satisfaction() {
        let p = pair(Algorithm::Cocoa, 0.4, SystemModel::from_theta([0.1, 2.0, 0.05, 0.01], 1.0));
        let eps = p.convergence().predict_g(1.0, 4) * 1.01;
        let rec = recommend_for_epsilon(std::slice::from_ref(&p), eps, &[4]).unwrap();
        assert_eq!(rec.iterations, 1);
        assert_eq!(rec.time_s, p.system().predict_time(4));
    }

    #[test]
    fn dominant_algorithm_wins() {
        let sys = theta1_only(1.0);
        let pairs = [pair(Algorithm::Cocoa, 0.2, sys.clone()), pair(Algorithm::CocoaPlus, 0.5, sys)];
        let rec = recommend_for_epsilon(&pairs, 1e-3, &[1, 2, 4]).unwrap();
        assert_eq!(rec.algorithm, Algorithm::CocoaPlus);
        assert_eq!(rec.table.len(), 6);
        let csv = rec.to_csv();
        assert!(csv.starts_with("algorithm,m,metric,value,feasible\n"));
        assert_eq!(csv.lines().filter(|l| l.starts_with("cocoa,")).count(), 3);
    }

    #[test]
    fn unreachable_is_excluded_or_fails() {
        let flat = ModelPair::new(Algorithm::Cocoa, theta1_only(1.0), ConvergenceModel::constant(default_basis(), 0.0)).unwrap();
        match recommend_for_epsilon(std::slice::from_ref(&flat), 0.5, &[1, 2]) {
            Err(RecommendError::NoFeasible { table }) => assert!(table.iter().all(|c| !c.feasible)),
            other => panic!("{other:?}"),
        }
        let ok = pair(Algorithm::CocoaPlus, 0.4, theta1_only(1.0));
        let rec = recommend_for_epsilon(&[flat, ok], 0.5, &[1, 2]).unwrap();
        assert_eq!(rec.algorithm, Algorithm::CocoaPlus);
        assert!(rec.table.iter().any(|c| !c.feasible && c.value.is_infinite()));
    }

    #[test]
    fn deadline_queries() {
        let sys = SystemModel::from_theta([1.0, 0.0, 0.0, 0.0], 1.0);
        let p = pair(Algorithm::Cocoa, 0.4, sys);
        let tiny = recommend_for_deadline(std::slice::from_ref(&p), 0.5, &[1, 2, 4]).unwrap();
        assert!(tiny.table.iter().all(|c| c.clamped && c.iterations == Some(1)));
        assert_eq!(tiny.m, 1);
        let mut prev = f64::INFINITY;
        for t in [1.0, 2.5, 10.0, 40.0] {
            let r = recommend_for_deadline(std::slice::from_ref(&p), t, &[1]).unwrap();
            assert!(r.predicted_value <= prev);
            assert_eq!(r.table.len(), 1);
            prev = r.predicted_value;
        }
        assert_eq!(recommend_for_deadline(&[p], 3.7, &[1]).unwrap().iterations, 3);
    }

    #[test]
    fn mismatched_hashes_rejected() {
        let mut sys = theta1_only(1.0);
        sys.dataset_hash = Some("a".into());
        let mut conv = planted(0.4);
        conv.dataset_hash = Some("b".into());
        assert!(ModelPair::new(Algorithm::Cocoa, sys.clone(), conv.clone()).is_err());
        conv.dataset_hash = Some("a".into());
        conv.algorithm = Some("cocoa_plus".into());
        assert!(ModelPair::new(Algorithm::Cocoa, sys, conv).is_err());
    }

    #[test]
    fn rejects_bad_queries() {
        let p = pair(Algorithm::Cocoa, 0.4, theta1_only(1.0));
        assert!(recommend_for_epsilon(std::slice::from_ref(&p), 0.0, &[1]).is_err());
        assert!(recommend_for_epsilon(std::slice::from_ref(&p), 1e-3, &[]).is_err());
        assert!(recommend_for_deadline(&[p], -1.0, &[1]).is_err());
    }
}
