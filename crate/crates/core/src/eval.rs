//! Fit-quality protocols in log sub-optimality space: leave-one-m-out
//! cross-validation and forward prediction by iteration or time horizon.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::convergence::{
    build_training_set, fit_with, ConvergenceError, ConvergenceModel, FeatureBasis, FitMethod, FitOptions,
    TrainingRow, TrainingSet,
};
use crate::optim::Trace;
use crate::recommender::completed_iterations;
use crate::system_model::SystemModel;

pub const SUMMARY_HEADER: [&str; 6] = ["protocol", "unit", "N_points", "rmse_log", "r2_log", "max_abs_err_log"];
pub const POINTS_HEADER: [&str; 5] = ["unit", "i", "m", "actual_log", "predicted_log"];
pub const DEFAULT_WINDOW: usize = 50;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error(transparent)]
    Convergence(#[from] ConvergenceError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub unit: String,
    pub n_points: usize,
    pub rmse_log: f64,
    /// `None` when the actual values have zero spread.
    pub r2_log: Option<f64>,
    pub max_abs_err_log: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub unit: String,
    pub i: f64,
    pub m: usize,
    pub actual_log: f64,
    pub predicted_log: f64,
}

impl EvalPoint {
    pub fn abs_err(&self) -> f64 {
        (self.actual_log - self.predicted_log).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub protocol: String,
    pub rows: Vec<EvalRow>,
    pub points: Vec<EvalPoint>,
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn mean_rmse_log(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.rmse_log))
    }

    pub fn mean_max_abs_err_log(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.max_abs_err_log))
    }

    /// Mean over the rows that have an `r2_log`.
    pub fn mean_r2_log(&self) -> Option<f64> {
        let vals: Vec<f64> = self.rows.iter().filter_map(|r| r.r2_log).collect();
        (!vals.is_empty()).then(|| mean(vals.into_iter()))
    }

    pub fn mean_abs_err(&self) -> f64 {
        mean(self.points.iter().map(EvalPoint::abs_err))
    }

    /// Mean absolute error over the first and the last quarter of the points,
    /// in report order.
    pub fn quartile_abs_err(&self) -> Option<(f64, f64)> {
        let q = self.points.len() / 4;
        if q == 0 {
            return None;
        }
        let n = self.points.len();
        let first = mean(self.points[..q].iter().map(EvalPoint::abs_err));
        let last = mean(self.points[n - q..].iter().map(EvalPoint::abs_err));
        Some((first, last))
    }

    pub fn row(&self, unit: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.unit == unit)
    }

    /// Per-unit rows followed by a `mean` row.
    pub fn summary_csv(&self) -> String {
        let mut out = SUMMARY_HEADER.join(",");
        out.push('\n');
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.protocol,
                r.unit,
                r.n_points,
                r.rmse_log,
                opt(r.r2_log),
                r.max_abs_err_log
            );
        }
        let total: usize = self.rows.iter().map(|r| r.n_points).sum();
        let _ = writeln!(
            out,
            "{},mean,{},{},{},{}",
            self.protocol,
            total,
            self.mean_rmse_log(),
            opt(self.mean_r2_log()),
            self.mean_max_abs_err_log()
        );
        out
    }

    pub fn points_csv(&self) -> String {
        let mut out = POINTS_HEADER.join(",");
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(out, "{},{},{},{},{}", p.unit, p.i, p.m, p.actual_log, p.predicted_log);
        }
        out
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Metrics of `model` on `rows`.
pub fn score_rows(unit: &str, model: &ConvergenceModel, rows: &[TrainingRow]) -> (EvalRow, Vec<EvalPoint>) {
    let points: Vec<EvalPoint> = rows
        .iter()
        .map(|r| EvalPoint { unit: unit.to_string(), i: r.i, m: r.m, actual_log: r.y, predicted_log: model.predict_ln(r.i, r.m) })
        .collect();
    (summarize(unit, &points), points)
}

fn summarize(unit: &str, points: &[EvalPoint]) -> EvalRow {
    let n = points.len() as f64;
    let sse: f64 = points.iter().map(|p| (p.actual_log - p.predicted_log).powi(2)).sum();
    let ybar = points.iter().map(|p| p.actual_log).sum::<f64>() / n;
    let sst: f64 = points.iter().map(|p| (p.actual_log - ybar).powi(2)).sum();
    EvalRow {
        unit: unit.to_string(),
        n_points: points.len(),
        rmse_log: (sse / n).sqrt(),
        r2_log: (sst > 0.0).then(|| 1.0 - sse / sst),
        max_abs_err_log: points.iter().map(EvalPoint::abs_err).fold(0.0, f64::max),
    }
}

/// In-sample fit quality, one row.
pub fn fit_report(model: &ConvergenceModel, training: &TrainingSet) -> EvalReport {
    let (row, points) = score_rows("all", model, &training.rows);
    EvalReport { protocol: "fit".into(), rows: vec![row], points, notes: model.warnings.clone() }
}

fn dedup(traces: &[Trace]) -> Vec<&Trace> {
    let mut seen = HashSet::new();
    traces.iter().filter(|t| seen.insert(t.meta.identity_hash())).collect()
}

/// Leave-one-m-out: for each distinct `m*`, fit on traces with `m ≠ m*` and
/// score the held-out traces. Duplicate traces (same metadata) count once.
pub fn loo_m_cv(
    traces: &[Trace],
    basis: &FeatureBasis,
    p_star: f64,
    p_star_gap: f64,
    opts: &FitOptions,
) -> Result<EvalReport, EvalError> {
    let unique = dedup(traces);
    let mut by_m: BTreeMap<usize, Vec<Trace>> = BTreeMap::new();
    for t in &unique {
        by_m.entry(t.m()).or_default().push((*t).clone());
    }
    if by_m.len() < 3 {
        return Err(EvalError::InsufficientData(format!("need >= 3 distinct m, got {}", by_m.len())));
    }
    let mut report = EvalReport { protocol: "loo-m".into(), rows: vec![], points: vec![], notes: vec![] };
    for (&held, test) in &by_m {
        let train: Vec<Trace> = by_m.iter().filter(|(m, _)| **m != held).flat_map(|(_, ts)| ts.iter().cloned()).collect();
        let training = build_training_set(&train, p_star, p_star_gap)?;
        let model = fit_with(&training, basis, opts)?;
        let heldout = match build_training_set(test, p_star, p_star_gap) {
            Ok(ts) => ts,
            Err(ConvergenceError::InsufficientData(msg)) => {
                report.notes.push(format!("m={held}: no held-out points ({msg})"));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let (row, points) = score_rows(&format!("m={held}"), &model, &heldout.rows);
        report.rows.push(row);
        report.points.extend(points);
    }
    if report.rows.is_empty() {
        return Err(EvalError::InsufficientData("no held-out unit had points".into()));
    }
    Ok(report)
}

/// Sliding-window forward prediction on one trace: at each anchor `a`, fit by
/// OLS on iterations `(a − window, a]` and predict iteration `a + horizon`.
pub fn forward_prediction_iters(
    trace: &Trace,
    basis: &FeatureBasis,
    window: usize,
    horizon: usize,
    p_star: f64,
    p_star_gap: f64,
) -> Result<EvalReport, EvalError> {
    if horizon == 0 {
        return Err(EvalError::InvalidHorizon("horizon must be at least one iteration".into()));
    }
    if window < 2 {
        return Err(EvalError::InvalidWindow(format!("window must be at least 2, got {window}")));
    }
    let all = build_training_set(std::slice::from_ref(trace), p_star, p_star_gap)?;
    let by_i: BTreeMap<u64, TrainingRow> = all.rows.iter().map(|r| (r.i as u64, *r)).collect();
    let last = by_i.keys().next_back().copied().unwrap_or(0);
    if (last as usize) < window + horizon {
        return Err(EvalError::InsufficientData(format!(
            "{last} usable iterations, need more than window {window} + horizon {horizon}"
        )));
    }
    let opts = FitOptions { method: Some(FitMethod::Ols), ..FitOptions::default() };
    let mut report =
        EvalReport { protocol: format!("forward-iters-h{horizon}"), rows: vec![], points: vec![], notes: vec![] };
    let mut notes = BTreeMap::new();
    for a in window as u64..=last - horizon as u64 {
        let Some(target) = by_i.get(&(a + horizon as u64)) else { continue };
        let rows: Vec<TrainingRow> = by_i.range(a + 1 - window as u64..=a).map(|(_, r)| *r).collect();
        if rows.len() < 2 {
            continue;
        }
        let ts = TrainingSet { rows, dropped: 0, ..all.clone() };
        let model = fit_with(&ts, basis, &opts)?;
        for w in model.warnings.iter().filter(|w| w.starts_with("reduced basis")) {
            *notes.entry(w.clone()).or_insert(0usize) += 1;
        }
        let unit = format!("a={a}");
        let (row, points) = score_rows(&unit, &model, std::slice::from_ref(target));
        report.rows.push(row);
        report.points.extend(points);
    }
    if report.rows.is_empty() {
        return Err(EvalError::InsufficientData("no anchor had a target above the floor".into()));
    }
    report.notes = notes.into_iter().map(|(w, k)| format!("{w} ({k} anchors)")).collect();
    Ok(report)
}

/// [`forward_prediction_iters`] with the window and horizon given in seconds
/// and converted through `f(m)`, counting completed iterations only.
pub fn forward_prediction_time(
    trace: &Trace,
    system: &SystemModel,
    basis: &FeatureBasis,
    window_s: f64,
    horizon_s: f64,
    p_star: f64,
    p_star_gap: f64,
) -> Result<EvalReport, EvalError> {
    let f = system.predict_time(trace.m());
    if !(f > 0.0) || !f.is_finite() {
        return Err(EvalError::InsufficientData(format!("f({}) = {f} from the system model", trace.m())));
    }
    if !(horizon_s > 0.0) || !horizon_s.is_finite() {
        return Err(EvalError::InvalidHorizon(format!("horizon must be positive seconds, got {horizon_s}")));
    }
    if !(window_s > 0.0) || !window_s.is_finite() {
        return Err(EvalError::InvalidWindow(format!("window must be positive seconds, got {window_s}")));
    }
    let mut note = None;
    let mut horizon = completed_iterations(horizon_s, f) as usize;
    if horizon < 1 {
        note = Some(format!("horizon {horizon_s}s is below f(m) = {f}s; evaluated at 1 iteration"));
        horizon = 1;
    }
    let window = completed_iterations(window_s, f) as usize;
    if window < 2 {
        return Err(EvalError::InvalidWindow(format!(
            "window {window_s}s holds {window} iterations at f({}) = {f}s, need at least 2",
            trace.m()
        )));
    }
    let mut report = forward_prediction_iters(trace, basis, window, horizon, p_star, p_star_gap)?;
    report.protocol = format!("forward-time-{horizon_s}s");
    report.notes.insert(0, format!("f(m) = {f}s, window {window} iterations, horizon {horizon} iterations"));
    report.notes.extend(note);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::default_basis;

    fn model() -> ConvergenceModel {
        ConvergenceModel::from_raw(default_basis(), &[("i/m", -0.4)], 2.0).unwrap()
    }

    #[test]
    fn exact_model_scores_zero() {
        let rows: Vec<TrainingRow> =
            (1..20).map(|i| TrainingRow { i: i as f64, m: 2, y: 2.0 - 0.4 * i as f64 / 2.0 }).collect();
        let (row, points) = score_rows("u", &model(), &rows);
        assert!(row.rmse_log < 1e-12);
        assert!((row.r2_log.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(points.len(), 19);
    }

    #[test]
    fn r2_absent_for_flat_actuals() {
        let rows = vec![TrainingRow { i: 1.0, m: 1, y: 0.0 }, TrainingRow { i: 2.0, m: 1, y: 0.0 }];
        let (row, _) = score_rows("u", &model(), &rows);
        assert_eq!(row.r2_log, None);
        assert!(row.rmse_log > 0.0);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![TrainingRow { i: 1.0, m: 2, y: 1.5 }, TrainingRow { i: 3.0, m: 2, y: 1.0 }];
        let (row, points) = score_rows("m=2", &model(), &rows);
        let rep = EvalReport { protocol: "loo-m".into(), rows: vec![row], points, notes: vec![] };
        let s = rep.summary_csv();
        assert!(s.starts_with("protocol,unit,N_points,rmse_log,r2_log,max_abs_err_log\nloo-m,m=2,2,"));
        assert!(s.lines().last().unwrap().starts_with("loo-m,mean,2,"));
        assert!(rep.points_csv().starts_with("unit,i,m,actual_log,predicted_log\nm=2,1,2,1.5,1.8\n"));
    }
}
