use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::lasso::{log_grid, LassoProblem};
use super::{ConvergenceError, ConvergenceModel, FeatureBasis, TrainingSet, DROP_PRIORITY};

/// Ridge added to the normal equations of every least-squares solve, on the
/// standardized scale.
pub const OLS_RIDGE: f64 = 1e-10;
/// Smallest admissible ratio of extreme eigenvalues of the standardized
/// Gram matrix before the OLS fallback drops features.
pub const RANK_TOL: f64 = 1e-11;
/// Relative spread below which a column is treated as constant.
const CONSTANT_TOL: f64 = 1e-12;
/// Two CV errors closer than this (relative to `var(y)`) are a tie.
const CV_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    LassoCv,
    Ols,
    /// Built directly from coefficients.
    Given,
}

impl FitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMethod::LassoCv => "lasso_cv",
            FitMethod::Ols => "ols",
            FitMethod::Given => "given",
        }
    }
}

impl FromStr for FitMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lasso_cv" => Ok(FitMethod::LassoCv),
            "ols" => Ok(FitMethod::Ols),
            "given" => Ok(FitMethod::Given),
            other => Err(format!("unknown fit method {other:?}")),
        }
    }
}

/// Estimator applied at each point of the Lasso path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refit {
    /// Least squares restricted to the Lasso support.
    Support,
    /// The Lasso coefficients themselves.
    Lasso,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub folds: usize,
    pub path_len: usize,
    /// `reg_min / reg_max`.
    pub path_ratio: f64,
    pub refit: Refit,
    /// `None` picks OLS when there are fewer than three rows per feature.
    pub method: Option<FitMethod>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { folds: 5, path_len: 100, path_ratio: 1e-4, refit: Refit::Support, method: None }
    }
}

pub fn fit(training: &TrainingSet, basis: &FeatureBasis, folds: usize) -> Result<ConvergenceModel, ConvergenceError> {
    fit_with(training, basis, &FitOptions { folds, ..FitOptions::default() })
}

pub fn fit_with(
    training: &TrainingSet,
    basis: &FeatureBasis,
    opts: &FitOptions,
) -> Result<ConvergenceModel, ConvergenceError> {
    if training.is_empty() {
        return Err(ConvergenceError::InsufficientData("empty training set".into()));
    }
    if opts.folds < 2 {
        return Err(ConvergenceError::InvalidInput(format!("folds must be >= 2, got {}", opts.folds)));
    }
    if opts.path_len == 0 || !(opts.path_ratio > 0.0 && opts.path_ratio < 1.0) {
        return Err(ConvergenceError::InvalidInput("path needs a positive length and a ratio in (0, 1)".into()));
    }
    if let Some(r) = training.rows.iter().find(|r| !r.y.is_finite() || !(r.i >= 1.0) || r.m == 0) {
        return Err(ConvergenceError::InvalidInput(format!("bad training row {r:?}")));
    }
    let raw = DMatrix::from_fn(training.len(), basis.len(), |r, j| {
        let row = &training.rows[r];
        basis.features()[j].eval(row.i, row.m as f64)
    });
    let y: Vec<f64> = training.rows.iter().map(|r| r.y).collect();
    let names = basis.names();
    let method = opts.method.unwrap_or(if training.len() < 3 * basis.len() { FitMethod::Ols } else { FitMethod::LassoCv });
    let groups: Vec<usize> = training.rows.iter().map(|r| r.m).collect();
    let df = fit_design(&raw, &y, &names, &groups, method, opts)?;

    let terms: Vec<_> =
        df.active.iter().enumerate().map(|(k, &j)| (names[j], df.coefs[k], df.means[k], df.scales[k])).collect();
    let mut model = ConvergenceModel::from_terms(basis.clone(), &terms, df.intercept)?;
    model.method = df.method;
    model.chosen_reg = df.chosen_reg;
    model.warnings = df.warnings;
    model.p_star = training.p_star;
    model.p_star_gap = training.p_star_gap;
    model.algorithm = training.algorithm.clone();
    model.dataset_hash = training.dataset_hash.clone();
    if training.dropped > 0 {
        model.warnings.push(format!("{} records at or below the floor were dropped", training.dropped));
    }
    model.check_monotone(training);
    Ok(model)
}

/// A fit on an arbitrary raw design, in standardized coordinates.
#[derive(Debug, Clone)]
pub(crate) struct DesignFit {
    /// Indices of the raw columns kept.
    pub active: Vec<usize>,
    pub coefs: Vec<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub intercept: f64,
    pub chosen_reg: f64,
    pub method: FitMethod,
    pub warnings: Vec<String>,
}

impl DesignFit {
    #[cfg(test)]
    pub fn predict_row(&self, raw_row: &[f64]) -> f64 {
        self.active.iter().enumerate().fold(self.intercept, |acc, (k, &j)| {
            acc + self.coefs[k] * (raw_row[j] - self.means[k]) / self.scales[k]
        })
    }
}

/// Population mean and standard deviation of column `j` over `rows`.
fn column_stats(raw: &DMatrix<f64>, rows: &[usize], j: usize) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&r| raw[(r, j)]).sum::<f64>() / n;
    let var = rows.iter().map(|&r| (raw[(r, j)] - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn is_constant(mean: f64, sd: f64) -> bool {
    sd <= CONSTANT_TOL * mean.abs().max(f64::MIN_POSITIVE)
}

/// Standardizes the given rows and columns. Columns constant over `rows` are
/// zeroed so that the solvers leave their coefficients at zero.
fn standardize(raw: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let mut means = Vec::with_capacity(cols.len());
    let mut scales = Vec::with_capacity(cols.len());
    for &j in cols {
        let (mu, sd) = column_stats(raw, rows, j);
        if is_constant(mu, sd) {
            means.push(mu);
            scales.push(0.0);
        } else {
            means.push(mu);
            scales.push(sd);
        }
    }
    let z = DMatrix::from_fn(rows.len(), cols.len(), |r, k| {
        if scales[k] == 0.0 {
            0.0
        } else {
            (raw[(rows[r], cols[k])] - means[k]) / scales[k]
        }
    });
    (z, means, scales)
}

pub(crate) fn fit_design(
    raw: &DMatrix<f64>,
    y: &[f64],
    names: &[&str],
    groups: &[usize],
    method: FitMethod,
    opts: &FitOptions,
) -> Result<DesignFit, ConvergenceError> {
    let all_rows: Vec<usize> = (0..raw.nrows()).collect();
    let mut warnings = Vec::new();
    let mut active = Vec::new();
    for (j, name) in names.iter().enumerate().take(raw.ncols()) {
        let (mu, sd) = column_stats(raw, &all_rows, j);
        if is_constant(mu, sd) {
            warnings.push(format!("dropped zero-variance feature {name}"));
        } else {
            active.push(j);
        }
    }
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;

    match method {
        FitMethod::Ols | FitMethod::Given => {
            let before = active.clone();
            let active = reduce_rank(raw, &all_rows, active, names);
            for j in before.iter().filter(|j| !active.contains(j)) {
                warnings.push(format!("reduced basis: dropped {} for rank", names[*j]));
            }
            let (z, means, scales) = standardize(raw, &all_rows, &active);
            let prob = LassoProblem::new(&z, y);
            let all: Vec<usize> = (0..active.len()).collect();
            let coefs = least_squares_on(&prob, &all);
            let intercept = prob.intercept_for(&coefs);
            Ok(DesignFit { active, coefs, means, scales, intercept, chosen_reg: 0.0, method: FitMethod::Ols, warnings })
        }
        FitMethod::LassoCv => {
            let (z, means, scales) = standardize(raw, &all_rows, &active);
            let prob = LassoProblem::new(&z, y);
            let reg_max = prob.reg_max();
            if active.is_empty() || reg_max == 0.0 {
                let coefs = vec![0.0; active.len()];
                return Ok(DesignFit {
                    active,
                    coefs,
                    means,
                    scales,
                    intercept: y_mean,
                    chosen_reg: reg_max,
                    method: FitMethod::LassoCv,
                    warnings,
                });
            }
            let regs = log_grid(reg_max, opts.path_ratio, opts.path_len);
            let folds = assign_folds(groups, opts.folds);
            let cv = cv_errors(raw, y, &active, &folds, opts.folds, &regs, opts.refit)?;
            let var_y = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / y.len() as f64;
            let best = cv.iter().copied().fold(f64::INFINITY, f64::min);
            let tol = CV_TIE_TOL * var_y.max(f64::MIN_POSITIVE);
            // regs descend, so the first near-minimal entry is the largest reg
            let chosen = cv.iter().position(|&e| e <= best + tol).expect("cv curve is nonempty");
            let path = prob.path(&regs[..=chosen])?;
            let lasso_beta = &path[chosen].beta;
            let coefs = match opts.refit {
                Refit::Lasso => lasso_beta.clone(),
                Refit::Support => {
                    let support: Vec<usize> = (0..active.len()).filter(|&k| lasso_beta[k] != 0.0).collect();
                    least_squares_on(&prob, &support)
                }
            };
            let intercept = prob.intercept_for(&coefs);
            Ok(DesignFit {
                active,
                coefs,
                means,
                scales,
                intercept,
                chosen_reg: regs[chosen],
                method: FitMethod::LassoCv,
                warnings,
            })
        }
    }
}

/// Fold of each row: by rank of its group when there are at least `folds`
/// distinct groups, otherwise contiguous row blocks.
pub(crate) fn assign_folds(groups: &[usize], folds: usize) -> Vec<usize> {
    let mut distinct = groups.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() >= folds {
        groups.iter().map(|g| distinct.binary_search(g).expect("group present") % folds).collect()
    } else {
        let n = groups.len();
        (0..n).map(|r| r * folds / n).collect()
    }
}

/// Mean over folds of the held-out squared error at each reg.
fn cv_errors(
    raw: &DMatrix<f64>,
    y: &[f64],
    active: &[usize],
    folds: &[usize],
    k: usize,
    regs: &[f64],
    refit: Refit,
) -> Result<Vec<f64>, ConvergenceError> {
    let mut total = vec![0.0; regs.len()];
    let mut used = 0usize;
    for f in 0..k {
        let train: Vec<usize> = (0..y.len()).filter(|&r| folds[r] != f).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&r| folds[r] == f).collect();
        if train.is_empty() || test.is_empty() {
            continue;
        }
        used += 1;
        let (z, means, scales) = standardize(raw, &train, active);
        let y_train: Vec<f64> = train.iter().map(|&r| y[r]).collect();
        let prob = LassoProblem::new(&z, &y_train);
        let path = prob.path(regs)?;
        let z_test = DMatrix::from_fn(test.len(), active.len(), |r, c| {
            if scales[c] == 0.0 {
                0.0
            } else {
                (raw[(test[r], active[c])] - means[c]) / scales[c]
            }
        });
        for (idx, sol) in path.iter().enumerate() {
            let beta = match refit {
                Refit::Lasso => sol.beta.clone(),
                Refit::Support => {
                    let support: Vec<usize> = (0..active.len()).filter(|&c| sol.beta[c] != 0.0).collect();
                    least_squares_on(&prob, &support)
                }
            };
            let b0 = prob.intercept_for(&beta);
            let pred = &z_test * DVector::from_column_slice(&beta);
            let mse = test.iter().enumerate().map(|(r, &row)| (y[row] - pred[r] - b0).powi(2)).sum::<f64>()
                / test.len() as f64;
            total[idx] += mse;
        }
    }
    if used == 0 {
        return Err(ConvergenceError::InsufficientData("no usable cross-validation fold".into()));
    }
    Ok(total.into_iter().map(|t| t / used as f64).collect())
}

/// Ridge-stabilized least squares on the centered columns in `support`.
/// Coefficients outside the support are zero.
fn least_squares_on(prob: &LassoProblem<'_>, support: &[usize]) -> Vec<f64> {
    let mut beta = vec![0.0; prob.p()];
    if support.is_empty() {
        return beta;
    }
    let s = support.len();
    let gram = prob.gram();
    let corr = prob.corr();
    let a = DMatrix::from_fn(s, s, |r, c| gram[(support[r], support[c])] + if r == c { OLS_RIDGE } else { 0.0 });
    let b = DVector::from_fn(s, |r, _| corr[support[r]]);
    let sol = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => a.svd(true, true).solve(&b, 0.0).expect("svd was computed with both factors"),
    };
    for (k, &j) in support.iter().enumerate() {
        beta[j] = sol[k];
    }
    beta
}

/// Drops columns in [`DROP_PRIORITY`] order until the standardized Gram
/// matrix is well conditioned.
fn reduce_rank(raw: &DMatrix<f64>, rows: &[usize], mut active: Vec<usize>, names: &[&str]) -> Vec<usize> {
    let mut priority = DROP_PRIORITY.iter().filter_map(|p| names.iter().position(|n| n == p));
    loop {
        if active.is_empty() {
            return active;
        }
        let ok = active.len() < rows.len() && {
            let (z, _, _) = standardize(raw, rows, &active);
            let eig = (z.tr_mul(&z) / rows.len() as f64).symmetric_eigenvalues();
            eig.min() > RANK_TOL * eig.max()
        };
        if ok || !try_drop(&mut active, &mut priority) {
            return active;
        }
    }
}

fn try_drop(active: &mut Vec<usize>, priority: &mut impl Iterator<Item = usize>) -> bool {
    for j in priority.by_ref() {
        if let Some(pos) = active.iter().position(|&a| a == j) {
            active.remove(pos);
            return true;
        }
    }
    false
}
