//! Lawson–Hanson active-set solver for `min ‖Ax − b‖²` subject to `x ≥ 0`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    /// Outer active-set iterations performed.
    pub iterations: usize,
    /// Numerical rank of `A` is below its column count.
    pub rank_deficient: bool,
}

/// Solves the NNLS problem.
///
/// Columns are scaled to unit norm before the active-set iterations and the
/// solution is mapped back. Least-squares subproblems on the passive set are
/// solved by SVD, which gives the minimum-norm solution on that set when the
/// passive columns are dependent. All-zero columns stay at zero.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> NnlsSolution {
    let (rows, cols) = a.shape();
    assert_eq!(rows, b.len(), "row count of A must match b");
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut scaled = a.clone();
    for (j, &nrm) in norms.iter().enumerate() {
        if nrm > 0.0 {
            scaled.column_mut(j).unscale_mut(nrm);
        }
    }
    let rank_deficient = numerical_rank(&scaled) < cols;

    let tol = 10.0 * f64::EPSILON * (rows.max(cols) as f64) * scaled.norm().max(1.0) * b.norm().max(1.0);
    let mut x = DVector::<f64>::zeros(cols);
    let mut passive = vec![false; cols];
    let mut iterations = 0;
    let max_outer = 3 * cols + 10;

    while iterations < max_outer {
        let grad = scaled.tr_mul(&(b - &scaled * &x));
        let candidate = (0..cols)
            .filter(|&j| !passive[j] && norms[j] > 0.0 && grad[j] > tol)
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(enter) = candidate else { break };
        iterations += 1;
        passive[enter] = true;

        for _ in 0..(3 * cols + 10) {
            let z = passive_lstsq(&scaled, b, &passive);
            if (0..cols).filter(|&j| passive[j]).all(|j| z[j] > 0.0) {
                x = z;
                break;
            }
            // step from x toward z until the first passive coordinate hits 0
            let mut step = 1.0;
            let mut blocker = None;
            for j in (0..cols).filter(|&j| passive[j] && z[j] <= 0.0) {
                let denom = x[j] - z[j];
                let s = if denom > 0.0 { x[j] / denom } else { 0.0 };
                if s < step || blocker.is_none() {
                    step = s.min(step);
                    blocker = Some(j);
                }
            }
            x += (&z - &x) * step;
            if let Some(j) = blocker {
                x[j] = 0.0;
                passive[j] = false;
            }
            for j in 0..cols {
                if passive[j] && x[j] <= 0.0 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }

    for (j, &nrm) in norms.iter().enumerate() {
        x[j] = if nrm > 0.0 { x[j].max(0.0) / nrm } else { 0.0 };
    }
    NnlsSolution { x, iterations, rank_deficient }
}

fn passive_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let mut z = DVector::zeros(passive.len());
    if idx.is_empty() {
        return z;
    }
    let sub = a.select_columns(&idx);
    let svd = sub.svd(true, true);
    let eps = svd_tolerance(&svd.singular_values, a.nrows().max(idx.len()));
    let sol = svd.solve(b, eps).expect("SVD computed with U and V");
    for (k, &j) in idx.iter().enumerate() {
        z[j] = sol[k];
    }
    z
}

fn svd_tolerance(singular: &DVector<f64>, dim: usize) -> f64 {
    singular.max() * dim as f64 * f64::EPSILON * 16.0
}

fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let sv = a.singular_values();
    let eps = svd_tolerance(&sv, a.nrows().max(a.ncols()));
    sv.iter().filter(|&&s| s > eps).count()
}

/// Largest KKT violation of `x` for the problem `min ½‖Ax − b‖², x ≥ 0`:
/// `|∇ₖ|` where `xₖ > 0`, and `max(0, −∇ₖ)` where `xₖ = 0`.
pub fn kkt_violation(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let grad = a.tr_mul(&(a * x - b));
    (0..x.len())
        .map(|k| if x[k] > 0.0 { grad[k].abs() } else { (-grad[k]).max(0.0) })
        .fold(0.0, f64::max)
}
