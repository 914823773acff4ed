//! Cyclic coordinate descent for the Lasso with an unpenalized intercept:
//! `min (1/2N)‖y − Xβ − β₀‖² + reg·‖β‖₁`.

use nalgebra::{DMatrix, DVector, Dyn, SVD};

use super::ConvergenceError;

pub const MAX_SWEEPS: usize = 100_000;
/// KKT tolerance certified on every returned solution.
pub const KKT_TOL: f64 = 1e-7;
/// Internal stopping tolerance on the Gram-maintained gradient.
const SWEEP_TOL: f64 = 1e-9;
/// Relative singular value below which a support direction counts as null.
const NULL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub sweeps: usize,
    pub kkt: f64,
}

/// Centered second moments of a design, shared across a regularization path.
#[derive(Debug, Clone)]
pub struct LassoProblem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    col_means: Vec<f64>,
    y_mean: f64,
    gram: DMatrix<f64>,
    corr: DVector<f64>,
}

impl<'a> LassoProblem<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a [f64]) -> Self {
        let (n, p) = x.shape();
        assert_eq!(n, y.len(), "design rows must match targets");
        let nf = n as f64;
        let col_means: Vec<f64> = (0..p).map(|j| x.column(j).sum() / nf).collect();
        let y_mean = y.iter().sum::<f64>() / nf;
        let mut centered = x.clone();
        for (j, mu) in col_means.iter().enumerate() {
            centered.column_mut(j).add_scalar_mut(-mu);
        }
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let gram = centered.tr_mul(&centered) / nf;
        let corr = centered.tr_mul(&yc) / nf;
        LassoProblem { x, y, col_means, y_mean, gram, corr }
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Smallest `reg` at which every coefficient is zero.
    pub fn reg_max(&self) -> f64 {
        self.corr.iter().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    pub(crate) fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub(crate) fn corr(&self) -> &DVector<f64> {
        &self.corr
    }

    pub fn intercept_for(&self, beta: &[f64]) -> f64 {
        self.y_mean - self.col_means.iter().zip(beta).map(|(m, b)| m * b).sum::<f64>()
    }

    /// Coordinate descent from `warm` (zeros if `None`).
    pub fn solve(&self, reg: f64, warm: Option<&[f64]>) -> Result<LassoFit, ConvergenceError> {
        let p = self.p();
        let mut beta = warm.map_or_else(|| vec![0.0; p], <[f64]>::to_vec);
        let mut grad = self.gradient(&beta);
        let mut sweeps = 0;
        loop {
            if sweeps >= MAX_SWEEPS {
                let kkt = kkt_violation(self.x, self.y, &beta, self.intercept_for(&beta), reg);
                return Err(ConvergenceError::NonConvergence { sweeps, kkt });
            }
            sweeps += 1;
            let mut moved = false;
            for j in 0..p {
                let gjj = self.gram[(j, j)];
                if gjj <= 0.0 {
                    beta[j] = 0.0;
                    continue;
                }
                let rho = grad[j] + gjj * beta[j];
                let next = soft_threshold(rho, reg) / gjj;
                let delta = next - beta[j];
                if delta != 0.0 {
                    moved = true;
                    beta[j] = next;
                    for k in 0..p {
                        grad[k] -= self.gram[(k, j)] * delta;
                    }
                }
            }
            if sweeps % 64 == 0 {
                grad = self.gradient(&beta);
                if let Some((polished, done)) = self.polish(&beta, reg) {
                    beta = polished;
                    grad = self.gradient(&beta);
                    if done {
                        break;
                    }
                }
            }
            if !moved || gram_kkt(&grad, &beta, reg, &self.gram) <= SWEEP_TOL {
                grad = self.gradient(&beta);
                if gram_kkt(&grad, &beta, reg, &self.gram) <= SWEEP_TOL || !moved {
                    break;
                }
            }
        }
        let intercept = self.intercept_for(&beta);
        let kkt = kkt_violation(self.x, self.y, &beta, intercept, reg);
        if kkt > KKT_TOL {
            return Err(ConvergenceError::NonConvergence { sweeps, kkt });
        }
        Ok(LassoFit { beta, intercept, sweeps, kkt })
    }

    /// Warm-started solutions along `regs` (in the given order).
    pub fn path(&self, regs: &[f64]) -> Result<Vec<LassoFit>, ConvergenceError> {
        let mut out: Vec<LassoFit> = Vec::with_capacity(regs.len());
        for &reg in regs {
            let warm = out.last().map(|f| f.beta.as_slice());
            out.push(self.solve(reg, warm)?);
        }
        Ok(out)
    }

    /// Minimizes the objective restricted to the current support and sign
    /// pattern by solving its stationarity conditions directly. If a sign
    /// would flip, stops where the first coefficient reaches zero. The flag
    /// tells whether the result satisfies the full KKT conditions.
    fn polish(&self, beta: &[f64], reg: f64) -> Option<(Vec<f64>, bool)> {
        let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        if support.is_empty() {
            return None;
        }
        let s = support.len();
        let g = DMatrix::from_fn(s, s, |r, c| self.gram[(support[r], support[c])]);
        let rhs = DVector::from_fn(s, |r, _| self.corr[support[r]] - reg * beta[support[r]].signum());
        let svd = g.clone().svd(true, true);
        let sol = svd.solve(&rhs, 1e-14).ok()?;
        if (&g * &sol - &rhs).amax() > SWEEP_TOL {
            return null_step(beta, &support, &svd);
        }
        // step toward the minimizer, stopping where the first coefficient reaches zero
        let mut step = 1.0;
        let mut blocker = None;
        for (k, &j) in support.iter().enumerate() {
            if sol[k] * beta[j] <= 0.0 {
                let t = beta[j] / (beta[j] - sol[k]);
                if t < step {
                    step = t;
                    blocker = Some(j);
                }
            }
        }
        let mut out = vec![0.0; beta.len()];
        for (k, &j) in support.iter().enumerate() {
            out[j] = beta[j] + step * (sol[k] - beta[j]);
        }
        if let Some(j) = blocker {
            out[j] = 0.0;
            return Some((out, false));
        }
        let done = gram_kkt(&self.gradient(&out), &out, reg, &self.gram) <= SWEEP_TOL;
        Some((out, done))
    }

    fn gradient(&self, beta: &[f64]) -> DVector<f64> {
        &self.corr - &self.gram * DVector::from_column_slice(beta)
    }
}

/// With a singular support Gram and no stationary point for the current
/// signs, moves along the part of the sign vector in the null space. The
/// smooth loss is flat in that direction and the L1 norm strictly falls,
/// so we go until the first coefficient reaches zero and drop it.
fn null_step(beta: &[f64], support: &[usize], svd: &SVD<f64, Dyn, Dyn>) -> Option<(Vec<f64>, bool)> {
    let v_t = svd.v_t.as_ref()?;
    let smax = svd.singular_values.max();
    let signs = DVector::from_fn(support.len(), |r, _| beta[support[r]].signum());
    let mut dir = DVector::zeros(support.len());
    for (k, &sv) in svd.singular_values.iter().enumerate() {
        if sv <= NULL_TOL * smax {
            let v = v_t.row(k).transpose();
            dir += &v * v.dot(&signs);
        }
    }
    let mut step = f64::INFINITY;
    let mut blocker = None;
    for (k, &j) in support.iter().enumerate() {
        if dir[k] * beta[j] > 0.0 && beta[j] / dir[k] < step {
            step = beta[j] / dir[k];
            blocker = Some((k, j));
        }
    }
    let (_, drop) = blocker?;
    let mut out = beta.to_vec();
    for (k, &j) in support.iter().enumerate() {
        out[j] -= step * dir[k];
    }
    out[drop] = 0.0;
    Some((out, false))
}

fn gram_kkt(grad: &DVector<f64>, beta: &[f64], reg: f64, gram: &DMatrix<f64>) -> f64 {
    (0..beta.len())
        .filter(|&j| gram[(j, j)] > 0.0)
        .map(|j| coordinate_violation(grad[j], beta[j], reg))
        .fold(0.0, f64::max)
}

fn coordinate_violation(g: f64, b: f64, reg: f64) -> f64 {
    if b > 0.0 {
        (g - reg).abs()
    } else if b < 0.0 {
        (g + reg).abs()
    } else {
        (g.abs() - reg).max(0.0)
    }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// One-shot Lasso solve of `(1/2N)‖y − Xβ − β₀‖² + reg‖β‖₁` from zero.
pub fn lasso_cd(x: &DMatrix<f64>, y: &[f64], reg: f64) -> Result<LassoFit, ConvergenceError> {
    if !(reg >= 0.0) {
        return Err(ConvergenceError::InvalidInput(format!("reg must be >= 0, got {reg}")));
    }
    LassoProblem::new(x, y).solve(reg, None)
}

pub fn lasso_objective(x: &DMatrix<f64>, y: &[f64], beta: &[f64], intercept: f64, reg: f64) -> f64 {
    let r = residual(x, y, beta, intercept);
    r.norm_squared() / (2.0 * y.len() as f64) + reg * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Largest violation of the Lasso optimality conditions computed from the
/// explicit residual `r = y − Xβ − β₀`: `(1/N)Xⱼᵀr = reg·sign(βⱼ)` on the
/// support and `|(1/N)Xⱼᵀr| ≤ reg` off it; also `|mean(r)|` for the intercept.
pub fn kkt_violation(x: &DMatrix<f64>, y: &[f64], beta: &[f64], intercept: f64, reg: f64) -> f64 {
    let n = y.len() as f64;
    let r = residual(x, y, beta, intercept);
    let grad = x.tr_mul(&r) / n;
    let base = (r.sum() / n).abs();
    (0..beta.len()).map(|j| coordinate_violation(grad[j], beta[j], reg)).fold(base, f64::max)
}

fn residual(x: &DMatrix<f64>, y: &[f64], beta: &[f64], intercept: f64) -> DVector<f64> {
    let fitted = x * DVector::from_column_slice(beta);
    DVector::from_iterator(y.len(), y.iter().zip(fitted.iter()).map(|(yi, fi)| yi - fi - intercept))
}

/// `count` values log-spaced from `hi` down to `hi·ratio`.
pub fn log_grid(hi: f64, ratio: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (hi.ln(), (hi * ratio).ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_problem(rng: &mut crate::rng::Rng64, n: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let truth: Vec<f64> = (0..p).map(|j| if j % 2 == 0 { rng.random_range(-2.0..2.0) } else { 0.0 }).collect();
        let y = (0..n)
            .map(|r| (0..p).map(|j| x[(r, j)] * truth[j]).sum::<f64>() + 0.3 * rng.random_range(-1.0..1.0) + 1.5)
            .collect();
        (x, y)
    }

    #[test]
    fn reg_max_zeroes_everything() {
        let mut rng = crate::rng::seeded(1);
        let (x, y) = random_problem(&mut rng, 40, 5);
        let prob = LassoProblem::new(&x, &y);
        let fit = prob.solve(prob.reg_max(), None).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        let ybar = y.iter().sum::<f64>() / 40.0;
        assert!((fit.intercept - ybar).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_columns_soft_threshold() {
        // columns with zero mean and (1/N)‖x‖² = 1, mutually orthogonal
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
        let y = vec![3.0, 1.0, 0.5, -0.5];
        let n = 4.0;
        let reg = 0.4;
        let fit = lasso_cd(&x, &y, reg).unwrap();
        for j in 0..2 {
            let z: f64 = (0..4).map(|r| x[(r, j)] * y[r]).sum::<f64>() / n;
            assert!((fit.beta[j] - soft_threshold(z, reg)).abs() < 1e-12);
        }
    }

    #[test]
    fn kkt_holds_on_random_problems() {
        let mut rng = crate::rng::seeded(2);
        for _ in 0..30 {
            let p = rng.random_range(1..10);
            let (x, y) = random_problem(&mut rng, 30, p);
            let prob = LassoProblem::new(&x, &y);
            let reg = prob.reg_max() * rng.random_range(0.001..1.0);
            let fit = prob.solve(reg, None).unwrap();
            assert!(kkt_violation(&x, &y, &fit.beta, fit.intercept, reg) <= KKT_TOL);
        }
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let mut rng = crate::rng::seeded(3);
        let (x, y) = random_problem(&mut rng, 50, 6);
        let prob = LassoProblem::new(&x, &y);
        let regs = log_grid(prob.reg_max(), 1e-3, 20);
        let path = prob.path(&regs).unwrap();
        let cold = prob.solve(regs[19], None).unwrap();
        let a = lasso_objective(&x, &y, &path[19].beta, path[19].intercept, regs[19]);
        let b = lasso_objective(&x, &y, &cold.beta, cold.intercept, regs[19]);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn collinear_columns_from_three_machine_counts() {
        // m, ln(1+m) and 1/m take three distinct values, so after centering
        // they span two directions and the support Gram can be singular
        let mut x = vec![];
        let mut y = vec![];
        for m in [1.0f64, 2.0, 4.0] {
            for i in 1..=40 {
                let i = i as f64;
                x.extend([i / m, m, (1.0 + m).ln(), 1.0 / m, (1.0 + i).ln()]);
                y.push(-0.08 * i / m - 1.3 * (1.0 + i).ln() + 0.9 * m.sqrt() + 0.01 * (i * 7.0).sin());
            }
        }
        let x = DMatrix::from_row_slice(y.len(), 5, &x);
        let problem = LassoProblem::new(&x, &y);
        let regs = log_grid(problem.reg_max(), 1e-4, 60);
        for fit in problem.path(&regs).unwrap() {
            assert!(fit.kkt <= KKT_TOL, "kkt {}", fit.kkt);
        }
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(10.0, 1e-4, 100);
        assert_eq!(g.len(), 100);
        assert!((g[0] - 10.0).abs() < 1e-12);
        assert!((g[99] - 1e-3).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn negative_reg_rejected() {
        let x = DMatrix::from_element(3, 1, 1.0);
        assert!(lasso_cd(&x, &[1.0, 2.0, 3.0], -1.0).is_err());
    }
}
