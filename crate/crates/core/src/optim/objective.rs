use super::{OptimError, SvmProblem};

/// `P(w) = reg/2 ‖w‖² + 1/n Σ max(0, 1 − y⟨x, w⟩)`.
pub fn primal_objective(problem: &SvmProblem<'_>, w: &[f64]) -> f64 {
    let ds = problem.dataset();
    let hinge: f64 = ds.examples().iter().map(|ex| (1.0 - ex.label() * ex.dot(w)).max(0.0)).sum();
    0.5 * problem.reg() * sq_norm(w) + hinge / ds.n() as f64
}

/// Index-loop evaluation of the primal kept separate from the iterator
/// version; used to cross-check it.
#[allow(clippy::needless_range_loop)]
pub fn primal_objective_naive(problem: &SvmProblem<'_>, w: &[f64]) -> f64 {
    let ds = problem.dataset();
    let mut reg_term = 0.0;
    for k in 0..w.len() {
        reg_term += w[k] * w[k];
    }
    let mut loss = 0.0;
    for j in 0..ds.n() {
        let ex = ds.example(j);
        let mut margin = 0.0;
        for t in 0..ex.nnz() {
            margin += ex.values()[t] * w[ex.indices()[t] as usize];
        }
        let l = 1.0 - ex.label() * margin;
        if l > 0.0 {
            loss += l;
        }
    }
    problem.reg() / 2.0 * reg_term + loss / ds.n() as f64
}

/// `w(α) = 1/(reg·n) Σ αⱼxⱼ`.
pub fn dual_weights(problem: &SvmProblem<'_>, alpha: &[f64]) -> Vec<f64> {
    let scale = problem.dual_scale();
    let mut w = vec![0.0; problem.d()];
    for (ex, &a) in problem.dataset().examples().iter().zip(alpha) {
        if a != 0.0 {
            ex.add_to(&mut w, a * scale);
        }
    }
    w
}

/// Checks the box constraint `αⱼyⱼ ∈ [0, 1]`.
pub fn check_feasible(problem: &SvmProblem<'_>, alpha: &[f64]) -> Result<(), OptimError> {
    if alpha.len() != problem.n() {
        return Err(OptimError::InvalidConfig(format!("alpha has length {}, expected {}", alpha.len(), problem.n())));
    }
    for (index, (ex, &a)) in problem.dataset().examples().iter().zip(alpha).enumerate() {
        let value = a * ex.label();
        if !(0.0..=1.0).contains(&value) {
            return Err(OptimError::Infeasible { index, value });
        }
    }
    Ok(())
}

/// `D(α) = 1/n Σ αⱼyⱼ − reg/2 ‖w(α)‖²`.
pub fn dual_objective(problem: &SvmProblem<'_>, alpha: &[f64]) -> Result<f64, OptimError> {
    check_feasible(problem, alpha)?;
    let w = dual_weights(problem, alpha);
    Ok(dual_objective_with(problem, alpha, &w))
}

pub(crate) fn dual_objective_with(problem: &SvmProblem<'_>, alpha: &[f64], w: &[f64]) -> f64 {
    let linear: f64 = problem.dataset().labels().zip(alpha).map(|(y, a)| a * y).sum();
    linear / problem.n() as f64 - 0.5 * problem.reg() * sq_norm(w)
}

pub(crate) fn sq_norm(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum()
}
