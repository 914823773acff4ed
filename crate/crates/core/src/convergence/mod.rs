//! Convergence model `g(i, m)`: a sparse linear model of `ln(P(i, m) − p*)`
//! over a fixed feature basis.

mod basis;
mod fit;
pub mod lasso;
mod model;
mod training;

use thiserror::Error;

use crate::kv::KvError;

pub use basis::{default_basis, Feature, FeatureBasis, DEFAULT_VERSION, DROP_PRIORITY};
pub use fit::{fit, fit_with, FitMethod, FitOptions, Refit, OLS_RIDGE, RANK_TOL};
pub use lasso::{kkt_violation, lasso_cd, lasso_objective, log_grid, LassoFit, LassoProblem};
pub use model::{ConvergenceModel, Term};
pub use training::{build_training_set, TrainingRow, TrainingSet, MIN_FLOOR};

#[derive(Debug, Error)]
pub enum ConvergenceError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("traces disagree: {0}")]
    Mismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("lasso did not converge after {sweeps} sweeps (KKT residual {kkt:.3e})")]
    NonConvergence { sweeps: usize, kkt: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Kv(#[from] KvError),
}
