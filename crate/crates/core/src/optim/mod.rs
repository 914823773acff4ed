//! Bulk-synchronous CoCoA, CoCoA+, mini-batch SGD and full gradient descent
//! for the L2-regularized hinge-loss SVM.
//!
//! Primal: `P(w) = reg/2 ‖w‖² + 1/n Σ max(0, 1 − yⱼ⟨xⱼ, w⟩)`.
//! Dual (SDCA parameterization): `αⱼyⱼ ∈ [0, 1]`,
//! `w(α) = 1/(reg·n) Σ αⱼxⱼ`, `D(α) = 1/n Σ αⱼyⱼ − reg/2 ‖w(α)‖²`.

mod bsp;
mod objective;
mod reference;
mod runner;
mod sdca;
mod sgd;
pub mod trace;

pub use bsp::{par_map, tree_sum};
pub use objective::{dual_objective, dual_weights, primal_objective, primal_objective_naive};
pub use reference::{reference_optimum, ReferenceOptimum};
pub use runner::{run_bsp, run_bsp_observed, IterState};
pub use sdca::{sdca_local_step, LocalUpdate};
pub use sgd::{full_gradient_step, minibatch_sgd_step};
pub use trace::{Trace, TraceMeta, TraceRecord};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::data::Dataset;
use crate::system_model::SystemModel;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dual variable {index} infeasible: alpha*y = {value}")]
    Infeasible { index: usize, value: f64 },
    #[error("non-finite objective at iteration {iteration}")]
    Diverged { iteration: usize, trace: Box<Trace> },
    #[error("non-finite iterate at step {iteration}")]
    NonFinite { iteration: usize },
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}

/// Regularized hinge-loss SVM over a borrowed dataset.
#[derive(Debug, Clone, Copy)]
pub struct SvmProblem<'a> {
    dataset: &'a Dataset,
    reg: f64,
}

impl<'a> SvmProblem<'a> {
    pub fn new(dataset: &'a Dataset, reg: f64) -> Result<Self, OptimError> {
        if !(reg > 0.0 && reg.is_finite()) {
            return Err(OptimError::InvalidConfig(format!("reg must be a positive finite number, got {reg}")));
        }
        Ok(SvmProblem { dataset, reg })
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn n(&self) -> usize {
        self.dataset.n()
    }

    pub fn d(&self) -> usize {
        self.dataset.d()
    }

    /// `1 / (reg · n)`, the scale between dual variables and weights.
    pub(crate) fn dual_scale(&self) -> f64 {
        1.0 / (self.reg * self.n() as f64)
    }
}

/// Algorithm identity. The declaration order is the tie-break order used by
/// the recommender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Cocoa,
    CocoaPlus,
    MinibatchSgd,
    FullGd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Cocoa, Algorithm::CocoaPlus, Algorithm::MinibatchSgd, Algorithm::FullGd];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Cocoa => "cocoa",
            Algorithm::CocoaPlus => "cocoa_plus",
            Algorithm::MinibatchSgd => "minibatch_sgd",
            Algorithm::FullGd => "full_gd",
        }
    }

    pub fn is_dual(self) -> bool {
        matches!(self, Algorithm::Cocoa | Algorithm::CocoaPlus)
    }

    /// Aggregation weight γ for dual methods.
    pub fn gamma(self, m: usize) -> f64 {
        match self {
            Algorithm::Cocoa => 1.0 / m as f64,
            _ => 1.0,
        }
    }

    /// Local subproblem scaling σ′ for dual methods.
    pub fn sigma_prime(self, m: usize) -> f64 {
        match self {
            Algorithm::CocoaPlus => m as f64,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "cocoa" => Ok(Algorithm::Cocoa),
            "cocoa_plus" | "cocoa+" => Ok(Algorithm::CocoaPlus),
            "minibatch_sgd" | "sgd" => Ok(Algorithm::MinibatchSgd),
            "full_gd" | "gd" => Ok(Algorithm::FullGd),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

/// How per-iteration wall time is stamped into traces.
#[derive(Debug, Clone, PartialEq)]
pub enum TimingMode {
    /// Host wall clock around compute, barrier and aggregation.
    Measured,
    /// `f(m)` from a known system model.
    Synthetic(SystemModel),
}

impl TimingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TimingMode::Measured => "measured",
            TimingMode::Synthetic(_) => "synthetic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    pub m: usize,
    /// Local SDCA steps per outer round; `None` means one local epoch, ⌈n/m⌉.
    pub local_iters: Option<usize>,
    /// Global mini-batch size for SGD, rounded up to a multiple of `m`.
    pub batch_size: usize,
    pub max_iters: usize,
    pub target_suboptimality: f64,
    /// Reference optimum; enables stopping on sub-optimality.
    pub p_star: Option<f64>,
    pub seed: u64,
    pub timing: TimingMode,
}

impl AlgorithmConfig {
    pub fn new(algorithm: Algorithm, m: usize) -> Self {
        AlgorithmConfig {
            algorithm,
            m,
            local_iters: None,
            batch_size: 0,
            max_iters: 500,
            target_suboptimality: 1e-4,
            p_star: None,
            seed: 0,
            timing: TimingMode::Measured,
        }
    }

    pub fn local_iters_for(&self, n: usize) -> usize {
        self.local_iters.unwrap_or_else(|| n.div_ceil(self.m))
    }

    /// Mini-batch size actually used: at least `m`, rounded up to a multiple of `m`.
    pub fn effective_batch(&self) -> usize {
        let b = self.batch_size.max(self.m);
        b.div_ceil(self.m) * self.m
    }

    pub fn validate(&self, n: usize) -> Result<(), OptimError> {
        let bad = |msg: String| Err(OptimError::InvalidConfig(msg));
        if self.m < 1 || self.m > n {
            return bad(format!("m={} must be in [1, n={n}]", self.m));
        }
        if self.local_iters == Some(0) {
            return bad("local_iters must be >= 1".into());
        }
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1".into());
        }
        if !(self.target_suboptimality > 0.0) {
            return bad(format!("target sub-optimality must be positive, got {}", self.target_suboptimality));
        }
        if let Some(p) = self.p_star {
            if !p.is_finite() {
                return bad(format!("p_star must be finite, got {p}"));
            }
        }
        if let TimingMode::Synthetic(model) = &self.timing {
            if !(model.predict_time(self.m) > 0.0) {
                return bad("synthetic timing model predicts non-positive time".into());
            }
        }
        Ok(())
    }
}
