//! Convergence and cluster-size modeling for data-parallel convex optimizers.
//!
//! The crate runs bulk-synchronous CoCoA, CoCoA+, mini-batch SGD and full
//! gradient descent on a hinge-loss SVM, records per-iteration traces, and
//! fits two independent models from those traces:
//!
//! - a per-iteration time model `f(m)` over the machine count ([`system_model`]),
//! - a sparse linear model of log sub-optimality `g(i, m)` ([`convergence`]).
//!
//! [`recommender`] composes them as `h(t, m) = g(t / f(m), m)` to pick an
//! (algorithm, machine count) pair for a target sub-optimality or deadline, and
//! [`eval`] runs the leave-one-m-out and forward-prediction protocols.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod data;
pub mod eval;
pub mod kv;
pub mod nnls;
pub mod optim;
pub mod recommender;
pub mod rng;
pub mod system_model;

pub use convergence::{ConvergenceModel, FeatureBasis, TrainingSet};
pub use data::{Dataset, Example, Partitioning};
pub use eval::EvalReport;
pub use optim::{Algorithm, AlgorithmConfig, SvmProblem, TimingMode, Trace, TraceRecord};
pub use recommender::{ModelPair, Recommendation};
pub use system_model::{SystemModel, TimingObservation};
