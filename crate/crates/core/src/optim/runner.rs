use std::time::Instant;

use super::bsp::{par_map, tree_sum, worker_threads};
use super::objective::{check_feasible, dual_objective_with, primal_objective};
use super::sdca::sdca_local_step;
use super::sgd::{full_gradient_step, minibatch_sgd_step};
use super::trace::{Trace, TraceMeta, TraceRecord};
use super::{Algorithm, AlgorithmConfig, OptimError, SvmProblem, TimingMode};
use crate::data::{partition, Partitioning};
use crate::rng::{self, Rng64};

/// Snapshot handed to observers after every recorded iteration.
#[derive(Debug)]
pub struct IterState<'s> {
    pub iteration: usize,
    pub w: &'s [f64],
    /// Dual iterate for CoCoA / CoCoA+.
    pub alpha: Option<&'s [f64]>,
    pub primal: f64,
    pub dual: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum StopRule {
    /// `P − p* ≤ eps`.
    Suboptimality { p_star: f64, eps: f64 },
    /// Duality gap `≤ eps`.
    Gap(f64),
    Never,
}

impl StopRule {
    fn reached(self, primal: f64, gap: Option<f64>) -> bool {
        match self {
            StopRule::Suboptimality { p_star, eps } => primal - p_star <= eps,
            StopRule::Gap(eps) => gap.is_some_and(|g| g <= eps),
            StopRule::Never => false,
        }
    }

    fn for_config(config: &AlgorithmConfig) -> Self {
        match config.p_star {
            Some(p_star) => StopRule::Suboptimality { p_star, eps: config.target_suboptimality },
            None if config.algorithm.is_dual() => StopRule::Gap(config.target_suboptimality),
            None => StopRule::Never,
        }
    }
}

/// Runs the configured algorithm and returns its trace.
///
/// Record 0 is the initial point `w = 0, α = 0`. The run stops once the
/// sub-optimality reaches the target (when `p_star` is given), otherwise once
/// the duality gap does for dual methods, or after `max_iters` rounds.
pub fn run_bsp(problem: &SvmProblem<'_>, config: &AlgorithmConfig) -> Result<Trace, OptimError> {
    run_bsp_observed(problem, config, |_| {})
}

/// [`run_bsp`] with a callback invoked on every recorded iterate.
pub fn run_bsp_observed(
    problem: &SvmProblem<'_>,
    config: &AlgorithmConfig,
    observer: impl FnMut(&IterState<'_>),
) -> Result<Trace, OptimError> {
    run_with_stop(problem, config, StopRule::for_config(config), config.max_iters, observer)
}

struct DualWorker<'p> {
    shard: &'p [usize],
    rng: Rng64,
}

pub(crate) fn run_with_stop(
    problem: &SvmProblem<'_>,
    config: &AlgorithmConfig,
    stop: StopRule,
    max_iters: usize,
    mut observer: impl FnMut(&IterState<'_>),
) -> Result<Trace, OptimError> {
    config.validate(problem.n())?;
    let ds = problem.dataset();
    let (n, d, m) = (problem.n(), problem.d(), config.m);
    let alg = config.algorithm;
    let parts = partition(ds, m, config.seed)?;
    let threads = worker_threads(m);
    let local_iters = config.local_iters_for(n);
    let mut trace = Trace { meta: base_meta(problem, config, local_iters), records: Vec::new() };

    let mut w = vec![0.0; d];
    let mut alpha = vec![0.0; if alg.is_dual() { n } else { 0 }];
    let mut rngs: Vec<Rng64> = (0..m).map(|k| rng::stream(config.seed, k as u64 + 1)).collect();
    let mut cumulative = 0.0;

    for t in 0..=max_iters {
        let mut elapsed = 0.0;
        if t > 0 {
            let started = Instant::now();
            match alg {
                Algorithm::Cocoa | Algorithm::CocoaPlus => {
                    dual_round(problem, &parts, alg, local_iters, threads, &mut rngs, &mut alpha, &mut w)
                }
                Algorithm::MinibatchSgd => {
                    w = step_or_diverge(minibatch_sgd_step(problem, &parts, &w, config.effective_batch(), t, &mut rngs), &mut trace, t)?;
                }
                Algorithm::FullGd => {
                    w = step_or_diverge(full_gradient_step(problem, &parts, &w, t), &mut trace, t)?;
                }
            }
            elapsed = match &config.timing {
                TimingMode::Measured => started.elapsed().as_secs_f64(),
                TimingMode::Synthetic(model) => model.predict_time(m),
            };
            cumulative += elapsed;
        }

        let primal = primal_objective(problem, &w);
        let dual = alg.is_dual().then(|| dual_objective_with(problem, &alpha, &w));
        let gap = dual.map(|dv| primal - dv);
        if !primal.is_finite() || gap.is_some_and(|g| !g.is_finite()) {
            trace.meta.diverged = true;
            trace.meta.stop_reason = "diverged".into();
            return Err(OptimError::Diverged { iteration: t, trace: Box::new(trace) });
        }
        trace.records.push(TraceRecord {
            algorithm: alg,
            m,
            iteration: t,
            primal,
            duality_gap: gap,
            iter_wall_time: elapsed,
            cumulative_time: cumulative,
        });
        observer(&IterState {
            iteration: t,
            w: &w,
            alpha: alg.is_dual().then_some(alpha.as_slice()),
            primal,
            dual,
        });
        if stop.reached(primal, gap) {
            trace.meta.stop_reason = "target".into();
            return Ok(trace);
        }
    }
    trace.meta.stop_reason = "max_iters".into();
    Ok(trace)
}

fn step_or_diverge(step: Result<Vec<f64>, OptimError>, trace: &mut Trace, t: usize) -> Result<Vec<f64>, OptimError> {
    match step {
        Err(OptimError::NonFinite { .. }) => {
            trace.meta.diverged = true;
            trace.meta.stop_reason = "diverged".into();
            Err(OptimError::Diverged { iteration: t, trace: Box::new(trace.clone()) })
        }
        other => other,
    }
}

/// One CoCoA / CoCoA+ round: local SDCA on every shard against the broadcast
/// `w`, then `α ← α + γΔα` and `w ← w(α)` reduced over shards in tree order.
#[allow(clippy::too_many_arguments)]
fn dual_round(
    problem: &SvmProblem<'_>,
    parts: &Partitioning,
    alg: Algorithm,
    local_iters: usize,
    threads: usize,
    rngs: &mut [Rng64],
    alpha: &mut [f64],
    w: &mut Vec<f64>,
) {
    let m = parts.m();
    let gamma = alg.gamma(m);
    let sigma_prime = alg.sigma_prime(m);
    let ds = problem.dataset();
    let scale = problem.dual_scale();

    let mut workers: Vec<DualWorker<'_>> = parts
        .shards()
        .iter()
        .zip(rngs.iter())
        .map(|(shard, rng)| DualWorker { shard: shard.as_slice(), rng: rng.clone() })
        .collect();
    let snapshot: &[f64] = w;
    let alpha_read: &[f64] = alpha;
    let updates = par_map(&mut workers, threads, |_, worker| {
        let local_alpha: Vec<f64> = worker.shard.iter().map(|&j| alpha_read[j]).collect();
        sdca_local_step(problem, worker.shard, &local_alpha, snapshot, sigma_prime, local_iters, &mut worker.rng)
    });
    for (slot, worker) in rngs.iter_mut().zip(workers) {
        *slot = worker.rng;
    }

    let mut contributions = Vec::with_capacity(m);
    for (shard, update) in parts.shards().iter().zip(&updates) {
        let mut part = vec![0.0; w.len()];
        for (&j, &delta) in shard.iter().zip(&update.delta_alpha) {
            let y = ds.example(j).label();
            let a = if gamma == 1.0 { alpha[j] + delta } else { alpha[j] + gamma * delta };
            alpha[j] = y * (y * a).clamp(0.0, 1.0);
            if alpha[j] != 0.0 {
                ds.example(j).add_to(&mut part, alpha[j] * scale);
            }
        }
        contributions.push(part);
    }
    *w = tree_sum(contributions, w.len());
    debug_assert!(check_feasible(problem, alpha).is_ok());
}

fn base_meta(problem: &SvmProblem<'_>, config: &AlgorithmConfig, local_iters: usize) -> TraceMeta {
    let alg = config.algorithm;
    TraceMeta {
        dataset_hash: problem.dataset().content_hash(),
        dataset_path: None,
        n: problem.n(),
        d: problem.d(),
        reg: problem.reg(),
        algorithm: alg,
        m: config.m,
        local_iters: if alg.is_dual() { local_iters } else { 0 },
        gamma: alg.gamma(config.m),
        sigma_prime: alg.sigma_prime(config.m),
        batch_size: if alg == Algorithm::MinibatchSgd { config.effective_batch() } else { 0 },
        max_iters: config.max_iters,
        epsilon: config.target_suboptimality,
        seed: config.seed,
        timing_mode: config.timing.as_str().to_string(),
        p_star: config.p_star,
        p_star_gap: None,
        diverged: false,
        stop_reason: String::new(),
        extra: Vec::new(),
    }
}
