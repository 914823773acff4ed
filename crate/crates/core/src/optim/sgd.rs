use rand::seq::index;

use super::bsp::{par_map, tree_sum, worker_threads};
use super::OptimError;
use super::SvmProblem;
use crate::data::Partitioning;
use crate::rng::Rng64;

/// Σ yⱼxⱼ over the given examples with margin strictly below 1. Examples on
/// the hinge kink contribute nothing.
fn violator_sum(problem: &SvmProblem<'_>, examples: impl Iterator<Item = usize>, w: &[f64]) -> Vec<f64> {
    let ds = problem.dataset();
    let mut acc = vec![0.0; w.len()];
    for j in examples {
        let ex = ds.example(j);
        if ex.label() * ex.dot(w) < 1.0 {
            ex.add_to(&mut acc, ex.label());
        }
    }
    acc
}

/// Pegasos update `w' = (1 − η·reg)·w + η·g` with `η = 1/(reg·t)`, where `g`
/// is the averaged negative hinge subgradient.
fn pegasos_update(problem: &SvmProblem<'_>, w: &[f64], neg_subgrad_sum: &[f64], count: usize, t: usize) -> Vec<f64> {
    let eta = 1.0 / (problem.reg() * t as f64);
    let shrink = 1.0 - eta * problem.reg();
    let inv = 1.0 / count as f64;
    w.iter().zip(neg_subgrad_sum).map(|(&wi, &gi)| shrink * wi + eta * gi * inv).collect()
}

fn check_finite(w: &[f64], t: usize) -> Result<(), OptimError> {
    if w.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(OptimError::NonFinite { iteration: t })
    }
}

/// One BSP mini-batch SGD step.
///
/// Each of the `m` workers draws `b/m` distinct examples from its shard
/// (the whole shard if it is smaller), sums hinge subgradients, and the sums
/// are reduced in shard order. `rngs[k]` is worker `k`'s generator.
pub fn minibatch_sgd_step(
    problem: &SvmProblem<'_>,
    partitioning: &Partitioning,
    w: &[f64],
    b: usize,
    t: usize,
    rngs: &mut [Rng64],
) -> Result<Vec<f64>, OptimError> {
    let m = partitioning.m();
    if t < 1 {
        return Err(OptimError::InvalidConfig("step counter t must be >= 1".into()));
    }
    if rngs.len() != m {
        return Err(OptimError::InvalidConfig(format!("{} generators for {m} workers", rngs.len())));
    }
    let per_worker = b.max(m).div_ceil(m);
    let results = par_map(rngs, worker_threads(m), |k, rng| {
        let shard = partitioning.shard(k);
        let take = per_worker.min(shard.len());
        let picks = index::sample(rng, shard.len(), take);
        (violator_sum(problem, picks.iter().map(|p| shard[p]), w), take)
    });
    let count: usize = results.iter().map(|(_, c)| c).sum();
    let sum = tree_sum(results.into_iter().map(|(v, _)| v).collect(), w.len());
    let next = pegasos_update(problem, w, &sum, count.max(1), t);
    check_finite(&next, t)?;
    Ok(next)
}

/// One BSP full-subgradient step with the Pegasos step rule; every shard
/// contributes all of its examples.
pub fn full_gradient_step(
    problem: &SvmProblem<'_>,
    partitioning: &Partitioning,
    w: &[f64],
    t: usize,
) -> Result<Vec<f64>, OptimError> {
    if t < 1 {
        return Err(OptimError::InvalidConfig("step counter t must be >= 1".into()));
    }
    let mut shards: Vec<&[usize]> = partitioning.shards().iter().map(Vec::as_slice).collect();
    let parts = par_map(&mut shards, worker_threads(partitioning.m()), |_, shard| {
        violator_sum(problem, shard.iter().copied(), w)
    });
    let sum = tree_sum(parts, w.len());
    let next = pegasos_update(problem, w, &sum, problem.n(), t);
    check_finite(&next, t)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_libsvm, partition, synth_classification, SynthParams};
    use crate::rng;

    fn rngs(seed: u64, m: usize) -> Vec<Rng64> {
        (0..m).map(|k| rng::stream(seed, k as u64 + 1)).collect()
    }

    #[test]
    fn zero_subgradient_is_pure_shrink() {
        let ds = parse_libsvm("+1 1:10\n-1 1:-10\n".as_bytes()).unwrap();
        let p = SvmProblem::new(&ds, 0.5).unwrap();
        let part = partition(&ds, 1, 0).unwrap();
        let w = [1.0];
        let next = minibatch_sgd_step(&p, &part, &w, 2, 3, &mut rngs(0, 1)).unwrap();
        let eta = 1.0 / (0.5 * 3.0);
        assert_eq!(next, vec![(1.0 - eta * 0.5) * 1.0]);
    }

    #[test]
    fn full_batch_matches_direct_full_subgradient() {
        let ds = synth_classification(&SynthParams { n: 40, d: 6, margin: 0.0, noise_frac: 0.1, seed: 12 }).unwrap();
        let p = SvmProblem::new(&ds, 0.1).unwrap();
        let part = partition(&ds, 1, 3).unwrap();
        let w: Vec<f64> = (0..6).map(|k| 0.1 * k as f64 - 0.2).collect();
        let t = 4;
        let next = minibatch_sgd_step(&p, &part, &w, 40, t, &mut rngs(1, 1)).unwrap();

        // direct evaluation: w' = (1 − 1/t)w + (1/(reg·t)) · (1/n) Σ_{yx·w<1} y x
        let eta = 1.0 / (0.1 * t as f64);
        let mut expect: Vec<f64> = w.iter().map(|v| (1.0 - eta * 0.1) * v).collect();
        for ex in ds.examples() {
            let margin: f64 = ex.features().map(|(i, v)| v * w[i]).sum();
            if ex.label() * margin < 1.0 {
                for (i, v) in ex.features() {
                    expect[i] += eta * ex.label() * v / 40.0;
                }
            }
        }
        for (a, b) in next.iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
        let via_gd = full_gradient_step(&p, &part, &w, t).unwrap();
        for (a, b) in next.iter().zip(&via_gd) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn first_step_forgets_initial_point() {
        let ds = synth_classification(&SynthParams { n: 20, d: 3, margin: 0.0, noise_frac: 0.0, seed: 2 }).unwrap();
        let p = SvmProblem::new(&ds, 0.2).unwrap();
        let part = partition(&ds, 2, 0).unwrap();
        let a = full_gradient_step(&p, &part, &[0.0; 3], 1).unwrap();
        // every example violates at w = 0, so w' = (1/reg)·(1/n) Σ y x
        let mut expect = vec![0.0; 3];
        for ex in ds.examples() {
            ex.add_to(&mut expect, ex.label() / (0.2 * 20.0));
        }
        for (x, y) in a.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_step_zero() {
        let ds = parse_libsvm("+1 1:1\n".as_bytes()).unwrap();
        let p = SvmProblem::new(&ds, 1.0).unwrap();
        let part = partition(&ds, 1, 0).unwrap();
        assert!(minibatch_sgd_step(&p, &part, &[0.0], 1, 0, &mut rngs(0, 1)).is_err());
    }
}
