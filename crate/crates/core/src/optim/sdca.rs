use rand::Rng;

use super::SvmProblem;
use crate::rng::Rng64;

/// Result of one worker's local round.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    /// Change to each dual variable, aligned with the shard's index list.
    pub delta_alpha: Vec<f64>,
    /// `1/(reg·n) Σ Δαⱼxⱼ`, the shard's contribution to the weight change.
    pub delta_w: Vec<f64>,
}

/// `h` randomized closed-form hinge SDCA steps on one shard.
///
/// Coordinates are drawn uniformly with replacement from the shard. Each step
/// maximizes the local subproblem in one coordinate against
/// `w_shared + sigma_prime · (accumulated local weight change)`; with
/// `sigma_prime = 1` and a single shard this is plain SDCA.
///
/// `alpha_shard[k]` is the current dual value of example `shard[k]`.
pub fn sdca_local_step(
    problem: &SvmProblem<'_>,
    shard: &[usize],
    alpha_shard: &[f64],
    w_shared: &[f64],
    sigma_prime: f64,
    h: usize,
    rng: &mut Rng64,
) -> LocalUpdate {
    debug_assert_eq!(shard.len(), alpha_shard.len());
    let ds = problem.dataset();
    let scale = problem.dual_scale();
    let mut w_eff = w_shared.to_vec();
    let mut delta_w = vec![0.0; w_shared.len()];
    // local dual values in label space, a = α·y ∈ [0, 1]
    let mut local: Vec<f64> = shard.iter().zip(alpha_shard).map(|(&j, &a)| a * ds.example(j).label()).collect();
    let start = local.clone();
    if shard.is_empty() {
        return LocalUpdate { delta_alpha: Vec::new(), delta_w };
    }

    for _ in 0..h {
        let k = rng.random_range(0..shard.len());
        let ex = ds.example(shard[k]);
        let y = ex.label();
        let q = sigma_prime * ex.sq_norm() * scale;
        let current = local[k];
        let target = if q > 0.0 {
            let grad = 1.0 - y * ex.dot(&w_eff);
            (current + grad / q).clamp(0.0, 1.0)
        } else {
            1.0
        };
        if target == current {
            continue;
        }
        local[k] = target;
        let step = y * (target - current) * scale;
        ex.add_to(&mut delta_w, step);
        ex.add_to(&mut w_eff, sigma_prime * step);
    }

    let delta_alpha = shard
        .iter()
        .zip(local.iter().zip(&start))
        .map(|(&j, (&now, &before))| ds.example(j).label() * (now - before))
        .collect();
    LocalUpdate { delta_alpha, delta_w }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_libsvm, synth_classification, SynthParams};
    use crate::optim::objective::{dual_objective, dual_weights, primal_objective};

    #[test]
    fn one_step_solves_single_example() {
        // P(w) = w²/2 + max(0, 1 − w): closed-form dual step gives α = 1, w = 1.
        let ds = parse_libsvm("+1 1:1".as_bytes()).unwrap();
        let p = SvmProblem::new(&ds, 1.0).unwrap();
        let up = sdca_local_step(&p, &[0], &[0.0], &[0.0], 1.0, 1, &mut crate::rng::seeded(0));
        assert_eq!(up.delta_alpha, vec![1.0]);
        assert_eq!(up.delta_w, vec![1.0]);
        assert_eq!(primal_objective(&p, &up.delta_w), 0.5);
    }

    #[test]
    fn optimal_coordinates_do_not_move() {
        // example 0 has margin 2 at w (α = 0 is optimal); example 1 has margin
        // < 1 and α·y = 1 already at the upper bound.
        let ds = parse_libsvm("+1 1:2\n-1 2:1\n".as_bytes()).unwrap();
        let p = SvmProblem::new(&ds, 1.0).unwrap();
        let w = [1.0, 0.0];
        let up = sdca_local_step(&p, &[0, 1], &[0.0, -1.0], &w, 1.0, 50, &mut crate::rng::seeded(1));
        assert_eq!(up.delta_alpha, vec![0.0, 0.0]);
        assert_eq!(up.delta_w, vec![0.0, 0.0]);
    }

    #[test]
    fn local_rounds_keep_feasibility_and_raise_dual() {
        let ds = synth_classification(&SynthParams { n: 60, d: 5, margin: 0.0, noise_frac: 0.2, seed: 2 }).unwrap();
        let p = SvmProblem::new(&ds, 0.05).unwrap();
        let shard: Vec<usize> = (0..60).collect();
        let mut alpha = vec![0.0; 60];
        let mut rng = crate::rng::seeded(5);
        let mut prev = dual_objective(&p, &alpha).unwrap();
        for _ in 0..1000 {
            let w = dual_weights(&p, &alpha);
            let up = sdca_local_step(&p, &shard, &alpha, &w, 1.0, 1, &mut rng);
            for (a, d) in alpha.iter_mut().zip(&up.delta_alpha) {
                *a += d;
            }
            for (j, ex) in ds.examples().iter().enumerate() {
                let ay = alpha[j] * ex.label();
                assert!((0.0..=1.0).contains(&ay), "alpha*y = {ay}");
            }
            let now = dual_objective(&p, &alpha).unwrap();
            assert!(now >= prev - 1e-12, "dual decreased {prev} -> {now}");
            prev = now;
        }
    }
}
