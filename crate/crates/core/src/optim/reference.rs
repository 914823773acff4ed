use super::runner::{run_with_stop, StopRule};
use super::{Algorithm, AlgorithmConfig, SvmProblem};

/// Gap below which the reference optimum is considered tight.
pub const REFERENCE_GAP: f64 = 1e-9;
/// Gap above which the reference is flagged loose.
pub const LOOSE_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptimum {
    /// Final primal value; the true optimum lies in `[p_star − gap, p_star]`.
    pub p_star: f64,
    pub gap: f64,
    pub iterations: usize,
    pub loose: bool,
}

/// High-precision optimum from single-machine CoCoA+ (plain SDCA) with one
/// epoch per round, run until the duality gap is below 1e-9 or for
/// `50 · max_iters` rounds.
pub fn reference_optimum(problem: &SvmProblem<'_>, max_iters: usize) -> ReferenceOptimum {
    let mut cfg = AlgorithmConfig::new(Algorithm::CocoaPlus, 1);
    cfg.local_iters = Some(problem.n());
    cfg.max_iters = max_iters.max(1);
    cfg.target_suboptimality = REFERENCE_GAP;
    let rounds = 50 * cfg.max_iters;
    let trace = run_with_stop(problem, &cfg, StopRule::Gap(REFERENCE_GAP), rounds, |_| {})
        .expect("SDCA on a finite SVM problem stays finite");
    let last = trace.records.last().expect("trace has the initial record");
    let gap = last.duality_gap.expect("dual method records a gap").max(0.0);
    ReferenceOptimum { p_star: last.primal, gap, iterations: last.iteration, loose: gap >= LOOSE_GAP }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_libsvm, synth_classification, SynthParams};
    use crate::optim::objective::primal_objective;

    #[test]
    fn one_dimensional_problem() {
        // min w²/2 + max(0, 1 − w) is attained at w = 1 with value 1/2.
        let ds = parse_libsvm("+1 1:1".as_bytes()).unwrap();
        let p = SvmProblem::new(&ds, 1.0).unwrap();
        let r = reference_optimum(&p, 10);
        assert!((r.p_star - 0.5).abs() < 1e-12);
        assert!(r.gap >= 0.0 && r.gap < 1e-9);
        assert!(!r.loose);
    }

    #[test]
    fn certified_gap_on_desk_problem() {
        let ds = synth_classification(&SynthParams { n: 200, d: 10, margin: 0.1, noise_frac: 0.0, seed: 4 }).unwrap();
        let p = SvmProblem::new(&ds, 0.01).unwrap();
        let r = reference_optimum(&p, 500);
        assert!(r.gap < 1e-9, "gap {}", r.gap);
        assert!(r.gap >= 0.0);
        // the optimum certificate bounds any other point from below
        assert!(primal_objective(&p, &[0.0; 10]) >= r.p_star - r.gap);
    }

    #[test]
    fn three_example_problem_reaches_tiny_gap() {
        let ds = parse_libsvm("+1 1:1 2:0.5\n-1 1:-0.3 2:1\n+1 2:-2\n".as_bytes()).unwrap();
        let p = SvmProblem::new(&ds, 0.1).unwrap();
        let mut cfg = AlgorithmConfig::new(Algorithm::CocoaPlus, 1);
        cfg.local_iters = Some(3);
        let trace = run_with_stop(&p, &cfg, StopRule::Gap(1e-12), 100_000, |_| {}).unwrap();
        let gap = trace.records.last().unwrap().duality_gap.unwrap();
        assert!((0.0..1e-10).contains(&gap), "gap {gap}");
    }
}
