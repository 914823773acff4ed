//! Worker fan-out and deterministic reductions for one BSP superstep.

use std::num::NonZeroUsize;
use std::thread;

/// Runs `step(k, &mut workers[k])` for every worker and returns the results
/// in worker order.
///
/// Workers are split into at most `threads` contiguous groups; each group runs
/// on its own scoped thread and groups larger than one run their workers in
/// sequence. Returning from this function is the superstep barrier.
pub fn par_map<W, T, F>(workers: &mut [W], threads: usize, step: F) -> Vec<T>
where
    W: Send,
    T: Send,
    F: Fn(usize, &mut W) -> T + Sync,
{
    let threads = threads.clamp(1, workers.len().max(1));
    if threads == 1 {
        return workers.iter_mut().enumerate().map(|(k, w)| step(k, w)).collect();
    }
    let chunk = workers.len().div_ceil(threads);
    let step = &step;
    thread::scope(|scope| {
        let handles: Vec<_> = workers
            .chunks_mut(chunk)
            .enumerate()
            .map(|(c, group)| {
                scope.spawn(move || {
                    group.iter_mut().enumerate().map(|(off, w)| step(c * chunk + off, w)).collect::<Vec<T>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker thread panicked")).collect()
    })
}

/// Threads to use for `m` logical workers on this host.
pub(crate) fn worker_threads(m: usize) -> usize {
    let cores = thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1);
    m.min(cores)
}

/// Element-wise sum of equal-length vectors by a fixed pairwise tree over the
/// input order. Returns zeros of length `len` for no inputs.
pub fn tree_sum(mut parts: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    if parts.is_empty() {
        return vec![0.0; len];
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut iter = parts.into_iter();
        while let Some(mut left) = iter.next() {
            if let Some(right) = iter.next() {
                for (a, b) in left.iter_mut().zip(&right) {
                    *a += b;
                }
            }
            next.push(left);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_worker_order() {
        let mut workers: Vec<usize> = (0..7).collect();
        for threads in 1..5 {
            let out = par_map(&mut workers, threads, |k, w| {
                *w += 0;
                k * 10 + *w
            });
            assert_eq!(out, (0..7).map(|k| k * 11).collect::<Vec<_>>());
        }
    }

    #[test]
    fn tree_sum_pairs_in_order() {
        let parts = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]];
        assert_eq!(tree_sum(parts, 1), vec![15.0]);
        assert_eq!(tree_sum(vec![], 3), vec![0.0; 3]);
        // ((a+b)+(c+d)) differs from left fold for these values
        let parts = vec![vec![1e16], vec![1.0], vec![-1e16], vec![1.0]];
        assert_eq!(tree_sum(parts, 1), vec![0.0]);
    }
}
