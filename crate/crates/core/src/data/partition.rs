use rand::seq::SliceRandom;

use super::{DataError, Dataset};
use crate::rng;

/// Assignment of example indices to `m` shards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partitioning {
    shards: Vec<Vec<usize>>,
    assignment: Vec<usize>,
}

impl Partitioning {
    pub fn m(&self) -> usize {
        self.shards.len()
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    pub fn shard(&self, k: usize) -> &[usize] {
        &self.shards[k]
    }

    /// Shard index of example `i`.
    pub fn shard_of(&self, i: usize) -> usize {
        self.assignment[i]
    }
}

/// Seeded shuffle of `0..n` followed by round-robin assignment.
pub fn partition(ds: &Dataset, m: usize, seed: u64) -> Result<Partitioning, DataError> {
    let n = ds.n();
    if m < 1 || m > n {
        return Err(DataError::InvalidParallelism { m, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    round_robin(&order, m)
}

/// Deals `order[j]` to shard `j % m`.
pub fn round_robin(order: &[usize], m: usize) -> Result<Partitioning, DataError> {
    let n = order.len();
    if m < 1 || m > n {
        return Err(DataError::InvalidParallelism { m, n });
    }
    let mut shards = vec![Vec::with_capacity(n / m + 1); m];
    let mut assignment = vec![usize::MAX; n];
    for (j, &idx) in order.iter().enumerate() {
        if idx >= n || assignment[idx] != usize::MAX {
            return Err(DataError::InvalidParams(format!("order is not a permutation at {idx}")));
        }
        shards[j % m].push(idx);
        assignment[idx] = j % m;
    }
    Ok(Partitioning { shards, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Example;
    use proptest::prelude::*;

    fn dataset(n: usize) -> Dataset {
        let examples = (0..n).map(|i| Example::new(1.0, vec![(0, i as f64)]).unwrap()).collect();
        Dataset::new(examples, 1).unwrap()
    }

    #[test]
    fn identity_round_robin() {
        let p = round_robin(&[0, 1, 2, 3], 2).unwrap();
        assert_eq!(p.shards(), &[vec![0, 2], vec![1, 3]]);
        assert_eq!(p.shard_of(3), 1);
    }

    #[test]
    fn single_machine_takes_everything() {
        let p = partition(&dataset(5), 1, 9).unwrap();
        let mut s = p.shard(0).to_vec();
        s.sort();
        assert_eq!(s, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn deterministic_per_seed() {
        let ds = dataset(50);
        assert_eq!(partition(&ds, 7, 3).unwrap(), partition(&ds, 7, 3).unwrap());
        assert_ne!(partition(&ds, 7, 3).unwrap(), partition(&ds, 7, 4).unwrap());
    }

    #[test]
    fn rejects_bad_parallelism() {
        let ds = dataset(3);
        assert_eq!(partition(&ds, 0, 1), Err(DataError::InvalidParallelism { m: 0, n: 3 }));
        assert_eq!(partition(&ds, 4, 1), Err(DataError::InvalidParallelism { m: 4, n: 3 }));
    }

    proptest! {
        #[test]
        fn balanced_and_covering(n in 1usize..300, m_frac in 0.0f64..1.0, seed in any::<u64>()) {
            let m = 1 + ((n - 1) as f64 * m_frac) as usize;
            let p = partition(&dataset(n), m, seed).unwrap();
            let sizes: Vec<usize> = p.shards().iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut all: Vec<usize> = p.shards().iter().flatten().copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            for (k, shard) in p.shards().iter().enumerate() {
                for &i in shard {
                    prop_assert_eq!(p.shard_of(i), k);
                }
            }
        }
    }
}
