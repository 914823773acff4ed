use super::ConvergenceError;
use crate::optim::Trace;

/// Smallest admissible floor for `P − p*`.
pub const MIN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingRow {
    pub i: f64,
    pub m: usize,
    /// `ln(P(i, m) − p*)`.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub rows: Vec<TrainingRow>,
    /// Records at or below the floor that were left out.
    pub dropped: usize,
    pub p_star: f64,
    pub p_star_gap: f64,
    pub algorithm: Option<String>,
    pub dataset_hash: Option<String>,
}

impl TrainingSet {
    pub fn from_rows(rows: Vec<TrainingRow>, p_star: f64, p_star_gap: f64) -> Self {
        TrainingSet { rows, dropped: 0, p_star, p_star_gap, algorithm: None, dataset_hash: None }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct machine counts, ascending.
    pub fn distinct_m(&self) -> Vec<usize> {
        let mut ms: Vec<usize> = self.rows.iter().map(|r| r.m).collect();
        ms.sort_unstable();
        ms.dedup();
        ms
    }

    pub fn filter(&self, keep: impl Fn(&TrainingRow) -> bool) -> TrainingSet {
        TrainingSet { rows: self.rows.iter().copied().filter(|r| keep(r)).collect(), ..self.clone() }
    }
}

/// Log sub-optimality rows from traces of one (algorithm, dataset) pair.
///
/// Iteration 0 is excluded. Records with `P − p* ≤ max(p_star_gap, 1e-12)`
/// are dropped and counted.
pub fn build_training_set(traces: &[Trace], p_star: f64, p_star_gap: f64) -> Result<TrainingSet, ConvergenceError> {
    let first = traces.first().ok_or_else(|| ConvergenceError::InsufficientData("no traces".into()))?;
    for t in traces {
        if t.meta.algorithm != first.meta.algorithm || t.meta.dataset_hash != first.meta.dataset_hash {
            return Err(ConvergenceError::Mismatch(format!(
                "traces mix ({}, {}) with ({}, {})",
                first.meta.algorithm, first.meta.dataset_hash, t.meta.algorithm, t.meta.dataset_hash
            )));
        }
    }
    if !(p_star_gap >= 0.0) || !p_star.is_finite() {
        return Err(ConvergenceError::InvalidInput(format!("p_star={p_star} gap={p_star_gap}")));
    }
    let min_primal = traces.iter().flat_map(|t| t.records.iter().map(|r| r.primal)).fold(f64::INFINITY, f64::min);
    if p_star > min_primal + p_star_gap {
        return Err(ConvergenceError::InvalidInput(format!(
            "p_star {p_star} exceeds the smallest recorded primal {min_primal} by more than the gap {p_star_gap}"
        )));
    }
    let floor = p_star_gap.max(MIN_FLOOR);
    let mut rows = Vec::new();
    let mut dropped = 0;
    for t in traces {
        for r in t.records.iter().filter(|r| r.iteration >= 1) {
            let sub = r.primal - p_star;
            if sub <= floor {
                dropped += 1;
            } else {
                rows.push(TrainingRow { i: r.iteration as f64, m: r.m, y: sub.ln() });
            }
        }
    }
    if rows.is_empty() {
        return Err(ConvergenceError::InsufficientData(format!("all {dropped} records fell below the floor")));
    }
    Ok(TrainingSet {
        rows,
        dropped,
        p_star,
        p_star_gap,
        algorithm: Some(first.meta.algorithm.to_string()),
        dataset_hash: Some(first.meta.dataset_hash.clone()),
    })
}
