//! Sparse labeled datasets, LIBSVM text I/O, synthetic data and partitioning.

mod libsvm;
mod partition;
mod synth;

pub use libsvm::{parse_libsvm, read_libsvm};
pub use partition::{partition, round_robin, Partitioning};
pub use synth::{synth_classification, synth_with_truth, SynthParams};

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("empty dataset")]
    Empty,
    #[error("invalid example {index}: {reason}")]
    InvalidExample { index: usize, reason: String },
    #[error("invalid parallelism m={m} for n={n} examples")]
    InvalidParallelism { m: usize, n: usize },
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// One labeled row with sparse features.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    label: f64,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl Example {
    /// `label` must be ±1; `features` are (0-based index, value) pairs with
    /// strictly increasing indices and finite values.
    pub fn new(label: f64, features: Vec<(u32, f64)>) -> Result<Self, String> {
        if label != 1.0 && label != -1.0 {
            return Err(format!("label {label} is not -1 or +1"));
        }
        let mut indices = Vec::with_capacity(features.len());
        let mut values = Vec::with_capacity(features.len());
        for (idx, val) in features {
            if let Some(&prev) = indices.last() {
                if idx <= prev {
                    return Err(format!("feature index {idx} does not increase (previous {prev})"));
                }
            }
            if !val.is_finite() {
                return Err(format!("feature {idx} has non-finite value {val}"));
            }
            indices.push(idx);
            values.push(val);
        }
        Ok(Example { label, indices, values })
    }

    pub fn label(&self) -> f64 {
        self.label
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn features(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().zip(&self.values).map(|(&i, &v)| (i as usize, v))
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.features().map(|(i, v)| w[i] * v).sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `w += scale * x`.
    pub fn add_to(&self, w: &mut [f64], scale: f64) {
        for (i, v) in self.features() {
            w[i] += scale * v;
        }
    }

    pub(crate) fn with_label(&self, label: f64) -> Self {
        Example { label, ..self.clone() }
    }

    pub(crate) fn scaled(&self, scales: &[f64]) -> Self {
        let values = self.features().map(|(i, v)| v * scales[i]).collect();
        Example { values, ..self.clone() }
    }
}

/// An immutable, non-empty collection of examples over `d` features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    d: usize,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, d: usize) -> Result<Self, DataError> {
        if examples.is_empty() {
            return Err(DataError::Empty);
        }
        for (index, ex) in examples.iter().enumerate() {
            if let Some(&last) = ex.indices.last() {
                if last as usize >= d {
                    return Err(DataError::InvalidExample {
                        index,
                        reason: format!("feature index {last} outside dimension {d}"),
                    });
                }
            }
        }
        Ok(Dataset { examples, d })
    }

    pub fn n(&self) -> usize {
        self.examples.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn example(&self, i: usize) -> &Example {
        &self.examples[i]
    }

    pub fn labels(&self) -> impl Iterator<Item = f64> + '_ {
        self.examples.iter().map(|e| e.label)
    }

    /// LIBSVM text with 1-based indices. Values use shortest round-trip
    /// formatting, so re-parsing yields an identical dataset.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for ex in &self.examples {
            out.push_str(if ex.label > 0.0 { "+1" } else { "-1" });
            for (i, v) in ex.features() {
                out.push(' ');
                out.push_str(&(i + 1).to_string());
                out.push(':');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Hex SHA-256 over the dimension and the LIBSVM serialization.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("d={}\n", self.d).as_bytes());
        hasher.update(self.to_libsvm().as_bytes());
        hex::encode(hasher.finalize())
    }

    /// Per-feature max-abs scaling into [-1, 1]. Returns the scaled dataset
    /// and the multiplier applied to each feature (1 for all-zero features).
    pub fn max_abs_scaled(&self) -> (Dataset, Vec<f64>) {
        let mut max_abs = vec![0.0f64; self.d];
        for ex in &self.examples {
            for (i, v) in ex.features() {
                max_abs[i] = max_abs[i].max(v.abs());
            }
        }
        let scales: Vec<f64> = max_abs.iter().map(|&a| if a > 0.0 { 1.0 / a } else { 1.0 }).collect();
        let examples = self.examples.iter().map(|e| e.scaled(&scales)).collect();
        (Dataset { examples, d: self.d }, scales)
    }
}
