use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use super::{DataError, Dataset, Example};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n: usize,
    pub d: usize,
    /// Minimum |<truth, x>| for a sample to be kept.
    pub margin: f64,
    /// Fraction of labels flipped after the clean labeling.
    pub noise_frac: f64,
    pub seed: u64,
}

const FEATURE_STREAM: u64 = 0;
const FLIP_STREAM: u64 = 1;

/// Linearly separable data around a random unit direction, with a fixed
/// number of flipped labels.
///
/// Features and flips use separate generator streams, so the same seed with
/// `noise_frac = 0` reproduces the clean labeling of a noisy dataset.
pub fn synth_classification(params: &SynthParams) -> Result<Dataset, DataError> {
    synth_with_truth(params).map(|(ds, _)| ds)
}

/// As [`synth_classification`], also returning the unit ground-truth vector.
pub fn synth_with_truth(params: &SynthParams) -> Result<(Dataset, Vec<f64>), DataError> {
    let SynthParams { n, d, margin, noise_frac, seed } = *params;
    if n < 2 || d < 1 {
        return Err(DataError::InvalidParams(format!("need n >= 2 and d >= 1, got n={n} d={d}")));
    }
    if !(0.0..=1.0).contains(&noise_frac) || !margin.is_finite() || margin < 0.0 {
        return Err(DataError::InvalidParams(format!("margin={margin} noise_frac={noise_frac}")));
    }

    let mut rng = rng::stream(seed, FEATURE_STREAM);
    let mut truth: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    truth.iter_mut().for_each(|v| *v /= norm);

    let max_draws = 1000 * n + 10_000;
    let mut draws = 0;
    let mut examples = Vec::with_capacity(n);
    while examples.len() < n {
        draws += 1;
        if draws > max_draws {
            return Err(DataError::InvalidParams(format!(
                "margin {margin} rejects too many samples ({} kept after {max_draws} draws)",
                examples.len()
            )));
        }
        let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let score: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum();
        if score.abs() < margin || score == 0.0 {
            continue;
        }
        let label = if score > 0.0 { 1.0 } else { -1.0 };
        let features = x.into_iter().enumerate().filter(|(_, v)| *v != 0.0).map(|(i, v)| (i as u32, v)).collect();
        examples.push(Example::new(label, features).expect("finite normal draws"));
    }

    let flips = (noise_frac * n as f64).round() as usize;
    let mut flip_rng = rng::stream(seed, FLIP_STREAM);
    for i in index::sample(&mut flip_rng, n, flips.min(n)) {
        let ex = &examples[i];
        examples[i] = ex.with_label(-ex.label());
    }
    Ok((Dataset::new(examples, d)?, truth))
}
