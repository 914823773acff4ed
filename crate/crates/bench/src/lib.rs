//! Shared fixtures for the criterion benches.

use optsel::data::{synth_classification, Dataset, SynthParams};

/// The desk-scale classification problem used across benches.
pub fn desk_dataset(n: usize, d: usize) -> Dataset {
    synth_classification(&SynthParams { n, d, margin: 0.1, noise_frac: 0.05, seed: 7 }).expect("valid parameters")
}
