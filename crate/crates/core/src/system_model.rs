//! Per-iteration time model `f(m) = θ₀ + θ₁·size/m + θ₂·ln m + θ₃·m`.
//!
//! Coefficients are fitted by non-negative least squares. An optional
//! extended basis appends `m·ln m` and `size²/m` for algorithms whose
//! computation or communication grows faster than linearly.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::kv::{KvError, KvFile};
use crate::nnls::{kkt_violation, nnls};
use crate::optim::trace::{check_header, TraceError};
use crate::optim::Trace;
use crate::rng;

pub const TIMING_HEADER: [&str; 3] = ["m", "size", "time_s"];

#[derive(Debug, Error)]
pub enum SystemModelError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error(transparent)]
    Format(#[from] TraceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemBasis {
    /// `[1, size/m, ln m, m]`
    Ernest,
    /// `[1, size/m, ln m, m, m·ln m, size²/m]`
    Extended,
}

impl SystemBasis {
    pub fn version(self) -> &'static str {
        match self {
            SystemBasis::Ernest => "ernest-v1",
            SystemBasis::Extended => "extended-v1",
        }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> usize {
        match self {
            SystemBasis::Ernest => 4,
            SystemBasis::Extended => 6,
        }
    }

    pub fn from_version(v: &str) -> Option<Self> {
        match v {
            "ernest-v1" => Some(SystemBasis::Ernest),
            "extended-v1" => Some(SystemBasis::Extended),
            _ => None,
        }
    }

    pub fn row(self, m: usize, size: f64) -> Vec<f64> {
        let mf = m as f64;
        let mut row = design_row(m, size).to_vec();
        if self == SystemBasis::Extended {
            row.push(mf * mf.ln());
            row.push(size * size / mf);
        }
        row
    }
}

/// `[1, size/m, ln m, m]`.
pub fn design_row(m: usize, size: f64) -> [f64; 4] {
    let mf = m as f64;
    [1.0, size / mf, mf.ln(), mf]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingObservation {
    pub m: usize,
    pub size: f64,
    pub time_s: f64,
}

impl TimingObservation {
    pub fn new(m: usize, size: f64, time_s: f64) -> Result<Self, SystemModelError> {
        if m < 1 || !(size > 0.0 && size.is_finite()) || !(time_s > 0.0 && time_s.is_finite()) {
            return Err(SystemModelError::InvalidObservation(format!("m={m} size={size} time_s={time_s}")));
        }
        Ok(TimingObservation { m, size, time_s })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub basis: SystemBasis,
    /// Non-negative coefficients, one per basis term.
    pub theta: Vec<f64>,
    /// Input size the model predicts for by default.
    pub size: f64,
    /// RMS error on the fitting observations.
    pub fit_residual: f64,
    /// The design matrix had dependent columns; `theta` is one of several minimizers.
    pub rank_deficient: bool,
    pub algorithm: Option<String>,
    pub dataset_hash: Option<String>,
}

impl SystemModel {
    pub fn from_theta(theta: [f64; 4], size: f64) -> Self {
        SystemModel {
            basis: SystemBasis::Ernest,
            theta: theta.to_vec(),
            size,
            fit_residual: 0.0,
            rank_deficient: false,
            algorithm: None,
            dataset_hash: None,
        }
    }

    /// `f(m)` at the model's own input size.
    pub fn predict_time(&self, m: usize) -> f64 {
        self.predict_time_at(m, self.size)
    }

    pub fn predict_time_at(&self, m: usize, size: f64) -> f64 {
        self.basis.row(m, size).iter().zip(&self.theta).map(|(x, t)| x * t).sum()
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("basis_version", self.basis.version());
        for (k, t) in self.theta.iter().enumerate() {
            kv.set(format!("theta{k}"), t);
        }
        kv.set("size", self.size).set("fit_residual", self.fit_residual).set("rank_deficient", self.rank_deficient);
        if let Some(a) = &self.algorithm {
            kv.set("algorithm", a);
        }
        if let Some(h) = &self.dataset_hash {
            kv.set("dataset_hash", h);
        }
        kv
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self, SystemModelError> {
        let version = kv.require("basis_version")?;
        let basis = SystemBasis::from_version(version)
            .ok_or_else(|| SystemModelError::InvalidModel(format!("unknown basis version {version:?}")))?;
        let theta = (0..basis.len()).map(|k| kv.parse::<f64>(&format!("theta{k}"))).collect::<Result<Vec<_>, _>>()?;
        if theta.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(SystemModelError::InvalidModel("theta must be finite and non-negative".into()));
        }
        Ok(SystemModel {
            basis,
            theta,
            size: kv.parse("size")?,
            fit_residual: kv.parse("fit_residual")?,
            rank_deficient: kv.parse_opt("rank_deficient")?.unwrap_or(false),
            algorithm: kv.get("algorithm").map(str::to_string),
            dataset_hash: kv.get("dataset_hash").map(str::to_string),
        })
    }

    pub fn read(path: &Path) -> Result<Self, SystemModelError> {
        Self::from_kv(&KvFile::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), SystemModelError> {
        Ok(self.to_kv().write(path)?)
    }
}

/// Non-negative least-squares fit of the time model.
///
/// Needs at least four observations over at least three distinct `m`. The
/// model's `size` is the largest observed size.
pub fn fit_nnls(observations: &[TimingObservation], basis: SystemBasis) -> Result<SystemModel, SystemModelError> {
    if observations.len() < 4 {
        return Err(SystemModelError::InsufficientData(format!("{} observations, need 4", observations.len())));
    }
    let mut ms: Vec<usize> = observations.iter().map(|o| o.m).collect();
    ms.sort_unstable();
    ms.dedup();
    if ms.len() < 3 {
        return Err(SystemModelError::InsufficientData(format!("{} distinct m values, need 3", ms.len())));
    }
    for o in observations {
        TimingObservation::new(o.m, o.size, o.time_s)?;
    }
    let (a, b) = design(observations, basis);
    let sol = nnls(&a, &b);
    let theta: Vec<f64> = sol.x.iter().copied().collect();
    let residual = &a * &sol.x - &b;
    let rms = (residual.norm_squared() / observations.len() as f64).sqrt();
    let size = observations.iter().map(|o| o.size).fold(0.0, f64::max);
    Ok(SystemModel {
        basis,
        theta,
        size,
        fit_residual: rms,
        rank_deficient: sol.rank_deficient,
        algorithm: None,
        dataset_hash: None,
    })
}

fn design(observations: &[TimingObservation], basis: SystemBasis) -> (DMatrix<f64>, DVector<f64>) {
    let cols = basis.len();
    let mut a = DMatrix::zeros(observations.len(), cols);
    for (r, o) in observations.iter().enumerate() {
        for (c, v) in basis.row(o.m, o.size).into_iter().enumerate() {
            a[(r, c)] = v;
        }
    }
    let b = DVector::from_iterator(observations.len(), observations.iter().map(|o| o.time_s));
    (a, b)
}

/// Largest KKT violation of `model.theta` for the squared loss
/// `Σ (f(mᵢ) − timeᵢ)²` on `observations`.
pub fn fit_kkt_violation(model: &SystemModel, observations: &[TimingObservation]) -> f64 {
    let (a, b) = design(observations, model.basis);
    let x = DVector::from_column_slice(&model.theta);
    // gradient of the un-halved squared loss is twice that of the halved one
    2.0 * kkt_violation(&a, &b, &x)
}

/// Timings `f(m)·(1 + noise·u)` with `u ~ U[−1, 1]`, `repeats` per `m`, in
/// the order given. Times are clamped to stay positive.
pub fn synth_timings(
    model: &SystemModel,
    ms: &[usize],
    noise: f64,
    repeats: usize,
    seed: u64,
) -> Result<Vec<TimingObservation>, SystemModelError> {
    if repeats < 1 {
        return Err(SystemModelError::InsufficientData("repeats must be >= 1".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(SystemModelError::InvalidObservation(format!("noise {noise}")));
    }
    let mut rng = rng::seeded(seed);
    let mut out = Vec::with_capacity(ms.len() * repeats);
    for &m in ms {
        if m < 1 {
            return Err(SystemModelError::InvalidObservation(format!("m={m}")));
        }
        let base = model.predict_time(m);
        for _ in 0..repeats {
            let u: f64 = rng.random_range(-1.0..=1.0);
            let t = if noise == 0.0 { base } else { base * (1.0 + noise * u) };
            out.push(TimingObservation { m, size: model.size, time_s: t.max(f64::MIN_POSITIVE) });
        }
    }
    Ok(out)
}

pub const WARMUP_ITERS: usize = 5;
pub const SAMPLE_ITERS: usize = 50;

/// One observation from a measured trace: the median per-iteration time of
/// up to 50 iterations after discarding 5 warm-up iterations. Short traces
/// that end inside the warm-up use all of their iterations.
pub fn observation_from_trace(trace: &Trace, size: f64) -> Result<TimingObservation, SystemModelError> {
    let steps: Vec<f64> = trace.records.iter().filter(|r| r.iteration >= 1).map(|r| r.iter_wall_time).collect();
    if steps.is_empty() {
        return Err(SystemModelError::InsufficientData("trace has no iterations".into()));
    }
    let window: Vec<f64> = if steps.len() > WARMUP_ITERS {
        steps[WARMUP_ITERS..].iter().take(SAMPLE_ITERS).copied().collect()
    } else {
        steps
    };
    TimingObservation::new(trace.m(), size, median(window).max(f64::MIN_POSITIVE))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn timings_to_csv(obs: &[TimingObservation]) -> String {
    let mut out = String::from("m,size,time_s\n");
    for o in obs {
        out.push_str(&format!("{},{},{}\n", o.m, o.size, o.time_s));
    }
    out
}

pub fn timings_from_csv(text: &str, origin: &str) -> Result<Vec<TimingObservation>, SystemModelError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(TraceError::from)?.clone();
    check_header(&headers, &TIMING_HEADER, origin)?;
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(TraceError::from)?;
        let bad = |c: usize| {
            SystemModelError::Format(TraceError::Value {
                path: origin.to_string(),
                row: row + 1,
                column: TIMING_HEADER[c].to_string(),
                value: rec.get(c).unwrap_or("").to_string(),
            })
        };
        let m: usize = rec.get(0).unwrap_or("").parse().map_err(|_| bad(0))?;
        let size: f64 = rec.get(1).unwrap_or("").parse().map_err(|_| bad(1))?;
        let time: f64 = rec.get(2).unwrap_or("").parse().map_err(|_| bad(2))?;
        out.push(TimingObservation::new(m, size, time)?);
    }
    Ok(out)
}
