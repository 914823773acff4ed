//! Per-iteration convergence traces and their CSV / sidecar encoding.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::Algorithm;
use crate::kv::{KvError, KvFile};

pub const TRACE_HEADER: [&str; 7] =
    ["algorithm", "m", "iteration", "primal", "duality_gap", "iter_wall_time_s", "cumulative_time_s"];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("schema mismatch in {path}: column {position} should be {expected:?}, found {found:?}")]
    Schema { path: String, position: usize, expected: String, found: String },
    #[error("{path} row {row}: bad value {value:?} in column {column:?}")]
    Value { path: String, row: usize, column: String, value: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub algorithm: Algorithm,
    pub m: usize,
    pub iteration: usize,
    pub primal: f64,
    /// `None` for primal-only methods.
    pub duality_gap: Option<f64>,
    pub iter_wall_time: f64,
    pub cumulative_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub dataset_hash: String,
    pub dataset_path: Option<String>,
    pub n: usize,
    pub d: usize,
    pub reg: f64,
    pub algorithm: Algorithm,
    pub m: usize,
    /// Local SDCA steps per round; 0 for primal methods.
    pub local_iters: usize,
    pub gamma: f64,
    pub sigma_prime: f64,
    /// Effective mini-batch; 0 when not applicable.
    pub batch_size: usize,
    pub max_iters: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub timing_mode: String,
    pub p_star: Option<f64>,
    pub p_star_gap: Option<f64>,
    pub diverged: bool,
    pub stop_reason: String,
    /// Caller-supplied entries, written after the fixed ones.
    pub extra: Vec<(String, String)>,
}

impl TraceMeta {
    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("dataset_hash", &self.dataset_hash);
        if let Some(p) = &self.dataset_path {
            kv.set("dataset_path", p);
        }
        kv.set("n", self.n)
            .set("d", self.d)
            .set("reg", self.reg)
            .set("algorithm", self.algorithm)
            .set("m", self.m)
            .set("local_iters", self.local_iters)
            .set("gamma", self.gamma)
            .set("sigma_prime", self.sigma_prime)
            .set("batch_size", self.batch_size)
            .set("max_iters", self.max_iters)
            .set("epsilon", self.epsilon)
            .set("seed", self.seed)
            .set("timing_mode", &self.timing_mode)
            .set("p_star", opt_to_string(self.p_star))
            .set("p_star_gap", opt_to_string(self.p_star_gap))
            .set("diverged", self.diverged)
            .set("stop_reason", &self.stop_reason);
        for (k, v) in &self.extra {
            kv.set(format!("extra.{k}"), v);
        }
        kv
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self, KvError> {
        let algorithm = kv
            .require("algorithm")?
            .parse()
            .map_err(|_| KvError::Invalid { key: "algorithm".into(), value: kv.get("algorithm").unwrap_or("").into() })?;
        Ok(TraceMeta {
            dataset_hash: kv.require("dataset_hash")?.to_string(),
            dataset_path: kv.get("dataset_path").map(str::to_string),
            n: kv.parse("n")?,
            d: kv.parse("d")?,
            reg: kv.parse("reg")?,
            algorithm,
            m: kv.parse("m")?,
            local_iters: kv.parse("local_iters")?,
            gamma: kv.parse("gamma")?,
            sigma_prime: kv.parse("sigma_prime")?,
            batch_size: kv.parse("batch_size")?,
            max_iters: kv.parse("max_iters")?,
            epsilon: kv.parse("epsilon")?,
            seed: kv.parse("seed")?,
            timing_mode: kv.require("timing_mode")?.to_string(),
            p_star: kv.parse_opt("p_star")?,
            p_star_gap: kv.parse_opt("p_star_gap")?,
            diverged: kv.parse("diverged")?,
            stop_reason: kv.require("stop_reason")?.to_string(),
            extra: kv.with_prefix("extra.").map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        })
    }

    /// Hash identifying the run: everything except the dataset path and
    /// caller extras. Two runs with equal hashes are duplicates.
    pub fn identity_hash(&self) -> String {
        let mut bare = self.clone();
        bare.dataset_path = None;
        bare.extra.clear();
        hex::encode(Sha256::digest(bare.to_kv().to_text().as_bytes()))
    }
}

fn opt_to_string(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn algorithm(&self) -> Algorithm {
        self.meta.algorithm
    }

    pub fn m(&self) -> usize {
        self.meta.m
    }

    /// Iteration of the last record.
    pub fn last_iteration(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }

    /// First iteration whose primal sub-optimality is at most `eps`.
    pub fn iterations_to_suboptimality(&self, p_star: f64, eps: f64) -> Option<usize> {
        self.records.iter().find(|r| r.primal - p_star <= eps).map(|r| r.iteration)
    }

    /// First iteration whose duality gap is at most `eps`.
    pub fn iterations_to_gap(&self, eps: f64) -> Option<usize> {
        self.records.iter().find(|r| r.duality_gap.is_some_and(|g| g <= eps)).map(|r| r.iteration)
    }

    pub fn to_csv(&self) -> Result<String, TraceError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TRACE_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.algorithm.to_string(),
                r.m.to_string(),
                r.iteration.to_string(),
                r.primal.to_string(),
                opt_to_string(r.duality_gap),
                r.iter_wall_time.to_string(),
                r.cumulative_time.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn records_from_csv(text: &str, origin: &str) -> Result<Vec<TraceRecord>, TraceError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        check_header(reader.headers()?, &TRACE_HEADER, origin)?;
        let mut records = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| rec.get(c).unwrap_or("");
            let bad = |c: usize| TraceError::Value {
                path: origin.to_string(),
                row: row + 1,
                column: TRACE_HEADER[c].to_string(),
                value: field(c).to_string(),
            };
            let num = |c: usize| field(c).parse::<f64>().map_err(|_| bad(c));
            records.push(TraceRecord {
                algorithm: field(0).parse().map_err(|_| bad(0))?,
                m: field(1).parse().map_err(|_| bad(1))?,
                iteration: field(2).parse().map_err(|_| bad(2))?,
                primal: num(3)?,
                duality_gap: if field(4).is_empty() { None } else { Some(num(4)?) },
                iter_wall_time: num(5)?,
                cumulative_time: num(6)?,
            });
        }
        Ok(records)
    }

    /// Sidecar path for a trace CSV: same stem, `.meta` extension.
    pub fn meta_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("meta")
    }

    pub fn write(&self, csv_path: &Path) -> Result<(), TraceError> {
        std::fs::write(csv_path, self.to_csv()?)?;
        self.meta.to_kv().write(&Self::meta_path(csv_path))?;
        Ok(())
    }

    pub fn read(csv_path: &Path) -> Result<Self, TraceError> {
        let origin = csv_path.display().to_string();
        let records = Self::records_from_csv(&std::fs::read_to_string(csv_path)?, &origin)?;
        let meta = TraceMeta::from_kv(&KvFile::read(&Self::meta_path(csv_path))?)?;
        for (k, r) in records.iter().enumerate() {
            if r.iteration != k || r.algorithm != meta.algorithm || r.m != meta.m {
                return Err(TraceError::Invalid {
                    path: origin,
                    message: format!("row {} disagrees with metadata or is out of sequence", k + 1),
                });
            }
        }
        Ok(Trace { meta, records })
    }
}

/// Fails with the first column that differs from `expected`.
pub fn check_header(found: &csv::StringRecord, expected: &[&str], origin: &str) -> Result<(), TraceError> {
    for (position, want) in expected.iter().enumerate() {
        let got = found.get(position).unwrap_or("");
        if got.trim() != *want {
            return Err(TraceError::Schema {
                path: origin.to_string(),
                position,
                expected: want.to_string(),
                found: got.to_string(),
            });
        }
    }
    if found.len() > expected.len() {
        return Err(TraceError::Schema {
            path: origin.to_string(),
            position: expected.len(),
            expected: String::new(),
            found: found.get(expected.len()).unwrap_or("").to_string(),
        });
    }
    Ok(())
}
