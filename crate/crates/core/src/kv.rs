//! Plain `key=value` text files used for metadata sidecars and model files.
//!
//! One entry per line, `#` starts a comment line, blank lines are ignored.
//! Keys keep their insertion order on write. Floats are written with Rust's
//! shortest round-trip formatting so a write/read cycle is lossless.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KvError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("missing key {0:?}")]
    Missing(String),
    #[error("key {key:?}: cannot parse {value:?}")]
    Invalid { key: String, value: String },
    #[error("expected {expected:?} = {want:?}, found {found:?}")]
    Mismatch { expected: String, want: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: Vec<(String, String)>,
}

impl KvFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key).ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, KvError> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| KvError::Invalid { key: key.to_string(), value: raw.to_string() })
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, KvError> {
        match self.get(key) {
            None | Some("") => Ok(None),
            Some(_) => self.parse(key).map(Some),
        }
    }

    /// Fails unless `key` is present with exactly `want`.
    pub fn expect(&self, key: &str, want: &str) -> Result<(), KvError> {
        let found = self.require(key)?;
        if found == want {
            Ok(())
        } else {
            Err(KvError::Mismatch { expected: key.into(), want: want.into(), found: found.into() })
        }
    }

    /// Entries whose key starts with `prefix`, with the prefix stripped.
    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.entries
            .iter()
            .filter_map(move |(k, v)| k.strip_prefix(prefix).map(|rest| (rest, v.as_str())))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, KvError> {
        let mut kv = KvFile::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| KvError::Malformed { line: idx + 1, text: line.to_string() })?;
            kv.set(k.trim(), v.trim());
        }
        Ok(kv)
    }

    pub fn read(path: &Path) -> Result<Self, KvError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), KvError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Formats a list of floats as a comma-separated value.
pub fn join_floats(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn split_floats(key: &str, raw: &str) -> Result<Vec<f64>, KvError> {
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| KvError::Invalid { key: key.to_string(), value: raw.to_string() })
        })
        .collect()
}
