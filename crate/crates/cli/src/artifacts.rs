use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use optsel::kv::KvFile;
use optsel::Trace;
use sha2::{Digest, Sha256};

use crate::settings::Settings;

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance written next to every output: the command, the resolved
/// configuration and a content hash of each input file.
pub struct Provenance {
    command: &'static str,
    entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &'static str, settings: &Settings) -> Self {
        let mut entries = Vec::new();
        if let Some(p) = settings.config_path() {
            entries.push(("config_file".to_string(), p.display().to_string()));
        }
        for (k, v) in settings.echo() {
            entries.push((format!("config.{k}"), v.clone()));
        }
        Provenance { command, entries }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        let hash = file_sha256(path)?;
        self.entries.push((format!("input.{name}.path"), path.display().to_string()));
        self.entries.push((format!("input.{name}.sha256"), hash));
        Ok(())
    }

    /// Traces are hashed through both their CSV and metadata file.
    pub fn trace_input(&mut self, path: &Path) -> Result<()> {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace").to_string();
        self.input(&format!("{stem}.csv"), path)?;
        self.input(&format!("{stem}.meta"), &Trace::meta_path(path))
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_kv(&self, output: &Path) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("command", self.command);
        kv.set("output", output.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        for (k, v) in &self.entries {
            kv.set(k.as_str(), v);
        }
        kv
    }
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    output.with_extension("meta")
}

/// Writes `contents` to `output` and its sidecar.
pub fn write_with_sidecar(output: &Path, contents: &str, prov: &Provenance) -> Result<()> {
    std::fs::write(output, contents).with_context(|| format!("writing {}", output.display()))?;
    write_sidecar(output, prov)
}

pub fn write_sidecar(output: &Path, prov: &Provenance) -> Result<()> {
    let side = sidecar_path(output);
    prov.to_kv(output).write(&side).with_context(|| format!("writing {}", side.display()))
}

pub fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

/// Every `trace_*.csv` in `dir`, sorted by file name.
pub fn trace_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading trace directory {}", dir.display()))?;
    let mut out = Vec::new();
    for e in entries {
        let p = e?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("trace_") && name.ends_with(".csv") {
            out.push(p);
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("no trace_*.csv files in {}", dir.display());
    }
    Ok(out)
}

/// Loads the traces in `dir`, keeping those of `algorithm` when given.
pub fn load_traces(dir: &Path, algorithm: Option<&str>) -> Result<Vec<(PathBuf, Trace)>> {
    let mut out = Vec::new();
    for p in trace_files(dir)? {
        let t = Trace::read(&p).with_context(|| format!("loading trace {}", p.display()))?;
        if algorithm.is_none_or(|a| a == t.meta.algorithm.as_str()) {
            out.push((p, t));
        }
    }
    if out.is_empty() {
        bail!("no traces for {} in {}", algorithm.unwrap_or("any algorithm"), dir.display());
    }
    Ok(out)
}

/// The single algorithm present in `traces`.
pub fn single_algorithm(traces: &[(PathBuf, Trace)]) -> Result<String> {
    let mut algs: Vec<&str> = traces.iter().map(|(_, t)| t.meta.algorithm.as_str()).collect();
    algs.sort_unstable();
    algs.dedup();
    match algs.as_slice() {
        [one] => Ok(one.to_string()),
        many => bail!("traces mix algorithms {many:?}; pass --algorithm"),
    }
}

/// Reference optimum `(p_star, gap)`: explicit values win, otherwise all
/// traces must carry the same one.
pub fn resolve_p_star(traces: &[(PathBuf, Trace)], p_star: Option<f64>, gap: Option<f64>) -> Result<(f64, f64)> {
    if let Some(p) = p_star {
        return Ok((p, gap.unwrap_or(0.0)));
    }
    let mut found: Option<(f64, f64)> = None;
    for (path, t) in traces {
        let Some(p) = t.meta.p_star else {
            bail!("{} has no p_star; pass --p-star", path.display());
        };
        let g = t.meta.p_star_gap.unwrap_or(0.0);
        match found {
            None => found = Some((p, g)),
            Some((p0, g0)) if p0 == p && g0 == g => {}
            Some((p0, _)) => bail!("{} has p_star {p}, other traces {p0}; pass --p-star", path.display()),
        }
    }
    Ok(found.expect("traces are nonempty"))
}
