use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use optsel::kv::KvFile;

/// Flag values layered over an optional key-value config file.
///
/// Keys are the long flag names (`m-grid`, `max-iters`, ...). Lists in the
/// file are comma separated. Every resolved value is recorded so it can be
/// echoed into output sidecars.
pub struct Settings {
    file: Option<(PathBuf, KvFile)>,
    echo: Vec<(String, String)>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let kv = KvFile::read(p).with_context(|| format!("reading config {}", p.display()))?;
                Some((p.to_path_buf(), kv))
            }
            None => None,
        };
        Ok(Settings { file, echo: Vec::new() })
    }

    pub fn config_path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    fn file_value(&self, key: &str) -> Option<&str> {
        self.file.as_ref().and_then(|(_, kv)| kv.get(key))
    }

    fn parse_one<T: FromStr>(&self, key: &str, raw: &str) -> Result<T>
    where
        T::Err: Display,
    {
        raw.trim().parse().map_err(|e| {
            let origin = self.config_path().map(|p| p.display().to_string()).unwrap_or_default();
            anyhow!("config {origin}: bad value {raw:?} for {key}: {e}")
        })
    }

    fn record(&mut self, key: &str, value: String) {
        self.echo.retain(|(k, _)| k != key);
        self.echo.push((key.to_string(), value));
    }

    pub fn opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file_value(key) {
                Some(raw) => Some(self.parse_one(key, raw)?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.record(key, v.to_string());
        }
        Ok(value)
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn require<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T::Err: Display,
    {
        match self.opt(key, flag)? {
            Some(v) => Ok(v),
            None => bail!("missing --{key} (flag or config key)"),
        }
    }

    pub fn list_opt<T: FromStr + Display + Clone>(&mut self, key: &str, flag: Option<Vec<T>>) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file_value(key).map(str::to_string) {
                Some(raw) => Some(
                    raw.split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| self.parse_one(key, s))
                        .collect::<Result<Vec<T>>>()?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.record(key, join(v));
        }
        Ok(value)
    }

    pub fn list<T: FromStr + Display + Clone>(&mut self, key: &str, flag: Option<Vec<T>>, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        let v = self.list_opt(key, flag)?.unwrap_or(default);
        self.record(key, join(&v));
        Ok(v)
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        let v = match flag {
            Some(p) => Some(p),
            None => self.file_value(key).map(PathBuf::from),
        };
        if let Some(p) = &v {
            self.record(key, p.display().to_string());
        }
        Ok(v)
    }

    pub fn echo(&self) -> &[(String, String)] {
        &self.echo
    }
}

pub fn join<T: Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_file(text: &str) -> (tempfile::TempDir, Settings) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        std::fs::write(&p, text).unwrap();
        let s = Settings::load(Some(&p)).unwrap();
        (dir, s)
    }

    #[test]
    fn flag_overrides_file() {
        let (_d, mut s) = with_file("reg=0.5\nmax-iters=20\n");
        assert_eq!(s.get("reg", Some(0.1), 1.0).unwrap(), 0.1);
        assert_eq!(s.get::<usize>("max-iters", None, 500).unwrap(), 20);
        assert_eq!(s.get::<u64>("seed", None, 3).unwrap(), 3);
        let keys: Vec<&str> = s.echo().iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["reg", "max-iters", "seed"]);
    }

    #[test]
    fn lists_and_bad_values() {
        let (_d, mut s) = with_file("m-grid=1, 2,4\nfolds=five\n");
        assert_eq!(s.list::<usize>("m-grid", None, vec![]).unwrap(), vec![1, 2, 4]);
        let err = s.get::<usize>("folds", None, 5).unwrap_err().to_string();
        assert!(err.contains("folds"), "{err}");
        assert!(s.require::<f64>("epsilon", None).is_err());
    }
}
