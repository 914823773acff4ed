use std::path::Path;

use super::{ConvergenceError, FeatureBasis, FitMethod, TrainingSet};
use crate::kv::{split_floats, KvFile};

/// One active feature with its standardization and coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub name: String,
    /// Coefficient on the standardized feature `(φ − mean) / scale`.
    pub coef: f64,
    pub mean: f64,
    pub scale: f64,
    index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceModel {
    basis: FeatureBasis,
    terms: Vec<Term>,
    pub intercept: f64,
    pub p_star: f64,
    pub p_star_gap: f64,
    pub chosen_reg: f64,
    pub method: FitMethod,
    pub warnings: Vec<String>,
    pub algorithm: Option<String>,
    pub dataset_hash: Option<String>,
    /// Whether the predicted curve is non-increasing in `i` for every
    /// training `m` over the training range. `None` if never checked.
    pub monotone_in_i: Option<bool>,
}

impl ConvergenceModel {
    /// `terms` gives `(name, coef, mean, scale)`.
    pub fn from_terms(
        basis: FeatureBasis,
        terms: &[(&str, f64, f64, f64)],
        intercept: f64,
    ) -> Result<Self, ConvergenceError> {
        let mut out = Vec::with_capacity(terms.len());
        for &(name, coef, mean, scale) in terms {
            let index = basis
                .index_of(name)
                .ok_or_else(|| ConvergenceError::InvalidModel(format!("feature {name:?} not in basis {}", basis.version())))?;
            if !(scale > 0.0) || !scale.is_finite() || !mean.is_finite() || !coef.is_finite() {
                return Err(ConvergenceError::InvalidModel(format!("bad term {name}: coef={coef} mean={mean} scale={scale}")));
            }
            if out.iter().any(|t: &Term| t.index == index) {
                return Err(ConvergenceError::InvalidModel(format!("feature {name:?} listed twice")));
            }
            out.push(Term { name: name.to_string(), coef, mean, scale, index });
        }
        out.sort_by_key(|t| t.index);
        if !intercept.is_finite() {
            return Err(ConvergenceError::InvalidModel(format!("intercept {intercept}")));
        }
        Ok(ConvergenceModel {
            basis,
            terms: out,
            intercept,
            p_star: 0.0,
            p_star_gap: 0.0,
            chosen_reg: 0.0,
            method: FitMethod::Given,
            warnings: Vec::new(),
            algorithm: None,
            dataset_hash: None,
            monotone_in_i: None,
        })
    }

    /// `ln g = intercept + Σ coef·φ` on raw, unstandardized features.
    pub fn from_raw(basis: FeatureBasis, coefs: &[(&str, f64)], intercept: f64) -> Result<Self, ConvergenceError> {
        let terms: Vec<_> = coefs.iter().map(|&(n, c)| (n, c, 0.0, 1.0)).collect();
        Self::from_terms(basis, &terms, intercept)
    }

    pub fn constant(basis: FeatureBasis, intercept: f64) -> Self {
        Self::from_terms(basis, &[], intercept).expect("constant model is valid")
    }

    pub fn basis(&self) -> &FeatureBasis {
        &self.basis
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn coef(&self, name: &str) -> f64 {
        self.terms.iter().find(|t| t.name == name).map_or(0.0, |t| t.coef)
    }

    pub fn nonzero(&self) -> usize {
        self.terms.iter().filter(|t| t.coef != 0.0).count()
    }

    pub fn set_coef(&mut self, name: &str, coef: f64) -> Result<(), ConvergenceError> {
        let t = self
            .terms
            .iter_mut()
            .find(|t| t.name == name)
            .ok_or_else(|| ConvergenceError::InvalidModel(format!("feature {name:?} is not active")))?;
        t.coef = coef;
        Ok(())
    }

    /// Standardized value of an active feature at `(i, m)`.
    pub fn standardized(&self, name: &str, i: f64, m: usize) -> Option<f64> {
        let t = self.terms.iter().find(|t| t.name == name)?;
        Some(self.z(t, i, m))
    }

    fn z(&self, t: &Term, i: f64, m: usize) -> f64 {
        (self.basis.features()[t.index].eval(i, m as f64) - t.mean) / t.scale
    }

    /// Predicted `ln(P − p*)`. Real-valued `i` is allowed.
    pub fn predict_ln(&self, i: f64, m: usize) -> f64 {
        self.terms.iter().fold(self.intercept, |acc, t| acc + t.coef * self.z(t, i, m))
    }

    /// Predicted sub-optimality `P − p*`.
    pub fn predict_g(&self, i: f64, m: usize) -> f64 {
        self.predict_ln(i, m).exp()
    }

    /// Predicted primal objective `p* + g`.
    pub fn predict_primal(&self, i: f64, m: usize) -> f64 {
        self.p_star + self.predict_g(i, m)
    }

    pub(crate) fn check_monotone(&mut self, training: &TrainingSet) {
        let max_i = training.rows.iter().map(|r| r.i).fold(1.0, f64::max) as usize;
        let mono = training.distinct_m().into_iter().all(|m| {
            let mut prev = self.predict_ln(1.0, m);
            (2..=max_i).all(|i| {
                let cur = self.predict_ln(i as f64, m);
                let ok = cur <= prev + 1e-12 * prev.abs().max(1.0);
                prev = cur;
                ok
            })
        });
        if !mono {
            self.warnings.push("predicted ln sub-optimality increases in i for some training m".into());
        }
        self.monotone_in_i = Some(mono);
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("basis_version", self.basis.version())
            .set("method", self.method.as_str())
            .set("intercept", self.intercept)
            .set("p_star", self.p_star)
            .set("p_star_gap", self.p_star_gap)
            .set("chosen_reg", self.chosen_reg);
        if let Some(a) = &self.algorithm {
            kv.set("algorithm", a);
        }
        if let Some(h) = &self.dataset_hash {
            kv.set("dataset_hash", h);
        }
        if let Some(m) = self.monotone_in_i {
            kv.set("monotone_in_i", m);
        }
        for t in self.terms.iter().filter(|t| t.coef != 0.0) {
            kv.set(format!("coef.{}", t.name), t.coef);
        }
        for t in &self.terms {
            kv.set(format!("std.{}", t.name), format!("{},{}", t.mean, t.scale));
        }
        for (k, w) in self.warnings.iter().enumerate() {
            kv.set(format!("warning.{k}"), w);
        }
        kv
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self, ConvergenceError> {
        let version = kv.require("basis_version")?;
        let basis = FeatureBasis::by_version(version)
            .ok_or_else(|| ConvergenceError::InvalidModel(format!("unknown basis version {version:?}")))?;
        let mut terms = Vec::new();
        for (name, raw) in kv.with_prefix("std.") {
            let ms = split_floats(&format!("std.{name}"), raw)?;
            if ms.len() != 2 {
                return Err(ConvergenceError::InvalidModel(format!("std.{name} needs mean,scale")));
            }
            let coef = kv.parse_opt::<f64>(&format!("coef.{name}"))?.unwrap_or(0.0);
            terms.push((name, coef, ms[0], ms[1]));
        }
        for (name, _) in kv.with_prefix("coef.") {
            if !terms.iter().any(|t| t.0 == name) {
                return Err(ConvergenceError::InvalidModel(format!("coef.{name} has no std.{name} entry")));
            }
        }
        let mut model = Self::from_terms(basis, &terms, kv.parse("intercept")?)?;
        model.method = kv.require("method")?.parse().map_err(ConvergenceError::InvalidModel)?;
        model.p_star = kv.parse("p_star")?;
        model.p_star_gap = kv.parse("p_star_gap")?;
        model.chosen_reg = kv.parse("chosen_reg")?;
        model.algorithm = kv.get("algorithm").map(str::to_string);
        model.dataset_hash = kv.get("dataset_hash").map(str::to_string);
        model.monotone_in_i = kv.parse_opt("monotone_in_i")?;
        model.warnings = kv.with_prefix("warning.").map(|(_, w)| w.to_string()).collect();
        if !(model.p_star_gap >= 0.0) {
            return Err(ConvergenceError::InvalidModel(format!("p_star_gap {} < 0", model.p_star_gap)));
        }
        Ok(model)
    }

    pub fn read(path: &Path) -> Result<Self, ConvergenceError> {
        Self::from_kv(&KvFile::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), ConvergenceError> {
        Ok(self.to_kv().write(path)?)
    }
}
