/// One named feature `φ(i, m)`.
#[derive(Clone, Copy)]
pub struct Feature {
    pub name: &'static str,
    eval: fn(f64, f64) -> f64,
}

impl Feature {
    pub fn eval(&self, i: f64, m: f64) -> f64 {
        (self.eval)(i, m)
    }
}

impl std::fmt::Debug for Feature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name)
    }
}

impl PartialEq for Feature {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

/// A fixed, versioned list of penalized features. The intercept is implicit
/// and never penalized.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBasis {
    version: &'static str,
    features: Vec<Feature>,
}

pub const DEFAULT_VERSION: &str = "v1";

/// `[i, i/m, i/√m, √i, ln(1+i), ln(1+i)/m, m, ln(1+m), 1/m, i/m²]`.
///
/// `i/m` is the log of the geometric bound `(1 − c₀/m)^i c₁` to first order.
pub fn default_basis() -> FeatureBasis {
    FeatureBasis {
        version: DEFAULT_VERSION,
        features: vec![
            Feature { name: "i", eval: |i, _| i },
            Feature { name: "i/m", eval: |i, m| i / m },
            Feature { name: "i/sqrt(m)", eval: |i, m| i / m.sqrt() },
            Feature { name: "sqrt(i)", eval: |i, _| i.sqrt() },
            Feature { name: "ln(1+i)", eval: |i, _| i.ln_1p() },
            Feature { name: "ln(1+i)/m", eval: |i, m| i.ln_1p() / m },
            Feature { name: "m", eval: |_, m| m },
            Feature { name: "ln(1+m)", eval: |_, m| m.ln_1p() },
            Feature { name: "1/m", eval: |_, m| 1.0 / m },
            Feature { name: "i/m^2", eval: |i, m| i / (m * m) },
        ],
    }
}

/// Order in which features are removed from a rank-deficient design, first
/// to last. `i/m` goes last.
pub const DROP_PRIORITY: [&str; 10] =
    ["i/m^2", "ln(1+i)/m", "i/sqrt(m)", "i", "1/m", "ln(1+m)", "m", "sqrt(i)", "ln(1+i)", "i/m"];

impl FeatureBasis {
    pub fn by_version(version: &str) -> Option<Self> {
        (version == DEFAULT_VERSION).then(default_basis)
    }

    pub fn version(&self) -> &'static str {
        self.version
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.features.iter().map(|f| f.name).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn eval(&self, i: f64, m: usize) -> Vec<f64> {
        let mf = m as f64;
        self.features.iter().map(|f| f.eval(i, mf)).collect()
    }
}
