//! Hyperparameter spaces and the unit-cube internal representation.
//!
//! Every numeric hyperparameter is mapped affinely onto `[0, 1]` (after a
//! `log2` transform for log-scaled ranges); categorical hyperparameters are
//! represented by their 0-based category index. Forest fitting, variance
//! decomposition and density estimation all operate on these internal values,
//! so the uniform measure over a numeric dimension is plain interval length
//! and a categorical subset `S` has measure `|S| / |categories|`.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Continuous { lo: f64, hi: f64, log: bool },
    Integer { lo: f64, hi: f64, log: bool },
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperparameterSpec {
    name: String,
    domain: Domain,
}

/// A single hyperparameter value in external units.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Int(i64),
    Cat(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(v) => write!(f, "{v}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

impl HyperparameterSpec {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64, log: bool) -> Result<Self> {
        Self::new(name, Domain::Continuous { lo, hi, log })
    }

    pub fn integer(name: impl Into<String>, lo: f64, hi: f64, log: bool) -> Result<Self> {
        Self::new(name, Domain::Integer { lo, hi, log })
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let categories = categories.into_iter().map(Into::into).collect();
        Self::new(name, Domain::Categorical { categories })
    }

    pub fn new(name: impl Into<String>, domain: Domain) -> Result<Self> {
        let spec = HyperparameterSpec {
            name: name.into(),
            domain,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let name = &self.name;
        if name.is_empty() {
            return Err(Error::InvalidSpec("empty hyperparameter name".into()));
        }
        if name.contains(',') || name.contains('*') {
            return Err(Error::InvalidSpec(format!(
                "{name}: names may not contain ',' or '*'"
            )));
        }
        match &self.domain {
            Domain::Continuous { lo, hi, log } | Domain::Integer { lo, hi, log } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidSpec(format!("{name}: bounds must be finite")));
                }
                if lo >= hi {
                    return Err(Error::InvalidSpec(format!(
                        "{name}: lo ({lo}) must be below hi ({hi})"
                    )));
                }
                if *log && *lo <= 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "{name}: log-scaled range needs lo > 0, got {lo}"
                    )));
                }
                if matches!(self.domain, Domain::Integer { .. })
                    && (lo.fract() != 0.0 || hi.fract() != 0.0)
                {
                    return Err(Error::InvalidSpec(format!(
                        "{name}: integer bounds must be whole numbers"
                    )));
                }
            }
            Domain::Categorical { categories } => {
                if categories.len() < 2 {
                    return Err(Error::InvalidSpec(format!(
                        "{name}: need at least 2 categories"
                    )));
                }
                let mut seen = HashSet::new();
                for c in categories {
                    if c.contains(',') {
                        return Err(Error::InvalidSpec(format!(
                            "{name}: category {c:?} contains ','"
                        )));
                    }
                    if !seen.insert(c.as_str()) {
                        return Err(Error::InvalidSpec(format!(
                            "{name}: duplicate category {c:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.domain, Domain::Categorical { .. })
    }

    /// Number of categories, or `None` for numeric hyperparameters.
    pub fn n_categories(&self) -> Option<usize> {
        match &self.domain {
            Domain::Categorical { categories } => Some(categories.len()),
            _ => None,
        }
    }

    fn numeric_transform(lo: f64, hi: f64, log: bool) -> (f64, f64) {
        if log {
            (lo.log2(), hi.log2())
        } else {
            (lo, hi)
        }
    }

    /// Maps an external value onto `[0, 1]`, or onto its category index.
    pub fn to_internal(&self, v: &Value) -> Result<f64> {
        let out_of_domain = || {
            let shown = match v {
                Value::Cat(s) => format!("{s:?}"),
                other => other.to_string(),
            };
            Error::OutOfDomain(format!("{}: {shown} not in {}", self.name, self))
        };
        match (&self.domain, v) {
            (Domain::Continuous { lo, hi, log }, Value::Real(x))
            | (Domain::Integer { lo, hi, log }, Value::Real(x)) => {
                self.numeric_to_internal(*lo, *hi, *log, *x).ok_or_else(out_of_domain)
            }
            (Domain::Continuous { lo, hi, log }, Value::Int(x))
            | (Domain::Integer { lo, hi, log }, Value::Int(x)) => self
                .numeric_to_internal(*lo, *hi, *log, *x as f64)
                .ok_or_else(out_of_domain),
            (Domain::Categorical { categories }, Value::Cat(s)) => categories
                .iter()
                .position(|c| c == s)
                .map(|i| i as f64)
                .ok_or_else(out_of_domain),
            _ => Err(out_of_domain()),
        }
    }

    fn numeric_to_internal(&self, lo: f64, hi: f64, log: bool, x: f64) -> Option<f64> {
        if !(x >= lo && x <= hi) {
            return None;
        }
        if matches!(self.domain, Domain::Integer { .. }) && x.fract() != 0.0 {
            return None;
        }
        let (a, b) = Self::numeric_transform(lo, hi, log);
        let t = if log { x.log2() } else { x };
        Some(((t - a) / (b - a)).clamp(0.0, 1.0))
    }

    /// Inverse of [`to_internal`](Self::to_internal). Integer kinds round half
    /// away from zero.
    pub fn from_internal(&self, u: f64) -> Result<Value> {
        match &self.domain {
            Domain::Continuous { lo, hi, log } | Domain::Integer { lo, hi, log } => {
                if !(0.0..=1.0).contains(&u) {
                    return Err(Error::OutOfDomain(format!(
                        "{}: internal value {u} outside [0, 1]",
                        self.name
                    )));
                }
                let x = if u == 0.0 {
                    *lo
                } else if u == 1.0 {
                    *hi
                } else {
                    let (a, b) = Self::numeric_transform(*lo, *hi, *log);
                    let t = a + u * (b - a);
                    let x = if *log { t.exp2() } else { t };
                    x.clamp(*lo, *hi)
                };
                Ok(match self.domain {
                    Domain::Integer { .. } => Value::Int(x.round().clamp(*lo, *hi) as i64),
                    _ => Value::Real(x),
                })
            }
            Domain::Categorical { categories } => {
                let idx = u as usize;
                if u < 0.0 || u.fract() != 0.0 || idx >= categories.len() {
                    return Err(Error::OutOfDomain(format!(
                        "{}: category index {u} out of range",
                        self.name
                    )));
                }
                Ok(Value::Cat(categories[idx].clone()))
            }
        }
    }

    /// Parses a textual field (CSV cell) into a value of this spec's kind.
    pub fn parse_value(&self, field: &str) -> Result<Value> {
        let field = field.trim();
        let bad = |what: &str| Error::OutOfDomain(format!("{}: {what} {field:?}", self.name));
        let value = match &self.domain {
            Domain::Continuous { .. } => Value::Real(field.parse().map_err(|_| bad("not a number"))?),
            Domain::Integer { .. } => {
                let x: f64 = field.parse().map_err(|_| bad("not a number"))?;
                if x.fract() != 0.0 || !x.is_finite() {
                    return Err(bad("not a whole number"));
                }
                Value::Int(x as i64)
            }
            Domain::Categorical { .. } => Value::Cat(field.to_string()),
        };
        self.to_internal(&value)?;
        Ok(value)
    }

}

impl fmt::Display for HyperparameterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.domain {
            Domain::Continuous { lo, hi, log } | Domain::Integer { lo, hi, log } => {
                write!(f, "[{lo}, {hi}]")?;
                if *log {
                    f.write_str(" (log-scale)")?;
                }
                Ok(())
            }
            Domain::Categorical { categories } => write!(f, "{{{}}}", categories.join(", ")),
        }
    }
}

/// One value per spec, in space order, in external units.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: Vec<Value>,
}

impl Config {
    pub fn new(values: Vec<Value>) -> Self {
        Config { values }
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn get(&self, dim: usize) -> &Value {
        &self.values[dim]
    }

    pub fn set(&mut self, dim: usize, value: Value) {
        self.values[dim] = value;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Sorted, duplicate-free set of hyperparameter indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubsetSelector(Vec<usize>);

impl SubsetSelector {
    pub fn new(mut dims: Vec<usize>, space: &ConfigSpace) -> Result<Self> {
        dims.sort_unstable();
        let n = dims.len();
        dims.dedup();
        if dims.len() != n {
            return Err(Error::InvalidArgument("duplicate index in subset".into()));
        }
        if let Some(&bad) = dims.iter().find(|&&d| d >= space.len()) {
            return Err(Error::InvalidArgument(format!(
                "subset index {bad} out of range for {} hyperparameters",
                space.len()
            )));
        }
        Ok(SubsetSelector(dims))
    }

    /// Builds a selector without range checks; `dims` must be sorted and unique.
    #[cfg(test)]
    pub(crate) fn from_sorted(dims: Vec<usize>) -> Self {
        debug_assert!(dims.windows(2).all(|w| w[0] < w[1]));
        SubsetSelector(dims)
    }

    pub fn empty() -> Self {
        SubsetSelector(Vec::new())
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, dim: usize) -> bool {
        self.0.binary_search(&dim).is_ok()
    }

    /// Report key: spec names joined with `*` in space order.
    pub fn key(&self, space: &ConfigSpace) -> String {
        self.0
            .iter()
            .map(|&d| space.spec(d).name())
            .collect::<Vec<_>>()
            .join("*")
    }

    /// All subsets of `0..n` with `1 <= |U| <= max_order`, ordered by size and
    /// then lexicographically.
    pub fn all_up_to(n: usize, max_order: usize) -> Vec<SubsetSelector> {
        let mut out = Vec::new();
        for order in 1..=max_order.min(n) {
            let mut combo: Vec<usize> = (0..order).collect();
            loop {
                out.push(SubsetSelector(combo.clone()));
                // advance to next combination
                let mut i = order;
                while i > 0 && combo[i - 1] == n - order + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                combo[i - 1] += 1;
                for j in i..order {
                    combo[j] = combo[j - 1] + 1;
                }
            }
        }
        out
    }

    /// Proper subsets (excluding the empty set and `self`).
    pub fn proper_subsets(&self) -> Vec<SubsetSelector> {
        let k = self.0.len();
        let mut out = Vec::new();
        for mask in 1..(1u32 << k) - 1 {
            let dims = (0..k)
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| self.0[b])
                .collect();
            out.push(SubsetSelector(dims));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSpace {
    specs: Vec<HyperparameterSpec>,
}

impl ConfigSpace {
    pub fn new(specs: Vec<HyperparameterSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidSpec("space has no hyperparameters".into()));
        }
        let mut seen = HashSet::new();
        for s in &specs {
            if !seen.insert(s.name()) {
                return Err(Error::InvalidSpec(format!("duplicate name {:?}", s.name())));
            }
        }
        Ok(ConfigSpace { specs })
    }

    pub fn specs(&self) -> &[HyperparameterSpec] {
        &self.specs
    }

    pub fn spec(&self, dim: usize) -> &HyperparameterSpec {
        &self.specs[dim]
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name() == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.specs.iter().map(|s| s.name())
    }

    pub fn validate(&self, config: &Config) -> Result<()> {
        self.to_internal(config).map(|_| ())
    }

    pub fn to_internal(&self, config: &Config) -> Result<Vec<f64>> {
        if config.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "config has {} values, space has {}",
                config.len(),
                self.len()
            )));
        }
        self.specs
            .iter()
            .zip(config.values())
            .map(|(s, v)| s.to_internal(v))
            .collect()
    }

    pub fn from_internal(&self, point: &[f64]) -> Result<Config> {
        if point.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, space has {}",
                point.len(),
                self.len()
            )));
        }
        let values = self
            .specs
            .iter()
            .zip(point)
            .map(|(s, &u)| s.from_internal(u))
            .collect::<Result<_>>()?;
        Ok(Config::new(values))
    }

    /// Uniform draw in internal space: `U[0,1)` per numeric dimension, a
    /// uniformly chosen index per categorical one.
    pub fn sample_internal<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.specs
            .iter()
            .map(|s| match s.n_categories() {
                Some(c) => rng.random_range(0..c) as f64,
                None => rng.random::<f64>(),
            })
            .collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Config {
        let point = self.sample_internal(rng);
        self.from_internal(&point)
            .expect("uniform draws are inside the unit cube")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SpaceFile =
            serde_json::from_str(text).map_err(|e| Error::parse(format!("space file line {}, column {}", e.line(), e.column()), e))?;
        let specs = file
            .hyperparameters
            .into_iter()
            .enumerate()
            .map(|(i, raw)| raw.into_spec(i))
            .collect::<Result<Vec<_>>>()?;
        ConfigSpace::new(specs)
    }

    pub fn to_json_string(&self) -> String {
        let file = SpaceFile {
            hyperparameters: self.specs.iter().map(RawSpec::from_spec).collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("space serializes");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    /// Loads `arg` as a file path, falling back to a shipped space name such
    /// as `svm_rbf`.
    pub fn load_or_shipped(arg: &str) -> Result<Self> {
        let path = Path::new(arg);
        if path.exists() {
            return Self::load(path);
        }
        shipped(arg.trim_end_matches(".json")).ok_or_else(|| {
            Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or shipped space"),
            )
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceFile {
    hyperparameters: Vec<RawSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: String,
    #[serde(rename = "type")]
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
}

impl RawSpec {
    fn into_spec(self, index: usize) -> Result<HyperparameterSpec> {
        let ctx = |field: &str| format!("hyperparameters[{index}] ({}).{field}", self.name);
        let domain = match self.kind.as_str() {
            "continuous" | "integer" => {
                if self.categories.is_some() {
                    return Err(Error::parse(ctx("categories"), "only allowed for categorical"));
                }
                let lo = self.lo.ok_or_else(|| Error::parse(ctx("lo"), "missing"))?;
                let hi = self.hi.ok_or_else(|| Error::parse(ctx("hi"), "missing"))?;
                let log = self.log.unwrap_or(false);
                if self.kind == "integer" {
                    Domain::Integer { lo, hi, log }
                } else {
                    Domain::Continuous { lo, hi, log }
                }
            }
            "categorical" => {
                for (field, present) in [
                    ("lo", self.lo.is_some()),
                    ("hi", self.hi.is_some()),
                    ("log", self.log.is_some()),
                ] {
                    if present {
                        return Err(Error::parse(ctx(field), "only allowed for numeric types"));
                    }
                }
                let categories = self
                    .categories
                    .clone()
                    .ok_or_else(|| Error::parse(ctx("categories"), "missing"))?;
                Domain::Categorical { categories }
            }
            other => {
                return Err(Error::parse(
                    ctx("type"),
                    format!("expected continuous|integer|categorical, got {other:?}"),
                ))
            }
        };
        HyperparameterSpec::new(self.name, domain)
    }

    fn from_spec(spec: &HyperparameterSpec) -> Self {
        let mut raw = RawSpec {
            name: spec.name.clone(),
            kind: String::new(),
            lo: None,
            hi: None,
            log: None,
            categories: None,
        };
        match &spec.domain {
            Domain::Continuous { lo, hi, log } | Domain::Integer { lo, hi, log } => {
                raw.kind = if matches!(spec.domain, Domain::Integer { .. }) {
                    "integer".into()
                } else {
                    "continuous".into()
                };
                raw.lo = Some(*lo);
                raw.hi = Some(*hi);
                raw.log = Some(*log);
            }
            Domain::Categorical { categories } => {
                raw.kind = "categorical".into();
                raw.categories = Some(categories.clone());
            }
        }
        raw
    }
}

/// Space definitions bundled with the crate, by file stem.
pub const SHIPPED_SPACES: &[(&str, &str)] = &[
    ("svm_rbf", include_str!("../spaces/svm_rbf.json")),
    ("svm_sigmoid", include_str!("../spaces/svm_sigmoid.json")),
    ("random_forest", include_str!("../spaces/random_forest.json")),
    ("adaboost", include_str!("../spaces/adaboost.json")),
];

pub fn shipped(name: &str) -> Option<ConfigSpace> {
    SHIPPED_SPACES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ConfigSpace::from_json_str(text).expect("shipped spaces are valid"))
}
