//! Data-driven 1-D sampling priors pooled from the best configurations of
//! many datasets.
//!
//! Numeric hyperparameters get a Gaussian KDE in internal space with each
//! kernel truncated to `[0, 1]` and renormalized; categorical ones get
//! Laplace-smoothed frequencies.

use std::f64::consts::SQRT_2;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::configspace::{Config, ConfigSpace, Value};
use crate::error::{Error, Result};
use crate::rundata::RunCollection;

pub const MIN_BANDWIDTH: f64 = 1e-3;
pub const DEFAULT_TOP_N: usize = 10;
pub const DEFAULT_SMOOTHING: f64 = 1.0;
/// Jitter redraws before a kernel sample is clamped into `[0, 1]`.
pub const MAX_REJECTIONS: usize = 100;

const SINGLE_DATASET_WARNING: &str = "only one dataset contributes to this prior";

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Silverman's rule of thumb `1.06 σ̂ m^(-1/5)`, floored at [`MIN_BANDWIDTH`].
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let m = values.len();
    if m < 2 {
        return MIN_BANDWIDTH;
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (1.06 * var.sqrt() * (m as f64).powf(-0.2)).max(MIN_BANDWIDTH)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPrior {
    support: Vec<f64>,
    bandwidth: f64,
    /// Mass of each kernel inside `[0, 1]`.
    norms: Vec<f64>,
}

impl ContinuousPrior {
    pub fn new(support: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidArgument("KDE needs at least one support point".into()));
        }
        if let Some(s) = support.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::OutOfDomain(format!("support point {s} outside [0, 1]")));
        }
        if !(bandwidth >= MIN_BANDWIDTH) || !bandwidth.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bandwidth {bandwidth} below minimum {MIN_BANDWIDTH}"
            )));
        }
        let norms = support
            .iter()
            .map(|&s| std_normal_cdf((1.0 - s) / bandwidth) - std_normal_cdf(-s / bandwidth))
            .collect();
        Ok(ContinuousPrior {
            support,
            bandwidth,
            norms,
        })
    }

    /// KDE over `values` with the Silverman bandwidth.
    pub fn fit(values: Vec<f64>) -> Result<Self> {
        let h = silverman_bandwidth(&values);
        Self::new(values, h)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn pdf(&self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        let h = self.bandwidth;
        self.support
            .iter()
            .zip(&self.norms)
            .map(|(&s, &z)| std_normal_pdf((u - s) / h) / (h * z))
            .sum::<f64>()
            / self.support.len() as f64
    }

    /// Picks a support point, then redraws Gaussian jitter until the value
    /// lands in `[0, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.support[rng.random_range(0..self.support.len())];
        let mut x = s;
        for _ in 0..MAX_REJECTIONS {
            let z: f64 = rng.sample(StandardNormal);
            x = s + self.bandwidth * z;
            if (0.0..=1.0).contains(&x) {
                return x;
            }
        }
        x.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalPrior {
    probs: Vec<f64>,
}

impl CategoricalPrior {
    /// `(count_c + α) / (total + α·|C|)`.
    pub fn from_counts(counts: &[usize], alpha: f64) -> Result<Self> {
        if counts.is_empty() || alpha < 0.0 {
            return Err(Error::InvalidArgument("need categories and alpha >= 0".into()));
        }
        let total: usize = counts.iter().sum();
        let denom = total as f64 + alpha * counts.len() as f64;
        if denom <= 0.0 {
            return Err(Error::InvalidArgument("no counts and no smoothing".into()));
        }
        Ok(CategoricalPrior {
            probs: counts.iter().map(|&c| (c as f64 + alpha) / denom).collect(),
        })
    }

    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "category probabilities must be non-negative and sum to 1, got {sum}"
            )));
        }
        Ok(CategoricalPrior { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DimPrior {
    Continuous(ContinuousPrior),
    Categorical(CategoricalPrior),
}

impl DimPrior {
    /// Density (numeric) or probability mass (categorical) at an internal value.
    pub fn density(&self, u: f64) -> f64 {
        match self {
            DimPrior::Continuous(k) => k.pdf(u),
            DimPrior::Categorical(c) => {
                if u >= 0.0 && u.fract() == 0.0 && (u as usize) < c.probs.len() {
                    c.probs[u as usize]
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DimPrior::Continuous(k) => k.sample(rng),
            DimPrior::Categorical(c) => c.sample(rng) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorModel {
    dims: Vec<DimPrior>,
    provenance: Vec<String>,
    warnings: Vec<String>,
}

impl PriorModel {
    pub fn new(space: &ConfigSpace, dims: Vec<DimPrior>, provenance: Vec<String>) -> Result<Self> {
        if dims.len() != space.len() {
            return Err(Error::InvalidArgument(format!(
                "{} priors for {} hyperparameters",
                dims.len(),
                space.len()
            )));
        }
        for (spec, prior) in space.specs().iter().zip(&dims) {
            let ok = match (spec.n_categories(), prior) {
                (None, DimPrior::Continuous(_)) => true,
                (Some(c), DimPrior::Categorical(p)) => p.probs.len() == c,
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "prior kind does not match hyperparameter {}",
                    spec.name()
                )));
            }
        }
        if provenance.is_empty() {
            return Err(Error::InvalidArgument("prior provenance is empty".into()));
        }
        let warnings = if provenance.len() == 1 {
            vec![SINGLE_DATASET_WARNING.to_string()]
        } else {
            Vec::new()
        };
        Ok(PriorModel {
            dims,
            provenance,
            warnings,
        })
    }

    pub fn dims(&self) -> &[DimPrior] {
        &self.dims
    }

    pub fn dim(&self, j: usize) -> &DimPrior {
        &self.dims[j]
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Density of hyperparameter `j` at an external value, in internal units.
    pub fn pdf(&self, space: &ConfigSpace, j: usize, value: &Value) -> Result<f64> {
        let u = space.spec(j).to_internal(value)?;
        Ok(self.dims[j].density(u))
    }

    /// Density at an internal value; errors when `u` is outside the domain.
    pub fn pdf_internal(&self, space: &ConfigSpace, j: usize, u: f64) -> Result<f64> {
        let spec = space.spec(j);
        let valid = match spec.n_categories() {
            None => (0.0..=1.0).contains(&u),
            Some(c) => u >= 0.0 && u.fract() == 0.0 && (u as usize) < c,
        };
        if !valid {
            return Err(Error::OutOfDomain(format!("{}: internal value {u}", spec.name())));
        }
        Ok(self.dims[j].density(u))
    }

    pub fn sample_internal<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.dims.iter().map(|d| d.sample(rng)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, space: &ConfigSpace, rng: &mut R) -> Config {
        space
            .from_internal(&self.sample_internal(rng))
            .expect("prior samples lie in the unit cube")
    }

    pub fn to_json_string(&self, space: &ConfigSpace) -> String {
        let hyperparameters = space
            .specs()
            .iter()
            .zip(&self.dims)
            .map(|(spec, d)| match d {
                DimPrior::Continuous(k) => PriorDimFile::Kde {
                    name: spec.name().to_string(),
                    support: k.support.clone(),
                    bandwidth: k.bandwidth,
                },
                DimPrior::Categorical(c) => {
                    let cats = match spec.domain() {
                        crate::configspace::Domain::Categorical { categories } => categories,
                        _ => unreachable!("checked at construction"),
                    };
                    PriorDimFile::Categorical {
                        name: spec.name().to_string(),
                        probs: cats
                            .iter()
                            .zip(&c.probs)
                            .map(|(k, p)| (k.clone(), serde_json::Value::from(*p)))
                            .collect(),
                    }
                }
            })
            .collect();
        let file = PriorFile {
            hyperparameters,
            provenance: self.provenance.clone(),
            warnings: self.warnings.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("prior serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str, space: &ConfigSpace) -> Result<Self> {
        let file: PriorFile = serde_json::from_str(text).map_err(|e| {
            Error::parse(format!("prior file line {}, column {}", e.line(), e.column()), e)
        })?;
        if file.hyperparameters.len() != space.len() {
            return Err(Error::parse(
                "prior file",
                format!(
                    "{} hyperparameters for a space of {}",
                    file.hyperparameters.len(),
                    space.len()
                ),
            ));
        }
        let mut dims = Vec::with_capacity(space.len());
        for (spec, d) in space.specs().iter().zip(file.hyperparameters) {
            let prior = match d {
                PriorDimFile::Kde {
                    name,
                    support,
                    bandwidth,
                } if name == spec.name() => DimPrior::Continuous(ContinuousPrior::new(support, bandwidth)?),
                PriorDimFile::Categorical { name, probs } if name == spec.name() => {
                    let cats = match spec.domain() {
                        crate::configspace::Domain::Categorical { categories } => categories,
                        _ => {
                            return Err(Error::parse(
                                format!("prior for {name}"),
                                "categorical prior on a numeric hyperparameter",
                            ))
                        }
                    };
                    let p = cats
                        .iter()
                        .map(|c| {
                            probs.get(c).and_then(|v| v.as_f64()).ok_or_else(|| {
                                Error::parse(format!("prior for {name}"), format!("missing probability for {c:?}"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    DimPrior::Categorical(CategoricalPrior::from_probs(p)?)
                }
                _ => {
                    return Err(Error::parse(
                        "prior file",
                        format!("entries must follow space order; expected {}", spec.name()),
                    ))
                }
            };
            dims.push(prior);
        }
        PriorModel::new(space, dims, file.provenance)
    }

    pub fn load(path: impl AsRef<Path>, space: &ConfigSpace) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, space)
    }

    pub fn save(&self, path: impl AsRef<Path>, space: &ConfigSpace) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string(space)).map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorFile {
    hyperparameters: Vec<PriorDimFile>,
    provenance: Vec<String>,
    #[serde(default)]
    warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum PriorDimFile {
    Kde {
        name: String,
        support: Vec<f64>,
        bandwidth: f64,
    },
    Categorical {
        name: String,
        probs: serde_json::Map<String, serde_json::Value>,
    },
}

/// Pools the top `n` configurations of every dataset except `exclude` and
/// fits one prior per hyperparameter.
pub fn build_prior(
    rc: &RunCollection,
    space: &ConfigSpace,
    n: usize,
    exclude: Option<&str>,
) -> Result<PriorModel> {
    if n == 0 {
        return Err(Error::InvalidArgument("top-n must be >= 1".into()));
    }
    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); space.len()];
    let mut provenance = Vec::new();
    for d in rc.iter().filter(|d| Some(d.dataset_id()) != exclude) {
        for config in d.top_n_configs(n) {
            for (j, u) in space.to_internal(config)?.into_iter().enumerate() {
                pooled[j].push(u);
            }
        }
        provenance.push(d.dataset_id().to_string());
    }
    if provenance.is_empty() {
        return Err(Error::EmptyCollection(match exclude {
            Some(id) => format!("no datasets besides {id} to build a prior from"),
            None => "no datasets to build a prior from".into(),
        }));
    }
    let dims = space
        .specs()
        .iter()
        .zip(pooled)
        .map(|(spec, values)| match spec.n_categories() {
            None => ContinuousPrior::fit(values).map(DimPrior::Continuous),
            Some(c) => {
                let mut counts = vec![0usize; c];
                for v in values {
                    counts[v as usize] += 1;
                }
                CategoricalPrior::from_counts(&counts, DEFAULT_SMOOTHING).map(DimPrior::Categorical)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    PriorModel::new(space, dims, provenance)
}
