//! End-to-end studies: importance across datasets, fixed-hyperparameter
//! verification and leave-one-dataset-out prior comparison, plus their
//! JSON/CSV reports.
//!
//! Datasets are processed in parallel and assembled in `dataset_id` order, so
//! reports do not depend on the thread count.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value as Json};

use crate::configspace::{Config, ConfigSpace, SubsetSelector, Value};
use crate::error::{Error, Result};
use crate::fanova::{importance, ImportanceFragment};
use crate::forest::{ForestSettings, RegressionForest};
use crate::optimize::{
    hyperband, verify_importance, Fidelity, HyperbandSettings, Objective, OptResult, Sampler,
    SurrogateObjective, Verification,
};
use crate::priors::{build_prior, PriorModel, DEFAULT_TOP_N};
use crate::rundata::{DatasetRuns, RunCollection};
use crate::stats::{nemenyi_test, rank_row, spearman, RankReport, ScoreMatrix};

/// JSON schemas for every emitted report, keyed by file name.
pub const REPORT_SCHEMAS: &[(&str, &str)] = &[
    ("importance.json", include_str!("../schemas/importance.schema.json")),
    ("verification.json", include_str!("../schemas/verification.schema.json")),
    ("comparison.json", include_str!("../schemas/comparison.schema.json")),
    ("optimize.json", include_str!("../schemas/optimize.schema.json")),
    ("prior.json", include_str!("../schemas/prior.schema.json")),
    ("space.json", include_str!("../schemas/space.schema.json")),
];

/// Significance level used by every study.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown format {other:?} (expected json or csv)"
            ))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFile {
    pub name: String,
    pub contents: String,
}

/// Anything that renders to a set of report files. The main report is
/// `<kind>.json` or `<kind>.csv` depending on the format; plot data is
/// always CSV.
pub trait Study {
    fn report_files(&self, format: Format) -> Result<Vec<ReportFile>>;
}

pub fn emit_reports(study: &dyn Study, out_dir: impl AsRef<Path>, format: Format) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for file in study.report_files(format)? {
        let path = dir.join(&file.name);
        fs::write(&path, file.contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn json_file(name: &str, value: &impl Serialize) -> Result<ReportFile> {
    let mut contents = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("cannot serialize {name}: {e}")))?;
    contents.push('\n');
    Ok(ReportFile {
        name: name.into(),
        contents,
    })
}

fn csv_file(name: &str, header: &[String], rows: &[Vec<String>]) -> Result<ReportFile> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let encode = |e: csv::Error| Error::InvalidArgument(format!("cannot encode {name}: {e}"));
    w.write_record(header).map_err(encode)?;
    for row in rows {
        w.write_record(row).map_err(encode)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("cannot encode {name}: {e}")))?;
    Ok(ReportFile {
        name: name.into(),
        contents: String::from_utf8(bytes).expect("csv output is UTF-8"),
    })
}

fn header<'a>(first: impl IntoIterator<Item = &'a str>, rest: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    first.into_iter().chain(rest).map(String::from).collect()
}

fn ranks_file(report: &RankReport) -> ReportFile {
    ReportFile {
        name: "ranks.csv".into(),
        contents: report.ranks_csv(),
    }
}

/// Nemenyi over `methods`, or a warning when `k` is outside the table.
fn rank_methods(
    methods: Vec<String>,
    rows: Vec<String>,
    scores: Vec<Vec<f64>>,
    warnings: &mut Vec<String>,
) -> Result<Option<RankReport>> {
    let sm = ScoreMatrix::new(methods, rows, scores)?;
    match nemenyi_test(&sm, ALPHA) {
        Ok(r) => {
            if r.low_n {
                warnings.push(format!(
                    "only {} rows ranked; Friedman/Nemenyi results are unreliable",
                    r.n_datasets
                ));
            }
            Ok(Some(r))
        }
        Err(Error::Unsupported(msg)) => {
            warnings.push(format!("rank test skipped: {msg}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

pub fn value_json(v: &Value) -> Json {
    match v {
        Value::Real(x) => json!(x),
        Value::Int(i) => json!(i),
        Value::Cat(s) => json!(s),
    }
}

pub fn config_json(space: &ConfigSpace, config: &Config) -> Json {
    Json::Object(
        space
            .names()
            .zip(config.values())
            .map(|(n, v)| (n.to_string(), value_json(v)))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceSettings {
    pub forest: ForestSettings,
    pub max_order: usize,
    /// Number of interaction subsets listed in the report.
    pub top_interactions: usize,
}

impl Default for ImportanceSettings {
    fn default() -> Self {
        ImportanceSettings {
            forest: ForestSettings::default(),
            max_order: 2,
            top_interactions: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub dataset_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interaction {
    pub subset: String,
    pub mean_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceStudy {
    pub hyperparameters: Vec<String>,
    pub settings: ImportanceSettings,
    pub datasets: Vec<ImportanceFragment>,
    pub skipped: Vec<Skipped>,
    /// Mean fraction per subset key, in size-then-lexicographic order.
    pub mean_fractions: Map<String, Json>,
    pub top_interactions: Vec<Interaction>,
    /// Hyperparameters ranked per dataset by singleton fraction (rank 1 =
    /// largest fraction).
    pub ranks: Option<RankReport>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub subsets: Vec<String>,
    #[serde(skip)]
    pub singleton: Vec<Vec<f64>>,
}

impl ImportanceStudy {
    pub fn mean_singleton_fractions(&self) -> Vec<f64> {
        (0..self.hyperparameters.len())
            .map(|j| self.singleton.iter().map(|r| r[j]).sum::<f64>() / self.singleton.len() as f64)
            .collect()
    }
}

/// Fits a forest per dataset and decomposes it. Datasets whose model is
/// constant are skipped and reported, not fatal.
pub fn run_importance_study(
    rc: &RunCollection,
    space: &ConfigSpace,
    settings: &ImportanceSettings,
) -> Result<ImportanceStudy> {
    settings.forest.validate()?;
    if !(1..=3).contains(&settings.max_order) {
        return Err(Error::InvalidArgument(format!(
            "max order must be 1, 2 or 3, got {}",
            settings.max_order
        )));
    }
    let datasets: Vec<&DatasetRuns> = rc.iter().collect();
    let outcomes: Vec<Result<std::result::Result<(ImportanceFragment, Vec<f64>), Skipped>>> = datasets
        .par_iter()
        .map(|d| {
            let skip = |e: Error| Skipped {
                dataset_id: d.dataset_id().into(),
                reason: e.to_string(),
            };
            let forest = match RegressionForest::fit(d, space, &settings.forest) {
                Ok(f) => f,
                Err(e @ (Error::ConstantTarget | Error::TooFewSamples(_))) => return Ok(Err(skip(e))),
                Err(e) => return Err(e),
            };
            match importance(&forest, settings.max_order) {
                Ok(vd) => Ok(Ok((vd.fragment(d.dataset_id(), space), vd.singleton_fractions()))),
                Err(e @ Error::ConstantModel) => Ok(Err(skip(e))),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut fragments = Vec::new();
    let mut singleton = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o? {
            Ok((frag, single)) => {
                fragments.push(frag);
                singleton.push(single);
            }
            Err(s) => skipped.push(s),
        }
    }
    if fragments.is_empty() {
        return Err(Error::EmptyCollection("every dataset yielded a constant model".into()));
    }
    let subsets: Vec<String> = SubsetSelector::all_up_to(space.len(), settings.max_order)
        .iter()
        .map(|s| s.key(space))
        .collect();
    let means: Vec<f64> = subsets
        .iter()
        .map(|k| {
            fragments
                .iter()
                .map(|f| f.fractions[k].as_f64().expect("fractions are numbers"))
                .sum::<f64>()
                / fragments.len() as f64
        })
        .collect();
    let mut interactions: Vec<Interaction> = subsets
        .iter()
        .zip(&means)
        .filter(|(k, _)| k.contains('*'))
        .map(|(k, &m)| Interaction {
            subset: k.clone(),
            mean_fraction: m,
        })
        .collect();
    interactions.sort_by(|a, b| b.mean_fraction.total_cmp(&a.mean_fraction));
    interactions.truncate(settings.top_interactions);
    let hyperparameters: Vec<String> = space.names().map(String::from).collect();
    let mut warnings = Vec::new();
    let ranks = rank_methods(
        hyperparameters.clone(),
        fragments.iter().map(|f| f.dataset_id.clone()).collect(),
        singleton.clone(),
        &mut warnings,
    )?;
    Ok(ImportanceStudy {
        hyperparameters,
        settings: settings.clone(),
        datasets: fragments,
        skipped,
        mean_fractions: subsets.iter().cloned().zip(means.iter().map(|&m| json!(m))).collect(),
        top_interactions: interactions,
        ranks,
        warnings,
        subsets,
        singleton,
    })
}

impl Study for ImportanceStudy {
    fn report_files(&self, format: Format) -> Result<Vec<ReportFile>> {
        let mut files = Vec::new();
        match format {
            Format::Json => files.push(json_file("importance.json", self)?),
            Format::Csv => {
                let avg = self.ranks.as_ref().map(|r| &r.avg_ranks);
                let rows: Vec<Vec<String>> = self
                    .subsets
                    .iter()
                    .enumerate()
                    .map(|(i, k)| {
                        let rank = match avg {
                            Some(a) if i < self.hyperparameters.len() => a[i].to_string(),
                            _ => String::new(),
                        };
                        vec![k.clone(), self.mean_fractions[k].to_string(), rank]
                    })
                    .collect();
                files.push(csv_file(
                    "importance.csv",
                    &header(["subset", "mean_fraction", "avg_rank"], []),
                    &rows,
                )?);
            }
        }
        let violin: Vec<Vec<String>> = self
            .datasets
            .iter()
            .flat_map(|f| {
                f.fractions
                    .iter()
                    .map(|(k, v)| vec![f.dataset_id.clone(), k.clone(), v.to_string()])
            })
            .collect();
        files.push(csv_file(
            "violin.csv",
            &header(["dataset_id", "subset", "fraction"], []),
            &violin,
        )?);
        if let Some(r) = &self.ranks {
            files.push(ranks_file(r));
        }
        Ok(files)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationSettings {
    pub k: usize,
    pub n_iters: usize,
    pub seeds: Vec<u64>,
}

impl Default for VerificationSettings {
    fn default() -> Self {
        VerificationSettings {
            k: 10,
            n_iters: 100,
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationRow {
    pub objective: String,
    pub seed: u64,
    pub y_star: Vec<f64>,
    pub runs: Vec<Verification>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationStudy {
    pub hyperparameters: Vec<String>,
    pub settings: VerificationSettings,
    pub rows: Vec<VerificationRow>,
    pub mean_y_star: Vec<f64>,
    /// Hyperparameters ranked per row by `y*` (rank 1 = highest `y*`, so
    /// important hyperparameters receive large ranks).
    pub ranks: Option<RankReport>,
    pub warnings: Vec<String>,
    /// `rank_curve[t][j]`: average rank of the search pinning `j` by its
    /// incumbent after `t + 1` iterations.
    #[serde(skip)]
    pub rank_curve: Vec<Vec<f64>>,
}

/// Runs `verify_importance` for every objective, seed and hyperparameter.
pub fn run_verification_study(
    objectives: &[(String, &dyn Objective)],
    space: &ConfigSpace,
    settings: &VerificationSettings,
) -> Result<VerificationStudy> {
    if objectives.is_empty() || settings.seeds.is_empty() {
        return Err(Error::InvalidArgument("verification needs objectives and seeds".into()));
    }
    if settings.n_iters == 0 {
        return Err(Error::InvalidArgument("verification needs n_iters >= 1".into()));
    }
    let jobs: Vec<(&(String, &dyn Objective), u64)> = objectives
        .iter()
        .flat_map(|o| settings.seeds.iter().map(move |&s| (o, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&((name, obj), seed)| {
            let runs = (0..space.len())
                .map(|j| verify_importance(*obj, space, j, settings.k, settings.n_iters, seed))
                .collect::<Result<Vec<_>>>()?;
            Ok(VerificationRow {
                objective: name.clone(),
                seed,
                y_star: runs.iter().map(|r| r.y_star).collect(),
                runs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dims = space.len();
    let mean_y_star = (0..dims)
        .map(|j| rows.iter().map(|r| r.y_star[j]).sum::<f64>() / rows.len() as f64)
        .collect();
    let rank_curve = (0..settings.n_iters)
        .map(|t| {
            let mut avg = vec![0.0; dims];
            for r in &rows {
                let at: Vec<f64> = r.runs.iter().map(|v| v.curve[t]).collect();
                for (a, x) in avg.iter_mut().zip(rank_row(&at)) {
                    *a += x / rows.len() as f64;
                }
            }
            avg
        })
        .collect();
    let hyperparameters: Vec<String> = space.names().map(String::from).collect();
    let mut warnings = Vec::new();
    let ranks = rank_methods(
        hyperparameters.clone(),
        rows.iter().map(|r| format!("{}#{}", r.objective, r.seed)).collect(),
        rows.iter().map(|r| r.y_star.clone()).collect(),
        &mut warnings,
    )?;
    Ok(VerificationStudy {
        hyperparameters,
        settings: settings.clone(),
        rows,
        mean_y_star,
        ranks,
        warnings,
        rank_curve,
    })
}

/// Spearman correlation between mean singleton fractions and `−y*` over
/// the hyperparameters.
pub fn agreement(imp: &ImportanceStudy, ver: &VerificationStudy) -> Result<f64> {
    if imp.hyperparameters != ver.hyperparameters {
        return Err(Error::InvalidArgument("studies cover different hyperparameters".into()));
    }
    let neg: Vec<f64> = ver.mean_y_star.iter().map(|y| -y).collect();
    Ok(spearman(&imp.mean_singleton_fractions(), &neg))
}

impl Study for VerificationStudy {
    fn report_files(&self, format: Format) -> Result<Vec<ReportFile>> {
        let names = || self.hyperparameters.iter().map(String::as_str);
        let mut files = Vec::new();
        match format {
            Format::Json => files.push(json_file("verification.json", self)?),
            Format::Csv => {
                let rows: Vec<Vec<String>> = self
                    .rows
                    .iter()
                    .map(|r| {
                        [r.objective.clone(), r.seed.to_string()]
                            .into_iter()
                            .chain(r.y_star.iter().map(f64::to_string))
                            .collect()
                    })
                    .collect();
                files.push(csv_file("verification.csv", &header(["objective", "seed"], names()), &rows)?);
            }
        }
        let curve: Vec<Vec<String>> = self
            .rank_curve
            .iter()
            .enumerate()
            .map(|(t, r)| std::iter::once((t + 1).to_string()).chain(r.iter().map(f64::to_string)).collect())
            .collect();
        files.push(csv_file("rank_curves.csv", &header(["iter"], names()), &curve)?);
        let fixed: Vec<Vec<String>> = self
            .rows
            .iter()
            .flat_map(|r| {
                r.runs.iter().flat_map(move |v| {
                    v.values.iter().zip(&v.bests).map(move |(val, best)| {
                        vec![
                            r.objective.clone(),
                            r.seed.to_string(),
                            self.hyperparameters[v.dim].clone(),
                            val.clone(),
                            best.to_string(),
                        ]
                    })
                })
            })
            .collect();
        files.push(csv_file(
            "fixed_values.csv",
            &header(["objective", "seed", "hyperparameter", "value", "best"], []),
            &fixed,
        )?);
        if let Some(r) = &self.ranks {
            files.push(ranks_file(r));
        }
        Ok(files)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSettings {
    pub hyperband: HyperbandSettings,
    /// Repetitions per dataset; repetition `i` uses seed `hyperband.seed + i`.
    pub seeds: usize,
    pub top_n: usize,
}

impl Default for ComparisonSettings {
    fn default() -> Self {
        ComparisonSettings {
            hyperband: HyperbandSettings::default(),
            seeds: 10,
            top_n: DEFAULT_TOP_N,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetComparison {
    pub dataset_id: String,
    pub uniform: f64,
    pub prior: f64,
    pub delta: f64,
    pub uniform_runs: Vec<f64>,
    pub prior_runs: Vec<f64>,
    pub provenance: Vec<String>,
    pub warnings: Vec<String>,
}

/// One row of the uniform-vs-prior summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSummary {
    #[serde(rename = "M")]
    pub m: usize,
    pub uniform_avg_rank: f64,
    pub prior_avg_rank: f64,
    pub cd: f64,
    pub significant: bool,
    pub prior_wins: usize,
    pub low_n: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorComparisonStudy {
    pub settings: ComparisonSettings,
    pub summary: ComparisonSummary,
    pub datasets: Vec<DatasetComparison>,
    pub ranks: RankReport,
}

pub type ObjectiveFactory<'a> = dyn Fn(&DatasetRuns) -> Result<Box<dyn Objective>> + Sync + 'a;

/// Objectives that replay a forest fitted to each dataset's runs.
pub fn surrogate_factory(
    space: ConfigSpace,
    forest: ForestSettings,
    fidelity: Fidelity,
) -> impl Fn(&DatasetRuns) -> Result<Box<dyn Objective>> + Sync {
    move |d| {
        let f = RegressionForest::fit(d, &space, &forest)?;
        Ok(Box::new(SurrogateObjective::new(f, fidelity)?) as Box<dyn Objective>)
    }
}

/// For every dataset, builds a prior from the others and runs Hyperband
/// with uniform and prior sampling on that dataset's objective.
pub fn run_prior_comparison(
    rc: &RunCollection,
    space: &ConfigSpace,
    factory: &ObjectiveFactory<'_>,
    settings: &ComparisonSettings,
) -> Result<PriorComparisonStudy> {
    settings.hyperband.validate()?;
    if rc.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "prior comparison needs at least 2 datasets, got {}",
            rc.len()
        )));
    }
    if settings.seeds == 0 {
        return Err(Error::InvalidArgument("prior comparison needs seeds >= 1".into()));
    }
    let datasets: Vec<&DatasetRuns> = rc.iter().collect();
    let rows = datasets
        .par_iter()
        .map(|d| {
            let prior = build_prior(rc, space, settings.top_n, Some(d.dataset_id()))?;
            let obj = factory(d)?;
            let provenance = prior.provenance().to_vec();
            let warnings = prior.warnings().to_vec();
            let prior = Sampler::Prior(prior);
            let mut uniform_runs = Vec::with_capacity(settings.seeds);
            let mut prior_runs = Vec::with_capacity(settings.seeds);
            for rep in 0..settings.seeds as u64 {
                let hb = HyperbandSettings {
                    seed: settings.hyperband.seed.wrapping_add(rep),
                    ..settings.hyperband.clone()
                };
                uniform_runs.push(hyperband(obj.as_ref(), space, &Sampler::Uniform, &hb)?.best_score);
                prior_runs.push(hyperband(obj.as_ref(), space, &prior, &hb)?.best_score);
            }
            let uniform = uniform_runs.iter().sum::<f64>() / uniform_runs.len() as f64;
            let prior_mean = prior_runs.iter().sum::<f64>() / prior_runs.len() as f64;
            Ok(DatasetComparison {
                dataset_id: d.dataset_id().into(),
                uniform,
                prior: prior_mean,
                delta: prior_mean - uniform,
                uniform_runs,
                prior_runs,
                provenance,
                warnings,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sm = ScoreMatrix::new(
        vec!["uniform".into(), "prior".into()],
        rows.iter().map(|r| r.dataset_id.clone()).collect(),
        rows.iter().map(|r| vec![r.uniform, r.prior]).collect(),
    )?;
    let ranks = nemenyi_test(&sm, ALPHA)?;
    let summary = ComparisonSummary {
        m: rows.len(),
        uniform_avg_rank: ranks.avg_ranks[0],
        prior_avg_rank: ranks.avg_ranks[1],
        cd: ranks.cd,
        significant: ranks.is_significant("uniform", "prior"),
        prior_wins: rows.iter().filter(|r| r.delta > 0.0).count(),
        low_n: ranks.low_n,
    };
    Ok(PriorComparisonStudy {
        settings: settings.clone(),
        summary,
        datasets: rows,
        ranks,
    })
}

impl Study for PriorComparisonStudy {
    fn report_files(&self, format: Format) -> Result<Vec<ReportFile>> {
        let mut files = Vec::new();
        match format {
            Format::Json => files.push(json_file("comparison.json", self)?),
            Format::Csv => {
                let s = &self.summary;
                files.push(csv_file(
                    "comparison.csv",
                    &header(["M", "uniform", "prior", "cd", "significant", "prior_wins"], []),
                    &[vec![
                        s.m.to_string(),
                        s.uniform_avg_rank.to_string(),
                        s.prior_avg_rank.to_string(),
                        s.cd.to_string(),
                        s.significant.to_string(),
                        s.prior_wins.to_string(),
                    ]],
                )?);
            }
        }
        let deltas: Vec<Vec<String>> = self
            .datasets
            .iter()
            .map(|d| {
                vec![
                    d.dataset_id.clone(),
                    d.uniform.to_string(),
                    d.prior.to_string(),
                    d.delta.to_string(),
                ]
            })
            .collect();
        files.push(csv_file(
            "deltas.csv",
            &header(["dataset_id", "uniform", "prior", "delta"], []),
            &deltas,
        )?);
        files.push(ranks_file(&self.ranks));
        Ok(files)
    }
}

/// A single optimizer run with its trajectory.
#[derive(Debug, Clone)]
pub struct OptimizationRun {
    pub optimizer: String,
    pub sampler: String,
    pub seed: u64,
    pub space: ConfigSpace,
    pub result: OptResult,
}

impl Study for OptimizationRun {
    fn report_files(&self, format: Format) -> Result<Vec<ReportFile>> {
        let best = self.space.from_internal(&self.result.best_point)?;
        let mut files = Vec::new();
        match format {
            Format::Json => {
                let report = json!({
                    "optimizer": self.optimizer,
                    "sampler": self.sampler,
                    "seed": self.seed,
                    "evaluations": self.result.trajectory.len(),
                    "best_score": self.result.best_score,
                    "best_config": config_json(&self.space, &best),
                });
                files.push(json_file("optimize.json", &report)?);
            }
            Format::Csv => {
                let row: Vec<String> = [
                    self.optimizer.clone(),
                    self.sampler.clone(),
                    self.seed.to_string(),
                    self.result.trajectory.len().to_string(),
                    self.result.best_score.to_string(),
                ]
                .into_iter()
                .chain(best.values().iter().map(ToString::to_string))
                .collect();
                files.push(csv_file(
                    "optimize.csv",
                    &header(
                        ["optimizer", "sampler", "seed", "evaluations", "best_score"],
                        self.space.names(),
                    ),
                    &[row],
                )?);
            }
        }
        files.push(ReportFile {
            name: "trajectory.csv".into(),
            contents: self.result.trajectory_csv(&self.space)?,
        });
        Ok(files)
    }
}

/// A fitted prior; the JSON form is the prior file itself.
#[derive(Debug, Clone)]
pub struct PriorReport {
    pub space: ConfigSpace,
    pub prior: PriorModel,
}

impl Study for PriorReport {
    fn report_files(&self, format: Format) -> Result<Vec<ReportFile>> {
        let mut files = vec![ReportFile {
            name: "prior.json".into(),
            contents: self.prior.to_json_string(&self.space) + "\n",
        }];
        if format == Format::Csv {
            // densities on an even grid of internal values, one row per point
            let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
            let mut rows = Vec::new();
            for (j, name) in self.space.names().enumerate() {
                match self.space.spec(j).n_categories() {
                    Some(c) => {
                        for i in 0..c {
                            let v = self.space.spec(j).from_internal(i as f64)?;
                            let p = self.prior.pdf_internal(&self.space, j, i as f64)?;
                            rows.push(vec![name.to_string(), v.to_string(), p.to_string()]);
                        }
                    }
                    None => {
                        for &u in &grid {
                            let p = self.prior.pdf_internal(&self.space, j, u)?;
                            rows.push(vec![name.to_string(), u.to_string(), p.to_string()]);
                        }
                    }
                }
            }
            files.push(csv_file("prior_density.csv", &header(["hyperparameter", "value", "density"], []), &rows)?);
        }
        Ok(files)
    }
}

/// `count` prior draws as a runs-file CSV without the `y` column.
pub fn sample_configs_csv(
    prior: &PriorModel,
    space: &ConfigSpace,
    count: usize,
    seed: u64,
    dataset_id: &str,
) -> Result<String> {
    if dataset_id.contains(',') {
        return Err(Error::InvalidArgument("dataset id may not contain ','".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("dataset_id");
    for n in space.names() {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for _ in 0..count {
        out.push_str(dataset_id);
        for v in prior.sample(space, &mut rng).values() {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::HyperparameterSpec;
    use crate::optimize::SyntheticObjective;

    fn space(n: usize) -> ConfigSpace {
        ConfigSpace::new(
            (1..=n)
                .map(|i| HyperparameterSpec::continuous(format!("x{i}"), 0.0, 1.0, false).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn dataset(id: &str, space: &ConfigSpace, n: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> DatasetRuns {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<(Config, f64)> = (0..n)
            .map(|_| {
                let p = space.sample_internal(&mut rng);
                (space.from_internal(&p).unwrap(), f(&p))
            })
            .collect();
        DatasetRuns::from_pairs(id, pairs).unwrap()
    }

    fn quick() -> ImportanceSettings {
        ImportanceSettings {
            forest: ForestSettings {
                n_trees: 4,
                ..ForestSettings::default()
            },
            ..ImportanceSettings::default()
        }
    }

    #[test]
    fn importance_study_shape_and_skips() {
        let sp = space(3);
        let mut rc = RunCollection::new();
        for d in 0..5 {
            rc.insert(dataset(&format!("d{d}"), &sp, 60, d, |p| p[0] + 0.1 * p[1])).unwrap();
        }
        rc.insert(dataset("flat", &sp, 60, 9, |_| 0.5)).unwrap();
        let study = run_importance_study(&rc, &sp, &quick()).unwrap();
        assert_eq!(study.datasets.len() + study.skipped.len(), rc.len());
        assert_eq!(study.skipped[0].dataset_id, "flat");
        let ranks = study.ranks.as_ref().unwrap();
        assert!(ranks.avg_ranks[0] < ranks.avg_ranks[1]);
        assert!(study.low_n_flagged());
        let files = study.report_files(Format::Json).unwrap();
        let violin = &files.iter().find(|f| f.name == "violin.csv").unwrap().contents;
        // 3 singletons + 3 pairs per dataset
        assert_eq!(violin.lines().count(), 1 + 5 * 6);
        assert_eq!(study.top_interactions.len(), 3);
    }

    impl ImportanceStudy {
        fn low_n_flagged(&self) -> bool {
            self.ranks.as_ref().is_some_and(|r| r.low_n) && !self.warnings.is_empty()
        }
    }

    #[test]
    fn all_constant_is_an_error() {
        let sp = space(2);
        let rc = RunCollection::from_datasets([dataset("a", &sp, 20, 0, |_| 1.0)]).unwrap();
        assert!(matches!(
            run_importance_study(&rc, &sp, &quick()),
            Err(Error::EmptyCollection(_))
        ));
    }

    #[test]
    fn verification_ties_for_constant_objective() {
        let sp = space(3);
        let flat = SyntheticObjective::named("constant", &sp, Fidelity::EXACT).unwrap();
        let study = run_verification_study(
            &[("flat".into(), &flat as &dyn Objective)],
            &sp,
            &VerificationSettings {
                k: 4,
                n_iters: 20,
                seeds: vec![0, 1],
            },
        )
        .unwrap();
        let r = study.ranks.unwrap();
        assert!(r.avg_ranks.iter().all(|&x| x == 2.0));
        assert!(study.rank_curve.iter().flatten().all(|&x| x == 2.0));
    }

    #[test]
    fn prior_comparison_with_two_datasets() {
        let sp = space(2);
        let rc = RunCollection::from_datasets([
            dataset("a", &sp, 40, 0, |p| -(p[0] - 0.2).powi(2)),
            dataset("b", &sp, 40, 1, |p| -(p[0] - 0.25).powi(2)),
        ])
        .unwrap();
        let factory = surrogate_factory(sp.clone(), ForestSettings::default(), Fidelity::default());
        let settings = ComparisonSettings {
            seeds: 2,
            ..ComparisonSettings::default()
        };
        let study = run_prior_comparison(&rc, &sp, &factory, &settings).unwrap();
        for d in &study.datasets {
            assert_eq!(d.provenance.len(), 1);
            assert!(!d.provenance.contains(&d.dataset_id));
            assert!(!d.warnings.is_empty());
        }
        assert_eq!(study.summary.m, 2);
        let files = study.report_files(Format::Csv).unwrap();
        let names: Vec<&str> = files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["comparison.csv", "deltas.csv", "ranks.csv"]);
        let again = run_prior_comparison(&rc, &sp, &factory, &settings).unwrap();
        assert_eq!(study, again);
    }

    #[test]
    fn sampled_configs_parse_as_runs() {
        let sp = space(2);
        let rc = RunCollection::from_datasets([dataset("a", &sp, 30, 0, |p| p[0])]).unwrap();
        let prior = build_prior(&rc, &sp, 10, None).unwrap();
        let csv = sample_configs_csv(&prior, &sp, 5, 0, "new").unwrap();
        let mut with_y = String::new();
        for (i, line) in csv.lines().enumerate() {
            let (id, rest) = line.split_once(',').unwrap();
            let y = if i == 0 { "y" } else { "0.5" };
            with_y.push_str(&format!("{id},{y},{rest}\n"));
        }
        let parsed = crate::rundata::read_csv(with_y.as_bytes(), &sp).unwrap();
        assert_eq!(parsed.get("new").unwrap().len(), 5);
    }
}
