//! Per-dataset performance records: loading, validation, filtering.
//!
//! Performance `y` is always "higher is better"; metrics where lower is
//! better must be negated before ingestion.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::configspace::{Config, ConfigSpace, Value};
use crate::error::{Error, Result};

/// Absolute tolerance under which a dataset's targets count as constant.
pub const CONSTANT_TOLERANCE: f64 = 1e-12;

/// Minimum number of runs per dataset kept by default.
pub const DEFAULT_MIN_RUNS: usize = 150;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub dataset_id: String,
    pub config: Config,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRuns {
    dataset_id: String,
    records: Vec<RunRecord>,
}

impl DatasetRuns {
    pub fn new(dataset_id: impl Into<String>, records: Vec<RunRecord>) -> Result<Self> {
        let dataset_id = dataset_id.into();
        if records.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "dataset {dataset_id} has no records"
            )));
        }
        if let Some(r) = records.iter().find(|r| r.dataset_id != dataset_id) {
            return Err(Error::InvalidArgument(format!(
                "record for {} placed in dataset {dataset_id}",
                r.dataset_id
            )));
        }
        if let Some(r) = records.iter().find(|r| !r.y.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite performance {} in dataset {dataset_id}",
                r.y
            )));
        }
        Ok(DatasetRuns {
            dataset_id,
            records,
        })
    }

    /// Builds a dataset from `(config, y)` pairs.
    pub fn from_pairs(
        dataset_id: impl Into<String>,
        pairs: impl IntoIterator<Item = (Config, f64)>,
    ) -> Result<Self> {
        let dataset_id = dataset_id.into();
        let records = pairs
            .into_iter()
            .map(|(config, y)| RunRecord {
                dataset_id: dataset_id.clone(),
                config,
                y,
            })
            .collect();
        Self::new(dataset_id, records)
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    pub fn internal_points(&self, space: &ConfigSpace) -> Result<Vec<Vec<f64>>> {
        self.records
            .iter()
            .map(|r| space.to_internal(&r.config))
            .collect()
    }

    pub fn is_constant(&self) -> bool {
        let (lo, hi) = self
            .records
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.y), hi.max(r.y))
            });
        hi - lo <= CONSTANT_TOLERANCE
    }

    /// The `n` best records by `y`, ties kept in input order.
    pub fn top_n(&self, n: usize) -> Vec<&RunRecord> {
        let mut order: Vec<&RunRecord> = self.records.iter().collect();
        // sort_by is stable
        order.sort_by(|a, b| b.y.total_cmp(&a.y));
        order.truncate(n);
        order
    }

    pub fn top_n_configs(&self, n: usize) -> Vec<&Config> {
        self.top_n(n).into_iter().map(|r| &r.config).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunCollection {
    datasets: BTreeMap<String, DatasetRuns>,
}

impl RunCollection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, runs: DatasetRuns) -> Result<()> {
        if self.datasets.contains_key(runs.dataset_id()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate dataset {}",
                runs.dataset_id()
            )));
        }
        self.datasets.insert(runs.dataset_id.clone(), runs);
        Ok(())
    }

    pub fn from_datasets(datasets: impl IntoIterator<Item = DatasetRuns>) -> Result<Self> {
        let mut rc = Self::new();
        for d in datasets {
            rc.insert(d)?;
        }
        Ok(rc)
    }

    pub fn get(&self, dataset_id: &str) -> Option<&DatasetRuns> {
        self.datasets.get(dataset_id)
    }

    /// Datasets in ascending `dataset_id` order.
    pub fn iter(&self) -> impl Iterator<Item = &DatasetRuns> {
        self.datasets.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.datasets.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    pub fn total_runs(&self) -> usize {
        self.datasets.values().map(DatasetRuns::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum FilterReason {
    BelowMinRuns { runs: usize, min_runs: usize },
    ConstantPerformance,
}

impl fmt::Display for FilterReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterReason::BelowMinRuns { runs, min_runs } => {
                write!(f, "below min_runs ({runs} < {min_runs})")
            }
            FilterReason::ConstantPerformance => f.write_str("constant performance"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Removal {
    pub dataset_id: String,
    #[serde(flatten)]
    pub reason: FilterReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FilterReport {
    pub kept: usize,
    pub removed: Vec<Removal>,
}

/// Drops datasets with fewer than `min_runs` records and, when
/// `drop_constant`, datasets whose performance never varies.
pub fn filter_datasets(
    rc: &RunCollection,
    min_runs: usize,
    drop_constant: bool,
) -> Result<(RunCollection, FilterReport)> {
    let mut kept = RunCollection::new();
    let mut report = FilterReport::default();
    for d in rc.iter() {
        let reason = if d.len() < min_runs {
            Some(FilterReason::BelowMinRuns {
                runs: d.len(),
                min_runs,
            })
        } else if drop_constant && d.is_constant() {
            Some(FilterReason::ConstantPerformance)
        } else {
            None
        };
        match reason {
            Some(reason) => report.removed.push(Removal {
                dataset_id: d.dataset_id.clone(),
                reason,
            }),
            None => kept.insert(d.clone())?,
        }
    }
    report.kept = kept.len();
    if kept.is_empty() {
        return Err(Error::EmptyCollection(format!(
            "all {} datasets were filtered out",
            rc.len()
        )));
    }
    Ok((kept, report))
}

/// Loads a runs file; `.jsonl` paths use the JSON-lines form, anything else CSV.
pub fn load_runs(path: impl AsRef<Path>, space: &ConfigSpace) -> Result<RunCollection> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "jsonl") {
        read_jsonl(BufReader::new(file), space)
    } else {
        read_csv(file, space)
    }
}

fn group(records: Vec<RunRecord>) -> Result<RunCollection> {
    let mut by_id: BTreeMap<String, Vec<RunRecord>> = BTreeMap::new();
    for r in records {
        by_id.entry(r.dataset_id.clone()).or_default().push(r);
    }
    let mut rc = RunCollection::new();
    for (id, recs) in by_id {
        rc.insert(DatasetRuns::new(id, recs)?)?;
    }
    Ok(rc)
}

pub fn read_csv<R: std::io::Read>(reader: R, space: &ConfigSpace) -> Result<RunCollection> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::parse("runs header", e))?
        .clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    for required in ["dataset_id", "y"].into_iter().chain(space.names()) {
        if !cols.contains(&required) {
            return Err(Error::MissingColumn(required.to_string()));
        }
    }
    let expected: Vec<&str> = ["dataset_id", "y"].into_iter().chain(space.names()).collect();
    if cols != expected {
        return Err(Error::parse(
            "runs header",
            format!("expected columns {expected:?}, found {cols:?}"),
        ));
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(format!("runs line {line}"), e)
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let dataset_id = row[0].trim().to_string();
        if dataset_id.is_empty() {
            return Err(Error::parse(format!("runs line {line}"), "empty dataset_id"));
        }
        let y: f64 = row[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(format!("runs line {line}, column y"), format!("not a number: {:?}", &row[1])))?;
        if !y.is_finite() {
            return Err(Error::parse(format!("runs line {line}, column y"), "non-finite value"));
        }
        let values = space
            .specs()
            .iter()
            .enumerate()
            .map(|(j, spec)| {
                spec.parse_value(&row[j + 2]).map_err(|e| match e {
                    Error::OutOfDomain(m) => {
                        Error::OutOfDomain(format!("line {line}, column {}: {m}", spec.name()))
                    }
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(RunRecord {
            dataset_id,
            config: Config::new(values),
            y,
        });
    }
    group(records)
}

#[derive(Deserialize)]
struct JsonRun {
    dataset_id: String,
    y: f64,
    config: serde_json::Map<String, serde_json::Value>,
}

pub fn read_jsonl<R: BufRead>(reader: R, space: &ConfigSpace) -> Result<RunCollection> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(format!("runs line {lineno}"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let run: JsonRun = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("runs line {lineno}"), e))?;
        if !run.y.is_finite() {
            return Err(Error::parse(format!("runs line {lineno}, field y"), "non-finite value"));
        }
        if let Some(unknown) = run.config.keys().find(|k| space.index_of(k).is_none()) {
            return Err(Error::parse(
                format!("runs line {lineno}"),
                format!("unknown hyperparameter {unknown:?}"),
            ));
        }
        let values = space
            .specs()
            .iter()
            .map(|spec| {
                let raw = run
                    .config
                    .get(spec.name())
                    .ok_or_else(|| Error::MissingColumn(spec.name().to_string()))?;
                let text = match raw {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Bool(b) => b.to_string(),
                    serde_json::Value::Number(n) => n.to_string(),
                    other => {
                        return Err(Error::parse(
                            format!("runs line {lineno}, field {}", spec.name()),
                            format!("unsupported value {other}"),
                        ))
                    }
                };
                spec.parse_value(&text).map_err(|e| match e {
                    Error::OutOfDomain(m) => Error::OutOfDomain(format!("line {lineno}: {m}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(RunRecord {
            dataset_id: run.dataset_id,
            config: Config::new(values),
            y: run.y,
        });
    }
    group(records)
}

/// Writes the collection as a CSV runs file (datasets in id order).
pub fn write_csv<W: std::io::Write>(
    writer: W,
    rc: &RunCollection,
    space: &ConfigSpace,
) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(writer);
    let to_err = |e: csv::Error| Error::parse("runs output", e);
    let header: Vec<&str> = ["dataset_id", "y"].into_iter().chain(space.names()).collect();
    wtr.write_record(&header).map_err(to_err)?;
    for d in rc.iter() {
        for r in d.records() {
            let mut row = vec![r.dataset_id.clone(), format!("{}", r.y)];
            row.extend(r.config.values().iter().map(Value::to_string));
            wtr.write_record(&row).map_err(to_err)?;
        }
    }
    wtr.flush().map_err(|e| Error::parse("runs output", e))?;
    Ok(())
}

pub fn save_runs(path: impl AsRef<Path>, rc: &RunCollection, space: &ConfigSpace) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), rc, space)
}
