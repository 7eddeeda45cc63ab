//! Command-line front end: importance, verification, priors, prior
//! comparison and single optimizer runs.
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hypimp::configspace::ConfigSpace;
use hypimp::forest::{ForestSettings, RegressionForest};
use hypimp::optimize::{
    hyperband, random_search, Fidelity, HyperbandSettings, Objective, Sampler, SurrogateObjective,
    SyntheticObjective,
};
use hypimp::pipeline::{
    emit_reports, run_importance_study, run_prior_comparison, run_verification_study, sample_configs_csv,
    surrogate_factory, ComparisonSettings, Format, ImportanceSettings, OptimizationRun, PriorReport, Study,
    VerificationSettings,
};
use hypimp::priors::{build_prior, PriorModel, DEFAULT_TOP_N};
use hypimp::rundata::{filter_datasets, load_runs, FilterReport, RunCollection, DEFAULT_MIN_RUNS};
use hypimp::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Hyperparameter importance and prior toolkit", long_about = None)]
struct Cli {
    /// Base random seed
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Main report format; plot data is always CSV
    #[arg(long, global = true, default_value = "json")]
    format: Format,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-dataset variance decomposition and cross-dataset ranking
    Importance(ImportanceArgs),
    /// Fix-one-hyperparameter random search
    Verify(VerifyArgs),
    /// Build or sample top-n priors
    #[command(subcommand)]
    Priors(PriorsCommand),
    /// Leave-one-dataset-out Hyperband with uniform vs. prior sampling
    Compare(CompareArgs),
    /// A single random-search or Hyperband run
    Optimize(OptimizeArgs),
}

#[derive(Args)]
struct Data {
    /// Runs file (.csv or .jsonl)
    #[arg(long)]
    runs: PathBuf,
    /// Space file, or the name of a shipped space
    #[arg(long)]
    space: String,
    /// Datasets with fewer runs are dropped
    #[arg(long, default_value_t = DEFAULT_MIN_RUNS)]
    min_runs: usize,
}

#[derive(Args)]
struct FidelityArgs {
    /// Score penalty at budget 0, shrinking linearly to 0 at budget 1
    #[arg(long, default_value_t = Fidelity::default().bias)]
    bias: f64,
    /// Noise standard deviation at budget 0, shrinking linearly to 0 at budget 1
    #[arg(long, default_value_t = Fidelity::default().noise)]
    noise: f64,
}

impl FidelityArgs {
    fn fidelity(&self) -> Fidelity {
        Fidelity {
            bias: self.bias,
            noise: self.noise,
        }
    }
}

#[derive(Args)]
struct ImportanceArgs {
    #[command(flatten)]
    data: Data,
    #[arg(long, default_value_t = 16)]
    trees: usize,
    #[arg(long, default_value_t = 2)]
    max_order: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    space: String,
    /// synthetic:NAME (separable, additive, product, constant) or surrogate:RUNS
    #[arg(long)]
    objective: ObjectiveSpec,
    /// Fixed values per numeric hyperparameter
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Random-search iterations per fixed value
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Repetitions, with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 16)]
    trees: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum PriorsCommand {
    /// Fit a prior from the top runs of every dataset
    Build(PriorsBuildArgs),
    /// Draw configurations from a prior as a runs CSV without `y`
    Sample(PriorsSampleArgs),
}

#[derive(Args)]
struct PriorsBuildArgs {
    #[command(flatten)]
    data: Data,
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    top_n: usize,
    /// Dataset left out of the prior
    #[arg(long)]
    exclude: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PriorsSampleArgs {
    #[arg(long)]
    prior: PathBuf,
    #[arg(long)]
    space: String,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value = "sampled")]
    dataset_id: String,
    /// Output file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: Data,
    /// Hyperband repetitions per dataset
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 4)]
    smax: usize,
    #[arg(long, default_value_t = 2.0)]
    eta: f64,
    /// Maximum resource (default: eta^smax)
    #[arg(long = "R")]
    r_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    top_n: usize,
    #[arg(long, default_value_t = 16)]
    trees: usize,
    #[command(flatten)]
    fidelity: FidelityArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Optimizer {
    Random,
    Hyperband,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerKind {
    Uniform,
    Prior,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    space: String,
    /// synthetic:NAME or surrogate:RUNS
    #[arg(long)]
    objective: ObjectiveSpec,
    /// Dataset to replay when the surrogate runs file holds several
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, value_enum, default_value_t = Optimizer::Hyperband)]
    optimizer: Optimizer,
    #[arg(long, value_enum, default_value_t = SamplerKind::Uniform)]
    sampler: SamplerKind,
    /// Prior file, required with --sampler prior
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Random-search evaluations
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 4)]
    smax: usize,
    #[arg(long, default_value_t = 2.0)]
    eta: f64,
    #[arg(long = "R")]
    r_max: Option<f64>,
    #[arg(long, default_value_t = 16)]
    trees: usize,
    #[command(flatten)]
    fidelity: FidelityArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone)]
enum ObjectiveSpec {
    Synthetic(String),
    Surrogate(PathBuf),
}

impl std::str::FromStr for ObjectiveSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once(':') {
            Some(("synthetic", name)) if !name.is_empty() => Ok(ObjectiveSpec::Synthetic(name.into())),
            Some(("surrogate", path)) if !path.is_empty() => Ok(ObjectiveSpec::Surrogate(path.into())),
            _ => Err(format!("expected synthetic:NAME or surrogate:RUNS, got {s:?}")),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot configure {n} threads: {e}")))?;
    }
    let seed = cli.seed;
    let format = cli.format;
    match cli.command {
        Command::Importance(a) => {
            let (space, rc) = load_filtered(&a.data, &a.out)?;
            let settings = ImportanceSettings {
                forest: forest_settings(a.trees, seed),
                max_order: a.max_order,
                ..ImportanceSettings::default()
            };
            let study = run_importance_study(&rc, &space, &settings)?;
            write(&study, &a.out, format)
        }
        Command::Verify(a) => {
            let space = ConfigSpace::load_or_shipped(&a.space)?;
            let objectives = objectives(&a.objective, &space, None, a.trees, seed, Fidelity::EXACT)?;
            let refs: Vec<(String, &dyn Objective)> =
                objectives.iter().map(|(n, o)| (n.clone(), o.as_ref())).collect();
            let settings = VerificationSettings {
                k: a.k,
                n_iters: a.iters,
                seeds: (0..a.seeds).map(|i| seed.wrapping_add(i)).collect(),
            };
            let study = run_verification_study(&refs, &space, &settings)?;
            write(&study, &a.out, format)
        }
        Command::Priors(PriorsCommand::Build(a)) => {
            let (space, rc) = load_filtered(&a.data, &a.out)?;
            let prior = build_prior(&rc, &space, a.top_n, a.exclude.as_deref())?;
            write(&PriorReport { space, prior }, &a.out, format)
        }
        Command::Priors(PriorsCommand::Sample(a)) => {
            let space = ConfigSpace::load_or_shipped(&a.space)?;
            let prior = PriorModel::load(&a.prior, &space)?;
            let csv = sample_configs_csv(&prior, &space, a.count, seed, &a.dataset_id)?;
            match a.out {
                Some(path) => fs::write(&path, csv).map_err(|e| Error::io(&path, e)),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
        Command::Compare(a) => {
            let (space, rc) = load_filtered(&a.data, &a.out)?;
            let factory = surrogate_factory(space.clone(), forest_settings(a.trees, seed), a.fidelity.fidelity());
            let settings = ComparisonSettings {
                hyperband: hyperband_settings(a.smax, a.eta, a.r_max, seed),
                seeds: a.seeds,
                top_n: a.top_n,
            };
            let study = run_prior_comparison(&rc, &space, &factory, &settings)?;
            write(&study, &a.out, format)
        }
        Command::Optimize(a) => {
            let space = ConfigSpace::load_or_shipped(&a.space)?;
            let mut objectives = objectives(
                &a.objective,
                &space,
                a.dataset.as_deref(),
                a.trees,
                seed,
                a.fidelity.fidelity(),
            )?;
            if objectives.len() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "runs file holds {} usable datasets; pick one with --dataset",
                    objectives.len()
                )));
            }
            let (_, obj) = objectives.remove(0);
            let sampler = match (a.sampler, &a.prior) {
                (SamplerKind::Uniform, _) => Sampler::Uniform,
                (SamplerKind::Prior, Some(p)) => Sampler::Prior(PriorModel::load(p, &space)?),
                (SamplerKind::Prior, None) => {
                    return Err(Error::InvalidArgument("--sampler prior needs --prior FILE".into()))
                }
            };
            let (optimizer, result) = match a.optimizer {
                Optimizer::Random => ("random", random_search(obj.as_ref(), &space, &sampler, a.iters, seed)?),
                Optimizer::Hyperband => {
                    let hb = hyperband_settings(a.smax, a.eta, a.r_max, seed);
                    ("hyperband", hyperband(obj.as_ref(), &space, &sampler, &hb)?)
                }
            };
            let run = OptimizationRun {
                optimizer: optimizer.into(),
                sampler: sampler.name().into(),
                seed,
                space,
                result,
            };
            write(&run, &a.out, format)
        }
    }
}

fn forest_settings(trees: usize, seed: u64) -> ForestSettings {
    ForestSettings {
        n_trees: trees,
        seed,
        ..ForestSettings::default()
    }
}

fn hyperband_settings(s_max: usize, eta: f64, r_max: Option<f64>, seed: u64) -> HyperbandSettings {
    HyperbandSettings {
        s_max,
        eta,
        r_max: r_max.unwrap_or_else(|| eta.powi(s_max as i32)),
        seed,
    }
}

fn write(study: &dyn Study, out: &PathBuf, format: Format) -> Result<()> {
    for path in emit_reports(study, out, format)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

/// Loads and filters runs, recording removals in `<out>/filter.csv`.
fn load_filtered(data: &Data, out: &PathBuf) -> Result<(ConfigSpace, RunCollection)> {
    let space = ConfigSpace::load_or_shipped(&data.space)?;
    let rc = load_runs(&data.runs, &space)?;
    let (kept, report) = filter_datasets(&rc, data.min_runs, true)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("filter.csv");
    fs::write(&path, filter_csv(&kept, &report)).map_err(|e| Error::io(&path, e))?;
    for r in &report.removed {
        eprintln!("dropped {}: {}", r.dataset_id, r.reason);
    }
    Ok((space, kept))
}

fn filter_csv(kept: &RunCollection, report: &FilterReport) -> String {
    let mut out = String::from("dataset_id,kept,reason\n");
    for id in kept.ids() {
        out.push_str(&format!("{id},true,\n"));
    }
    for r in &report.removed {
        out.push_str(&format!("{},false,{}\n", r.dataset_id, r.reason));
    }
    out
}

/// One objective per synthetic name, or one surrogate per dataset with
/// varying performance (only `only`, when given).
fn objectives(
    spec: &ObjectiveSpec,
    space: &ConfigSpace,
    only: Option<&str>,
    trees: usize,
    seed: u64,
    fidelity: Fidelity,
) -> Result<Vec<(String, Box<dyn Objective>)>> {
    match spec {
        ObjectiveSpec::Synthetic(name) => Ok(vec![(
            format!("synthetic:{name}"),
            Box::new(SyntheticObjective::named(name, space, fidelity)?),
        )]),
        ObjectiveSpec::Surrogate(path) => {
            let rc = load_runs(path, space)?;
            if let Some(id) = only {
                if rc.get(id).is_none() {
                    return Err(Error::InvalidArgument(format!("no dataset {id:?} in the runs file")));
                }
            }
            let settings = forest_settings(trees, seed);
            rc.iter()
                .filter(|d| only.is_none_or(|id| id == d.dataset_id()))
                .filter(|d| {
                    let usable = !d.is_constant();
                    if !usable {
                        eprintln!("skipped {}: constant performance", d.dataset_id());
                    }
                    usable
                })
                .map(|d| {
                    let forest = RegressionForest::fit(d, space, &settings)?;
                    let obj: Box<dyn Objective> = Box::new(SurrogateObjective::new(forest, fidelity)?);
                    Ok((d.dataset_id().to_string(), obj))
                })
                .collect()
        }
    }
}
