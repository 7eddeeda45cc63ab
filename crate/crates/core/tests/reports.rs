use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use hypimp::configspace::{Config, ConfigSpace, SubsetSelector, SHIPPED_SPACES};
use hypimp::forest::{ForestSettings, RegressionForest};
use hypimp::optimize::{hyperband, random_search, Fidelity, HyperbandSettings, Objective, Sampler, SyntheticObjective};
use hypimp::pipeline::{
    emit_reports, run_importance_study, run_prior_comparison, run_verification_study, surrogate_factory,
    ComparisonSettings, Format, ImportanceSettings, OptimizationRun, PriorReport, Study, VerificationSettings,
    REPORT_SCHEMAS,
};
use hypimp::priors::build_prior;
use hypimp::rundata::{DatasetRuns, RunCollection};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value as Json;

fn collection(space: &ConfigSpace, n_datasets: usize, seed: u64) -> RunCollection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let datasets: Vec<DatasetRuns> = (0..n_datasets)
        .map(|d| {
            let pairs: Vec<(Config, f64)> = (0..80)
                .map(|_| {
                    let p = space.sample_internal(&mut rng);
                    let y = 0.6 + 0.2 * p[3] - 0.3 * (p[4] - 0.2 - 0.1 * d as f64).powi(2) + 0.05 * p[0];
                    (space.from_internal(&p).unwrap(), y)
                })
                .collect();
            DatasetRuns::from_pairs(format!("ds{d}"), pairs).unwrap()
        })
        .collect();
    RunCollection::from_datasets(datasets).unwrap()
}

fn adaboost() -> ConfigSpace {
    ConfigSpace::load_or_shipped("adaboost").unwrap()
}

fn small_forest() -> ForestSettings {
    ForestSettings {
        n_trees: 4,
        ..ForestSettings::default()
    }
}

fn validate_json_files(dir: &Path) -> usize {
    let mut checked = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        if !name.ends_with(".json") {
            continue;
        }
        let schema_text = REPORT_SCHEMAS
            .iter()
            .find(|(n, _)| *n == name)
            .unwrap_or_else(|| panic!("no schema for {name}"))
            .1;
        let schema: Json = serde_json::from_str(schema_text).unwrap();
        let validator = jsonschema::validator_for(&schema).unwrap();
        let doc: Json = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{name}: {errors:?}");
        checked += 1;
    }
    checked
}

fn emit_twice(study: &dyn Study, format: Format) -> (tempfile::TempDir, BTreeMap<String, Vec<u8>>) {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_reports(study, a.path(), format).unwrap();
    emit_reports(study, b.path(), format).unwrap();
    let read = |d: &Path| -> BTreeMap<String, Vec<u8>> {
        fs::read_dir(d)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
            })
            .collect()
    };
    let first = read(a.path());
    assert_eq!(first, read(b.path()));
    (a, first)
}

fn csv_rows(bytes: &[u8]) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(bytes).records().map(Result::unwrap).collect()
}

#[test]
fn importance_reports_validate_and_cover_every_subset() {
    let space = adaboost();
    let rc = collection(&space, 3, 1);
    let settings = ImportanceSettings {
        forest: small_forest(),
        ..ImportanceSettings::default()
    };
    let study = run_importance_study(&rc, &space, &settings).unwrap();
    let (dir, files) = emit_twice(&study, Format::Json);
    assert_eq!(validate_json_files(dir.path()), 1);
    let n_subsets = SubsetSelector::all_up_to(space.len(), 2).len();
    assert_eq!(csv_rows(&files["violin.csv"]).len(), 3 * n_subsets);
    assert!(files.contains_key("ranks.csv"));

    let (_, csv_files) = emit_twice(&study, Format::Csv);
    let rows = csv_rows(&csv_files["importance.csv"]);
    assert_eq!(rows.len(), n_subsets);
    assert!(!csv_files.contains_key("importance.json"));
    assert_eq!(csv_files["violin.csv"], files["violin.csv"]);
}

#[test]
fn importance_is_reproducible_from_the_same_seed() {
    let space = adaboost();
    let rc = collection(&space, 2, 2);
    let settings = ImportanceSettings {
        forest: small_forest(),
        ..ImportanceSettings::default()
    };
    let a = run_importance_study(&rc, &space, &settings).unwrap();
    let b = run_importance_study(&rc, &space, &settings).unwrap();
    assert_eq!(emit_twice(&a, Format::Json).1, emit_twice(&b, Format::Json).1);
}

#[test]
fn verification_reports_validate() {
    let space = adaboost();
    let obj = SyntheticObjective::named("separable", &space, Fidelity::EXACT).unwrap();
    let objectives: Vec<(String, &dyn Objective)> = vec![("separable".into(), &obj)];
    let settings = VerificationSettings {
        k: 4,
        n_iters: 20,
        seeds: vec![0, 1],
    };
    let study = run_verification_study(&objectives, &space, &settings).unwrap();
    let (dir, files) = emit_twice(&study, Format::Json);
    assert_eq!(validate_json_files(dir.path()), 1);
    for name in ["rank_curves.csv", "fixed_values.csv", "ranks.csv"] {
        assert!(files.contains_key(name), "{name}");
    }
}

#[test]
fn comparison_reports_validate() {
    let space = adaboost();
    let rc = collection(&space, 3, 3);
    let factory = surrogate_factory(space.clone(), small_forest(), Fidelity::default());
    let settings = ComparisonSettings {
        seeds: 2,
        top_n: 5,
        ..ComparisonSettings::default()
    };
    let study = run_prior_comparison(&rc, &space, &factory, &settings).unwrap();
    let (dir, files) = emit_twice(&study, Format::Json);
    assert_eq!(validate_json_files(dir.path()), 1);
    assert_eq!(csv_rows(&files["deltas.csv"]).len(), 3);
}

#[test]
fn optimize_and_prior_reports_validate() {
    let space = adaboost();
    let rc = collection(&space, 3, 4);
    let forest = RegressionForest::fit(rc.get("ds1").unwrap(), &space, &small_forest()).unwrap();
    let obj = hypimp::optimize::SurrogateObjective::new(forest, Fidelity::default()).unwrap();
    let prior = build_prior(&rc, &space, 10, Some("ds1")).unwrap();

    let hb = hyperband(&obj, &space, &Sampler::Prior(prior.clone()), &HyperbandSettings::default()).unwrap();
    let run = OptimizationRun {
        optimizer: "hyperband".into(),
        sampler: "prior".into(),
        seed: 0,
        space: space.clone(),
        result: hb,
    };
    let (dir, files) = emit_twice(&run, Format::Json);
    assert_eq!(validate_json_files(dir.path()), 1);
    assert_eq!(csv_rows(&files["trajectory.csv"]).len(), 72);

    let rs = random_search(&obj, &space, &Sampler::Uniform, 25, 9).unwrap();
    let run = OptimizationRun {
        optimizer: "random".into(),
        sampler: "uniform".into(),
        seed: 9,
        space: space.clone(),
        result: rs,
    };
    let (_, files) = emit_twice(&run, Format::Csv);
    assert_eq!(csv_rows(&files["optimize.csv"]).len(), 1);
    assert_eq!(csv_rows(&files["trajectory.csv"]).len(), 25);

    let report = PriorReport { space: space.clone(), prior };
    let (dir, files) = emit_twice(&report, Format::Csv);
    assert_eq!(validate_json_files(dir.path()), 1);
    assert!(files.contains_key("prior_density.csv"));
}

#[test]
fn shipped_spaces_round_trip_through_the_schema() {
    let schema: Json =
        serde_json::from_str(REPORT_SCHEMAS.iter().find(|(n, _)| *n == "space.json").unwrap().1).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    for (name, text) in SHIPPED_SPACES {
        let space = ConfigSpace::from_json_str(text).unwrap();
        let written: Json = serde_json::from_str(&space.to_json_string()).unwrap();
        assert!(validator.is_valid(&written), "{name}");
        assert_eq!(ConfigSpace::from_json_str(&space.to_json_string()).unwrap(), space);
    }
}
