//! C ABI over `hypimp`.
//!
//! Every entry point returns an [`HpStatus`]; on failure the message is
//! available from [`hp_last_error`] on the same thread. Objects are opaque
//! handles released with their matching `*_free` function. Panics never
//! cross the boundary and surface as `HP_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hypimp::configspace::{ConfigSpace, SubsetSelector};
use hypimp::fanova::{importance, VarianceDecomposition};
use hypimp::forest::{ForestSettings, RegressionForest};
use hypimp::priors::{build_prior, PriorModel};
use hypimp::rundata::{filter_datasets, load_runs, RunCollection};
use hypimp::stats::nemenyi_cd;
use hypimp::Error;
use libc::size_t;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    OutOfDomain = 4,
    InvalidSpec = 5,
    InvalidArgument = 6,
    EmptyCollection = 7,
    ConstantModel = 8,
    Unsupported = 9,
    Io = 10,
    NotFound = 11,
    Panic = 12,
}

/// A configuration space.
pub struct HpSpace(ConfigSpace);

/// Runs grouped by dataset.
pub struct HpRuns(RunCollection);

/// Forest-level variance decomposition of one dataset.
pub struct HpImportance(VarianceDecomposition);

/// Per-hyperparameter sampling prior.
pub struct HpPrior(PriorModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Status(HpStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn status_of(e: &Error) -> HpStatus {
    match e {
        Error::Parse { .. } | Error::MissingColumn(_) => HpStatus::Parse,
        Error::OutOfDomain(_) => HpStatus::OutOfDomain,
        Error::InvalidSpec(_) => HpStatus::InvalidSpec,
        Error::EmptyCollection(_) => HpStatus::EmptyCollection,
        Error::ConstantTarget | Error::ConstantModel | Error::DegenerateTree => HpStatus::ConstantModel,
        Error::TooFewSamples(_) | Error::InvalidArgument(_) => HpStatus::InvalidArgument,
        Error::Unsupported(_) => HpStatus::Unsupported,
        Error::Io { .. } => HpStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HpStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            HpStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(HpStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::Status(HpStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn out_ref<'a, T>(out: *mut T) -> Result<&'a mut T, Failure> {
    out.as_mut().ok_or_else(|| null("out"))
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Failure::Status(HpStatus::InvalidArgument, e.to_string()))
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn hp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a space from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hp_space_from_json(json: *const c_char, out: *mut *mut HpSpace) -> HpStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        put(out, HpSpace(ConfigSpace::from_json_str(text)?))
    })
}

/// Loads a space file, or one of the shipped spaces by name.
///
/// # Safety
/// `path_or_name` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hp_space_load(path_or_name: *const c_char, out: *mut *mut HpSpace) -> HpStatus {
    guard(|| {
        let arg = str_arg(path_or_name, "path_or_name")?;
        put(out, HpSpace(ConfigSpace::load_or_shipped(arg)?))
    })
}

/// Number of hyperparameters.
///
/// # Safety
/// `space` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hp_space_len(space: *const HpSpace, out: *mut size_t) -> HpStatus {
    guard(|| {
        *out_ref(out)? = obj(space, "space")?.0.len();
        Ok(())
    })
}

/// # Safety
/// `space` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn hp_space_free(space: *mut HpSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// Loads a `.csv` or `.jsonl` runs file against `space`.
///
/// # Safety
/// Pointers must be valid; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hp_runs_load(
    path: *const c_char,
    space: *const HpSpace,
    out: *mut *mut HpRuns,
) -> HpStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let space = obj(space, "space")?;
        put(out, HpRuns(load_runs(path, &space.0)?))
    })
}

/// New collection without datasets below `min_runs` runs and, if
/// `drop_constant`, without constant-performance datasets.
///
/// # Safety
/// `runs` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hp_runs_filter(
    runs: *const HpRuns,
    min_runs: size_t,
    drop_constant: bool,
    out: *mut *mut HpRuns,
) -> HpStatus {
    guard(|| {
        let (kept, _) = filter_datasets(&obj(runs, "runs")?.0, min_runs, drop_constant)?;
        put(out, HpRuns(kept))
    })
}

/// Number of datasets.
///
/// # Safety
/// `runs` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hp_runs_dataset_count(runs: *const HpRuns, out: *mut size_t) -> HpStatus {
    guard(|| {
        *out_ref(out)? = obj(runs, "runs")?.0.len();
        Ok(())
    })
}

/// # Safety
/// `runs` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn hp_runs_free(runs: *mut HpRuns) {
    if !runs.is_null() {
        drop(Box::from_raw(runs));
    }
}

/// Fits a forest of `n_trees` trees to one dataset and decomposes it up to
/// `max_order`.
///
/// # Safety
/// Handles must be live; `dataset_id` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hp_importance_compute(
    runs: *const HpRuns,
    space: *const HpSpace,
    dataset_id: *const c_char,
    n_trees: size_t,
    max_order: size_t,
    seed: u64,
    out: *mut *mut HpImportance,
) -> HpStatus {
    guard(|| {
        let runs = obj(runs, "runs")?;
        let space = obj(space, "space")?;
        let id = str_arg(dataset_id, "dataset_id")?;
        let data = runs
            .0
            .get(id)
            .ok_or_else(|| Failure::Status(HpStatus::NotFound, format!("no dataset {id:?}")))?;
        let settings = ForestSettings {
            n_trees,
            seed,
            ..ForestSettings::default()
        };
        if !(1..=3).contains(&max_order) {
            return Err(Failure::Core(Error::InvalidArgument(format!(
                "max_order must be 1, 2 or 3, got {max_order}"
            ))));
        }
        let forest = RegressionForest::fit(data, &space.0, &settings)?;
        put(out, HpImportance(importance(&forest, max_order)?))
    })
}

/// Importance fraction of the subset given by `n_dims` sorted, distinct
/// hyperparameter indices.
///
/// # Safety
/// `imp` must be live, `dims` must point to `n_dims` values, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hp_importance_fraction(
    imp: *const HpImportance,
    dims: *const size_t,
    n_dims: size_t,
    out: *mut f64,
) -> HpStatus {
    guard(|| {
        let vd = &obj(imp, "importance")?.0;
        if dims.is_null() && n_dims > 0 {
            return Err(null("dims"));
        }
        let dims = if n_dims == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(dims, n_dims)
        };
        let key = vd
            .subsets
            .iter()
            .find(|s: &&SubsetSelector| s.dims() == dims)
            .ok_or_else(|| {
                Failure::Status(HpStatus::NotFound, format!("subset {dims:?} not in the decomposition"))
            })?;
        *out_ref(out)? = vd.fraction(key).expect("subset is present");
        Ok(())
    })
}

/// Number of trees that contributed (trees with zero variance are skipped).
///
/// # Safety
/// `imp` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hp_importance_used_trees(imp: *const HpImportance, out: *mut size_t) -> HpStatus {
    guard(|| {
        *out_ref(out)? = obj(imp, "importance")?.0.used_trees();
        Ok(())
    })
}

/// # Safety
/// `imp` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn hp_importance_free(imp: *mut HpImportance) {
    if !imp.is_null() {
        drop(Box::from_raw(imp));
    }
}

/// Builds a prior from the top `top_n` runs of every dataset except
/// `exclude` (NULL for none).
///
/// # Safety
/// Handles must be live; `exclude` NULL or NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hp_prior_build(
    runs: *const HpRuns,
    space: *const HpSpace,
    top_n: size_t,
    exclude: *const c_char,
    out: *mut *mut HpPrior,
) -> HpStatus {
    guard(|| {
        let runs = obj(runs, "runs")?;
        let space = obj(space, "space")?;
        let exclude = opt_str_arg(exclude, "exclude")?;
        put(out, HpPrior(build_prior(&runs.0, &space.0, top_n, exclude)?))
    })
}

/// Parses a prior file's JSON text.
///
/// # Safety
/// `json` NUL-terminated; `space` live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hp_prior_from_json(
    json: *const c_char,
    space: *const HpSpace,
    out: *mut *mut HpPrior,
) -> HpStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let space = obj(space, "space")?;
        put(out, HpPrior(PriorModel::from_json_str(text, &space.0)?))
    })
}

/// Serializes a prior; release the string with `hp_string_free`.
///
/// # Safety
/// Handles must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hp_prior_to_json(
    prior: *const HpPrior,
    space: *const HpSpace,
    out: *mut *mut c_char,
) -> HpStatus {
    guard(|| {
        let prior = obj(prior, "prior")?;
        let space = obj(space, "space")?;
        *out_ref(out)? = owned_string(prior.0.to_json_string(&space.0))?;
        Ok(())
    })
}

/// Draws `count` points in internal coordinates into `out`, row-major with
/// one row of `hp_space_len` values per draw.
///
/// # Safety
/// `prior` live; `out` must hold `count * n_dims` doubles.
#[no_mangle]
pub unsafe extern "C" fn hp_prior_sample(
    prior: *const HpPrior,
    seed: u64,
    count: size_t,
    out: *mut f64,
    out_len: size_t,
) -> HpStatus {
    guard(|| {
        let prior = &obj(prior, "prior")?.0;
        let dims = prior.dims().len();
        let needed = count
            .checked_mul(dims)
            .ok_or_else(|| Failure::Status(HpStatus::InvalidArgument, "count overflows".into()))?;
        if out_len < needed {
            return Err(Failure::Status(
                HpStatus::InvalidArgument,
                format!("output holds {out_len} values, need {needed}"),
            ));
        }
        if needed == 0 {
            return Ok(());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let buf = std::slice::from_raw_parts_mut(out, needed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for row in buf.chunks_mut(dims) {
            row.copy_from_slice(&prior.sample_internal(&mut rng));
        }
        Ok(())
    })
}

/// Density of hyperparameter `dim` at internal value `u`.
///
/// # Safety
/// Handles must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hp_prior_pdf(
    prior: *const HpPrior,
    space: *const HpSpace,
    dim: size_t,
    u: f64,
    out: *mut f64,
) -> HpStatus {
    guard(|| {
        let prior = obj(prior, "prior")?;
        let space = obj(space, "space")?;
        if dim >= space.0.len() {
            return Err(Failure::Core(Error::InvalidArgument(format!(
                "dimension {dim} out of range"
            ))));
        }
        *out_ref(out)? = prior.0.pdf_internal(&space.0, dim, u)?;
        Ok(())
    })
}

/// # Safety
/// `prior` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn hp_prior_free(prior: *mut HpPrior) {
    if !prior.is_null() {
        drop(Box::from_raw(prior));
    }
}

/// Nemenyi critical distance for `k` methods over `n` datasets.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hp_nemenyi_cd(k: size_t, n: size_t, alpha: f64, out: *mut f64) -> HpStatus {
    guard(|| {
        *out_ref(out)? = nemenyi_cd(k, n, alpha)?;
        Ok(())
    })
}
