use std::ffi::{CStr, CString};
use std::io::Write;
use std::ptr;

use hypimp_ffi::*;

fn last_error() -> String {
    let p = hp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn runs_file() -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
    writeln!(f, "dataset_id,y,x,c").unwrap();
    for d in 0..3 {
        for i in 0..40 {
            let x = (i as f64 + 0.5) / 40.0;
            let c = if i % 2 == 0 { "a" } else { "b" };
            let y = x * x + if c == "a" { 0.1 } else { 0.0 } + d as f64 * 0.01;
            writeln!(f, "d{d},{y},{x},{c}").unwrap();
        }
    }
    writeln!(f, "flat,1,0.5,a").unwrap();
    f
}

const SPACE: &str = r#"{"hyperparameters":[
  {"name":"x","type":"continuous","lo":0,"hi":1},
  {"name":"c","type":"categorical","categories":["a","b"]}]}"#;

fn space() -> *mut HpSpace {
    let json = CString::new(SPACE).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { hp_space_from_json(json.as_ptr(), &mut s) }, HpStatus::Ok);
    s
}

#[test]
fn nemenyi_cd_through_the_abi() {
    let mut cd = 0.0;
    assert_eq!(unsafe { hp_nemenyi_cd(2, 100, 0.05, &mut cd) }, HpStatus::Ok);
    assert!((cd - 0.196).abs() < 5e-4);
    assert_eq!(unsafe { hp_nemenyi_cd(11, 100, 0.05, &mut cd) }, HpStatus::Unsupported);
    assert!(last_error().contains("k <= 10"));
    assert_eq!(unsafe { hp_nemenyi_cd(2, 100, 0.05, ptr::null_mut()) }, HpStatus::NullPointer);
}

#[test]
fn space_handles() {
    let s = space();
    let mut n = 0;
    assert_eq!(unsafe { hp_space_len(s, &mut n) }, HpStatus::Ok);
    assert_eq!(n, 2);
    unsafe { hp_space_free(s) };

    let name = CString::new("svm_rbf").unwrap();
    let mut shipped = ptr::null_mut();
    assert_eq!(unsafe { hp_space_load(name.as_ptr(), &mut shipped) }, HpStatus::Ok);
    assert_eq!(unsafe { hp_space_len(shipped, &mut n) }, HpStatus::Ok);
    assert_eq!(n, 5);
    unsafe { hp_space_free(shipped) };

    let bad = CString::new(r#"{"hyperparameters":[{"name":"x","type":"continuous","lo":1,"hi":0}]}"#).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { hp_space_from_json(bad.as_ptr(), &mut out) }, HpStatus::InvalidSpec);
    assert!(out.is_null());
    assert_eq!(unsafe { hp_space_from_json(ptr::null(), &mut out) }, HpStatus::NullPointer);
    unsafe { hp_space_free(ptr::null_mut()) };
}

#[test]
fn runs_importance_and_prior() {
    let s = space();
    let file = runs_file();
    let path = CString::new(file.path().to_str().unwrap()).unwrap();
    let mut runs = ptr::null_mut();
    assert_eq!(unsafe { hp_runs_load(path.as_ptr(), s, &mut runs) }, HpStatus::Ok);
    let mut n = 0;
    unsafe { hp_runs_dataset_count(runs, &mut n) };
    assert_eq!(n, 4);
    let mut kept = ptr::null_mut();
    assert_eq!(unsafe { hp_runs_filter(runs, 10, true, &mut kept) }, HpStatus::Ok);
    unsafe { hp_runs_dataset_count(kept, &mut n) };
    assert_eq!(n, 3);

    let id = CString::new("d1").unwrap();
    let mut imp = ptr::null_mut();
    assert_eq!(
        unsafe { hp_importance_compute(kept, s, id.as_ptr(), 8, 2, 0, &mut imp) },
        HpStatus::Ok
    );
    let (mut fx, mut fc, mut fxc) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(hp_importance_fraction(imp, [0].as_ptr(), 1, &mut fx), HpStatus::Ok);
        assert_eq!(hp_importance_fraction(imp, [1].as_ptr(), 1, &mut fc), HpStatus::Ok);
        assert_eq!(hp_importance_fraction(imp, [0, 1].as_ptr(), 2, &mut fxc), HpStatus::Ok);
        assert_eq!(hp_importance_fraction(imp, [1, 0].as_ptr(), 2, &mut fxc), HpStatus::NotFound);
    }
    assert!(fx > fc && fx + fc + fxc <= 1.0 + 1e-9);
    let mut used = 0;
    unsafe { hp_importance_used_trees(imp, &mut used) };
    assert_eq!(used, 8);
    unsafe { hp_importance_free(imp) };

    let missing = CString::new("nope").unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(
        unsafe { hp_importance_compute(kept, s, missing.as_ptr(), 8, 2, 0, &mut none) },
        HpStatus::NotFound
    );
    let flat = CString::new("flat").unwrap();
    assert_eq!(
        unsafe { hp_importance_compute(runs, s, flat.as_ptr(), 8, 2, 0, &mut none) },
        HpStatus::InvalidArgument
    );

    let mut prior = ptr::null_mut();
    assert_eq!(unsafe { hp_prior_build(kept, s, 5, id.as_ptr(), &mut prior) }, HpStatus::Ok);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { hp_prior_to_json(prior, s, &mut json) }, HpStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"provenance\""));
    assert!(!text.contains("\"d1\""));
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { hp_prior_from_json(json, s, &mut again) }, HpStatus::Ok);
    unsafe { hp_string_free(json) };

    let mut a = [0.0; 20];
    let mut b = [0.0; 20];
    unsafe {
        assert_eq!(hp_prior_sample(prior, 7, 10, a.as_mut_ptr(), a.len()), HpStatus::Ok);
        assert_eq!(hp_prior_sample(again, 7, 10, b.as_mut_ptr(), b.len()), HpStatus::Ok);
        assert_eq!(hp_prior_sample(prior, 7, 11, a.as_mut_ptr(), a.len()), HpStatus::InvalidArgument);
    }
    assert_eq!(a, b);
    assert!(a.chunks(2).all(|r| (0.0..=1.0).contains(&r[0]) && (r[1] == 0.0 || r[1] == 1.0)));
    let mut p = 0.0;
    unsafe {
        assert_eq!(hp_prior_pdf(prior, s, 1, 0.0, &mut p), HpStatus::Ok);
        assert_eq!(hp_prior_pdf(prior, s, 2, 0.0, &mut p), HpStatus::InvalidArgument);
        hp_prior_free(prior);
        hp_prior_free(again);
        hp_runs_free(kept);
        hp_runs_free(runs);
        hp_space_free(s);
    }
}

#[test]
fn io_errors_map_to_io_status() {
    let s = space();
    let path = CString::new("/nonexistent/runs.csv").unwrap();
    let mut runs = ptr::null_mut();
    assert_eq!(unsafe { hp_runs_load(path.as_ptr(), s, &mut runs) }, HpStatus::Io);
    assert!(last_error().contains("/nonexistent/runs.csv"));
    unsafe { hp_space_free(s) };
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(hp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
