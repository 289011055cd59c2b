use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use mmsa::data::{generate_synthetic, save_dataset, SyntheticConfig};
use mmsa_ffi::*;

fn last_error() -> String {
    let p = mmsa_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn write_dataset(dir: &Path, n: usize) -> CString {
    let cfg = SyntheticConfig {
        n_segments: n,
        ..SyntheticConfig::default()
    };
    let path = dir.join("segments.jsonl");
    save_dataset(&path, &generate_synthetic(&cfg, 3).unwrap()).unwrap();
    cstr(path.to_str().unwrap())
}

#[test]
fn label_rules_match_core() {
    let (mut p, mut i) = (-1, -1);
    unsafe {
        assert_eq!(mmsa_polarity_of(-0.5, &mut p), MmsaStatus::Ok);
        assert_eq!(p, 0);
        assert_eq!(mmsa_polarity_of(0.0, &mut p), MmsaStatus::Ok);
        assert_eq!(p, 1);
        assert_eq!(mmsa_intensity_of(2.5, &mut i), MmsaStatus::Ok);
        assert_eq!(i, 3);
        assert_eq!(mmsa_intensity_of(9.0, &mut i), MmsaStatus::InvalidArgument);
        assert_eq!(i, 3, "output untouched on failure");
        assert_eq!(mmsa_polarity_of(f64::NAN, &mut p), MmsaStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(mmsa_polarity_of(1.0, ptr::null_mut()), MmsaStatus::NullPointer);
        assert!(last_error().contains("null"));
    }
}

#[test]
fn metrics_and_errors() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [2.0, 4.0, 6.0, 8.5];
    let mut v = 0.0;
    unsafe {
        assert_eq!(mmsa_pearson_cc(x.as_ptr(), y.as_ptr(), 4, &mut v), MmsaStatus::Ok);
        assert_eq!(v, mmsa::eval::pearson_cc(&x, &y).unwrap());
        assert_eq!(mmsa_mean_abs_error(x.as_ptr(), y.as_ptr(), 4, &mut v), MmsaStatus::Ok);
        assert!((v - 2.625).abs() < 1e-12);
        let flat = [1.0; 4];
        assert_eq!(mmsa_pearson_cc(flat.as_ptr(), y.as_ptr(), 4, &mut v), MmsaStatus::Undefined);
        assert_eq!(mmsa_mean_abs_error(ptr::null(), y.as_ptr(), 4, &mut v), MmsaStatus::NullPointer);
        assert_eq!(mmsa_mean_abs_error(ptr::null(), ptr::null(), 0, &mut v), MmsaStatus::InvalidArgument);
    }
}

#[test]
fn wilcoxon_textbook_case() {
    let a = [1.0, 2.0, 3.0];
    let b = [4.0, 5.0, 6.0];
    let mut o = MmsaTestOutcome::default();
    unsafe {
        assert_eq!(mmsa_wilcoxon(a.as_ptr(), 3, b.as_ptr(), 3, MmsaTest::RankSum, &mut o), MmsaStatus::Ok);
    }
    assert_eq!(o.statistic, 6.0);
    assert!((o.p_value - 0.1).abs() < 1e-12);
    assert_eq!(o.exact, 1);
    unsafe {
        assert_eq!(
            mmsa_wilcoxon(a.as_ptr(), 3, b.as_ptr(), 2, MmsaTest::SignedRank, &mut o),
            MmsaStatus::InvalidArgument
        );
    }
}

#[test]
fn model_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 6);
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(mmsa_dataset_load(data.as_ptr(), &mut ds), MmsaStatus::Ok);
        assert_eq!(mmsa_dataset_len(ds), 6);
        let mut gold = f64::NAN;
        assert_eq!(mmsa_dataset_score(ds, 0, &mut gold), MmsaStatus::Ok);
        assert!((-3.0..=3.0).contains(&gold));
        assert_eq!(mmsa_dataset_score(ds, 6, &mut gold), MmsaStatus::OutOfRange);

        let mut model = ptr::null_mut();
        let (kind, tasks) = (cstr("verbal"), cstr("S+P+I"));
        assert_eq!(mmsa_model_build(kind.as_ptr(), tasks.as_ptr(), 7, &mut model), MmsaStatus::Ok);
        assert!(mmsa_model_param_count(model) > 0);

        let mut best = f64::NAN;
        assert_eq!(mmsa_model_train(model, ds, ds, 2, 0, &mut best), MmsaStatus::Ok);
        assert!(best.is_finite());

        let mut p = MmsaPrediction::default();
        assert_eq!(mmsa_model_predict(model, ds, 1, &mut p), MmsaStatus::Ok);
        assert_eq!((p.has_polarity, p.has_intensity), (1, 1));
        assert!((p.intensity.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.score.abs() <= 3.0);

        let ckpt = cstr(dir.path().join("m.ckpt").to_str().unwrap());
        assert_eq!(mmsa_model_save(model, ckpt.as_ptr()), MmsaStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(mmsa_model_load(ckpt.as_ptr(), &mut loaded), MmsaStatus::Ok);
        let mut q = MmsaPrediction::default();
        assert_eq!(mmsa_model_predict(loaded, ds, 1, &mut q), MmsaStatus::Ok);
        assert_eq!(p.score, q.score);
        assert_eq!(p.intensity, q.intensity);

        mmsa_model_free(loaded);
        mmsa_model_free(model);
        mmsa_dataset_free(ds);
        mmsa_model_free(ptr::null_mut());
        mmsa_dataset_free(ptr::null_mut());
    }
}

#[test]
fn bad_inputs_map_to_codes() {
    unsafe {
        let mut model = ptr::null_mut();
        let (kind, tasks) = (cstr("GRU"), cstr("S"));
        assert_eq!(mmsa_model_build(kind.as_ptr(), tasks.as_ptr(), 0, &mut model), MmsaStatus::Config);
        assert!(model.is_null());
        assert!(last_error().contains("GRU"));
        let path = cstr("/nonexistent/model.ckpt");
        assert_eq!(mmsa_model_load(path.as_ptr(), &mut model), MmsaStatus::Io);
        let mut ds = ptr::null_mut();
        assert_eq!(mmsa_dataset_load(path.as_ptr(), &mut ds), MmsaStatus::Io);
        let mut p = MmsaPrediction::default();
        assert_eq!(mmsa_model_predict(ptr::null(), ptr::null(), 0, &mut p), MmsaStatus::NullPointer);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mmsa.h")).unwrap();
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct MmsaModel MmsaModel;"));
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(mmsa_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
