use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use prospect_ffi::*;

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("prospect.h")
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for f in [
        "prospect_version",
        "prospect_last_error",
        "prospect_compute_metrics",
        "prospect_rmssd",
        "prospect_synthgen",
        "prospect_extract",
        "prospect_dataset_load",
        "prospect_dataset_save",
        "prospect_dataset_len",
        "prospect_dataset_free",
        "prospect_evaluate",
        "prospect_report_metrics",
        "prospect_report_json",
        "prospect_report_free",
        "prospect_string_free",
    ] {
        assert!(text.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(text.contains("typedef struct ProspectDataset ProspectDataset;"));
    assert!(text.contains("PROSPECT_STATUS_LEAKAGE = 4"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "prospect.h"

int main(void) {
    ProspectConfusion cm = {14, 2, 3, 16};
    ProspectMetrics m;
    if (prospect_compute_metrics(&cm, &m) != PROSPECT_STATUS_OK) return 1;
    if (prospect_compute_metrics(NULL, &m) != PROSPECT_STATUS_NULL_ARGUMENT) return 2;
    if (prospect_last_error() == NULL) return 3;
    double nn[3] = {800.0, 810.0, 790.0};
    double r = 0.0;
    if (prospect_rmssd(nn, 3, &r) != PROSPECT_STATUS_OK) return 4;
    printf("%s %.6f %.6f %.6f\n", prospect_version(), m.bacc, m.mcc, r);
    return 0;
}
"#;

/// Compiles a C client against the generated header and the static library.
#[test]
fn c_client_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libprospect_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let bin = dir.path().join("client");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "client exited with {:?}", out.status);
    let line = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(fields[0], env!("CARGO_PKG_VERSION"));
    let v: Vec<f64> = fields[1..].iter().map(|s| s.parse().unwrap()).collect();
    assert!((v[0] - 0.8586).abs() < 1e-4, "{line}");
    assert!((v[1] - 0.7147).abs() < 1e-4, "{line}");
    assert!((v[2] - 15.811).abs() < 1e-3, "{line}");
}

#[test]
fn synthesize_extract_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"seed": 4, "n_participants": 8, "win_fraction": 0.5, "phase_durations_s": [15, 30, 15],
            "effects": [{"feature": "hr_mean", "d": 3}]}"#,
    )
    .unwrap();
    let config = dir.path().join("config.toml");
    std::fs::write(&config, "version = 1\npreset = \"fast\"\n[evaluate]\ninner_folds = 3\n").unwrap();
    let cohort = dir.path().join("cohort");
    let features = dir.path().join("features");

    unsafe {
        assert_eq!(prospect_synthgen(cstr(&spec).as_ptr(), cstr(&cohort).as_ptr()), ProspectStatus::Ok);
        let mut ds = ptr::null_mut();
        let status = prospect_extract(cstr(&cohort.join("manifests")).as_ptr(), ptr::null(), &mut ds);
        assert_eq!(status, ProspectStatus::Ok);
        assert_eq!(prospect_dataset_len(ds), 8);
        assert_eq!(prospect_dataset_save(ds, cstr(&features).as_ptr()), ProspectStatus::Ok);
        prospect_dataset_free(ds);

        let mut ds = ptr::null_mut();
        assert_eq!(prospect_dataset_load(cstr(&features).as_ptr(), &mut ds), ProspectStatus::Ok);
        let mut report = ptr::null_mut();
        let status = prospect_evaluate(ds, cstr(&config).as_ptr(), ProspectModality::Cardiac, 1, &mut report);
        assert_eq!(status, ProspectStatus::Ok, "{:?}", CStr::from_ptr(prospect_last_error()));

        let mut cm = ProspectConfusion::default();
        let mut m = ProspectMetrics::default();
        assert_eq!(prospect_report_metrics(report, ProspectModality::Cardiac, &mut cm, &mut m), ProspectStatus::Ok);
        assert_eq!(cm.tn + cm.fp + cm.fn_ + cm.tp, 8);
        assert!((0.0..=1.0).contains(&m.bacc));
        assert_eq!(
            prospect_report_metrics(report, ProspectModality::Ocular, ptr::null_mut(), &mut m),
            ProspectStatus::Invalid
        );

        let mut json = ptr::null_mut();
        assert_eq!(prospect_report_json(report, &mut json), ProspectStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        prospect_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["folds"].as_array().unwrap().len(), 8);

        prospect_report_free(report);
        prospect_dataset_free(ds);
    }
}

#[test]
fn bad_configuration_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    std::fs::write(&config, "version = 7\n").unwrap();
    let mut ds = ptr::null_mut();
    let status = unsafe { prospect_extract(cstr(dir.path()).as_ptr(), cstr(&config).as_ptr(), &mut ds) };
    assert_eq!(status, ProspectStatus::Invalid);
    let msg = unsafe { CStr::from_ptr(prospect_last_error()) }.to_string_lossy().into_owned();
    assert!(msg.contains("version 7"), "{msg}");
}
