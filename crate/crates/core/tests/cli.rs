use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

const FAST: &str = "version = 1\npreset = \"fast\"\nseed = 2\n[evaluate]\ninner_folds = 3\n";

fn prospect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prospect"))
        .args(args)
        .env_remove("PROSPECT_CONFIG")
        .env_remove("PROSPECT_OUTPUT_ROOT")
        .output()
        .expect("run the CLI")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn write(path: &Path, text: &str) -> PathBuf {
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

struct Fixture {
    root: PathBuf,
    config: PathBuf,
    features: PathBuf,
}

/// Small cohort with a heart-rate effect, extracted once per test binary.
fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let root = tempfile::tempdir().unwrap().keep();
        let spec = write(
            &root.join("spec.json"),
            r#"{"seed": 4, "n_participants": 8, "win_fraction": 0.5, "phase_durations_s": [15, 30, 15],
                "effects": [{"feature": "hr_mean", "d": 3}]}"#,
        );
        let config = write(&root.join("fast.toml"), FAST);
        ok(&prospect(&["synthgen", "--spec", s(&spec), "--out", s(&root.join("cohort"))]));
        let features = root.join("features");
        ok(&prospect(&[
            "--config",
            s(&config),
            "extract",
            "--manifests",
            s(&root.join("cohort/manifests")),
            "--out",
            s(&features),
        ]));
        Fixture { root, config, features }
    })
}

fn run_in(fx: &Fixture, name: &str, command: &[&str]) -> PathBuf {
    let out = fx.root.join(name);
    let mut args = vec!["--config", s(&fx.config)];
    args.extend_from_slice(command);
    args.extend_from_slice(&["--features", s(&fx.features), "--out", s(&out)]);
    ok(&prospect(&args));
    out
}

fn assert_files(dir: &Path, names: &[&str]) {
    for n in names {
        let p = dir.join(n);
        assert!(p.is_file() && std::fs::metadata(&p).unwrap().len() > 0, "missing {}", p.display());
    }
}

#[test]
fn extract_writes_window_tables() {
    let fx = fixture();
    let n = std::fs::read_dir(&fx.features).unwrap().count();
    assert!(n >= 8, "{n} files in the features directory");
}

#[test]
fn stats_writes_tables_and_qq_data() {
    let out = run_in(fixture(), "stats", &["stats"]);
    assert_files(&out, &["stats_ocular.csv", "stats_cardiac.csv", "qq_ocular.csv", "qq_cardiac.csv"]);
    let table = std::fs::read_to_string(out.join("stats_cardiac.csv")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("hr_mean,")), "{table}");
}

#[test]
fn train_writes_models_and_importance() {
    let out = run_in(fixture(), "train", &["train"]);
    assert_files(
        &out,
        &["model_ocular.json", "model_cardiac.json", "importance_ocular.csv", "importance_cardiac.csv"],
    );
    let imp = std::fs::read_to_string(out.join("importance_ocular.csv")).unwrap();
    let total: f64 = imp.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 100.0).abs() < 1e-6, "importance sums to {total}");
}

#[test]
fn evaluate_writes_report_and_honours_seed_flag() {
    let fx = fixture();
    let out = fx.root.join("evaluate");
    ok(&prospect(&[
        "--config",
        s(&fx.config),
        "--seed",
        "17",
        "evaluate",
        "--features",
        s(&fx.features),
        "--out",
        s(&out),
    ]));
    assert_files(&out, &["report.json", "confusion.csv"]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 17);
    assert_eq!(report["folds"].as_array().unwrap().len(), 8);
}

#[test]
fn ablations_write_their_tables() {
    let fx = fixture();
    let out = run_in(fx, "ablate_consensus", &["ablate", "--which", "consensus"]);
    assert_files(&out, &["ablation_consensus.csv"]);
    let out = run_in(fx, "ablate_ocular", &["ablate", "--which", "ocular-modules"]);
    assert_files(&out, &["ablation_ocular.csv"]);
}

#[test]
fn trends_write_csv_and_svg() {
    let out = run_in(fixture(), "trends", &["trends", "--svg"]);
    assert_files(&out, &["trends_ocular.csv", "trends_cardiac.csv", "svg/cardiac_hr_mean.svg"]);
    let svg = std::fs::read_to_string(out.join("svg/cardiac_hr_mean.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn relative_outputs_land_under_the_output_root() {
    let fx = fixture();
    let root = fx.root.join("rooted");
    let out = Command::new(env!("CARGO_BIN_EXE_prospect"))
        .args(["--config", s(&fx.config), "trends", "--features", s(&fx.features), "--out", "rel"])
        .env("PROSPECT_OUTPUT_ROOT", &root)
        .output()
        .unwrap();
    ok(&out);
    assert_files(&root.join("rel"), &["trends_cardiac.csv"]);
}

#[test]
fn configuration_errors_exit_2_before_any_output() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("version.toml", "version = 2\n"),
        ("unknown.toml", "version = 1\nbogus = true\n"),
        ("alpha.toml", "version = 1\n[stats]\nalpha = 2.0\n"),
        ("folds.toml", "version = 1\n[evaluate]\ninner_folds = 1\n"),
    ];
    for (name, text) in cases {
        let config = write(&dir.path().join(name), text);
        let out_dir = dir.path().join(format!("out_{name}"));
        let out = prospect(&[
            "--config",
            s(&config),
            "evaluate",
            "--features",
            s(&fx.features),
            "--out",
            s(&out_dir),
        ]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out_dir.exists(), "{name} wrote output");
    }
    let out = prospect(&["--jobs", "0", "stats", "--features", s(&fx.features), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = prospect(&["stats", "--features", s(&fx.features)]);
    assert_eq!(out.status.code(), Some(2), "missing output path");
}

#[test]
fn missing_or_empty_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let out = prospect(&["evaluate", "--features", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let out = prospect(&[
        "extract",
        "--manifests",
        s(&dir.path().join("empty")),
        "--out",
        s(&dir.path().join("f")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn leaked_training_set_exits_4() {
    let fx = fixture();
    let config = write(&fx.root.join("leak.toml"), &format!("{FAST}inject_leak = true\n"));
    let out_dir = fx.root.join("leak");
    let out = prospect(&[
        "--config",
        s(&config),
        "evaluate",
        "--features",
        s(&fx.features),
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_dir.join("report.json").exists());
}
