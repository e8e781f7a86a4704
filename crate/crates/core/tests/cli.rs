use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lumpwave::cli::{self, ExperimentConfig, Scenario, EXIT_IO, EXIT_OK, EXIT_VALIDATION};

fn lumpwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lumpwave")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn egorov_reruns_are_byte_identical_and_reportable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = lumpwave(&["egorov", "--out", path(dir), "--seed", "3"]);
        assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv = fs::read(a.join("egorov.csv")).unwrap();
    assert_eq!(csv, fs::read(b.join("egorov.csv")).unwrap());
    assert!(String::from_utf8(csv).unwrap().starts_with("h,egorov_residual,unitarity,group_law\n"));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema_version"], cli::SCHEMA_VERSION);
    assert_eq!(manifest["pass"], true);

    let rep = lumpwave(&["report", path(&a)]);
    assert_eq!(rep.status.code(), Some(EXIT_OK));
    let text = String::from_utf8(rep.stdout).unwrap();
    assert!(text.contains("PASS") && !text.contains("FAIL"), "{text}");
    assert!(a.join("summary.txt").exists());
}

#[test]
fn negative_k_is_a_validation_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lumpwave(&["quasimode", "--k-list", "-5", "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k"));
    assert!(!tmp.path().join("manifest.json").exists());
}

#[test]
fn malformed_config_file_is_a_validation_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "k_list = [50]\nno_such_key = 1\n").unwrap();
    let out = lumpwave(&["egorov", "--config", path(&cfg), "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));
}

#[test]
fn report_on_an_empty_directory_is_a_missing_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lumpwave(&["report", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(EXIT_IO));
}

#[test]
fn small_quasimode_sweep_writes_a_residual_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        scenario: Scenario::QuasimodeSweep,
        k_list: vec![50, 100],
        ..ExperimentConfig::default()
    };
    let m = cli::run(&cfg, tmp.path()).unwrap();
    assert!(m.artifacts.contains(&"quasimode.csv".to_string()));
    let slope = m.checks.iter().find(|c| c.name == "residual_slope").unwrap();
    assert!(slope.pass, "{slope:?}");
    let text = cli::report(tmp.path()).unwrap();
    assert!(text.contains("residual slope"));
    let plot = fs::read_to_string(tmp.path().join("plot_residual.csv")).unwrap();
    assert_eq!(plot.lines().count(), 3);
}

#[test]
fn config_round_trips_through_toml() {
    let text = r#"
scenario = "resolvent_scan"
h_list = [0.02, 0.01]
seed = 9

[tolerances]
numeric = 1e-9

[resolvent]
variants = ["viscous_flat"]
cutoff = false
"#;
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.scenario, Scenario::ResolventScan);
    assert_eq!(cfg.hs(), vec![0.02, 0.01]);
    assert_eq!(cfg.tolerances.numeric, 1e-9);
    let tmp = tempfile::tempdir().unwrap();
    let m = cli::run(&cfg, tmp.path()).unwrap();
    assert!(m.checks.iter().any(|c| c.name == "apriori_viscous_flat" && c.pass));
}
