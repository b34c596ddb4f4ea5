//! End-to-end checks of the `rdlab` binary and the shipped presets.

use std::path::PathBuf;
use std::process::Command;

fn preset(name: &str) -> String {
    format!("{}/../../presets/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn rdlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rdlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn every_shipped_preset_parses() {
    let dir = PathBuf::from(format!("{}/../../presets", env!("CARGO_MANIFEST_DIR")));
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            rdlab::config::ExperimentConfig::from_file(&path)
                .unwrap_or_else(|e| panic!("{path:?} failed to parse: {e}"));
            seen += 1;
        }
    }
    assert!(seen >= 7, "expected the shipped presets, found {seen}");
}

#[test]
fn unknown_config_key_names_the_key_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "solver.dtt = 0.1\n").unwrap();
    let out = rdlab(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("solver.dtt"), "stderr: {stderr}");
}

#[test]
fn check_subcommand_is_green_on_the_default_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdlab(&[
        "check",
        "--config",
        &preset("chafee_lambda2.cfg"),
        "--override",
        "domain.resolution=63",
        "--override",
        "solver.horizon=2.0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "stdout: {stdout}");
    assert!(stdout.contains("PASS"));
    assert!(!stdout.contains("FAIL"), "stdout: {stdout}");
    assert!(dir.path().join("check_report.json").exists());
}

#[test]
fn simulate_emits_norm_logs_and_terminals() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdlab(&[
        "simulate",
        "--config",
        &preset("linear_decay.cfg"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("norms_0.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "time,l2,linf,h1,lm_64");
    assert!(dir.path().join("terminal_0.field").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("simulate_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["members"], 4);
}

#[test]
fn ladder_subcommand_accepts_a_tau_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdlab(&[
        "ladder",
        "--config",
        &preset("ladder_lambda2.cfg"),
        "--tau",
        "0.5",
        "--override",
        "ensemble.count=4",
        "--override",
        "ladder.holdout=1",
        "--override",
        "domain.resolution=63",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ladder_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["linf_fit"]["tau"], 0.5);
    assert_eq!(report["holdout_members"], 1);
    assert!(report["holdout_violations"].as_array().unwrap().is_empty());
}

#[test]
fn equilibria_subcommand_writes_manifest_and_states() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdlab(&[
        "equilibria",
        "--config",
        &preset("chafee_lambda5.cfg"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("equilibria.json")).unwrap())
            .unwrap();
    assert_eq!(report["count"], 5);
    let states = rdlab::report::read_field_set(&dir.path().join("equilibria.bin")).unwrap();
    assert_eq!(states.len(), 5);
}

#[test]
fn attractor_subcommand_reports_forward_invariance() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdlab(&[
        "attractor",
        "--config",
        &preset("chafee_lambda2.cfg"),
        "--override",
        "domain.resolution=63",
        "--override",
        "ensemble.count=3",
        "--override",
        "attractor.amplitudes=1e-4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("attractor_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["equilibria"], 3);
    let invariance = report["forward_invariance"].as_f64().unwrap();
    assert!(invariance <= 2e-3, "forward invariance {invariance}");
    let sample = rdlab::report::read_field_set(&dir.path().join("attractor_sample.bin")).unwrap();
    assert!(sample.len() as u64 >= 1000, "sample size {}", sample.len());
}

#[test]
fn dimension_subcommand_certifies_the_point_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdlab(&[
        "dimension",
        "--config",
        &preset("point_attractor.cfg"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dimension_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["paper"]["point_attractor"], true);
    assert_eq!(report["paper"]["bound_2n"], 0.0);
    assert_eq!(report["search"]["Feasible"]["bound"], 0.0);
}

#[test]
fn seed_flag_changes_the_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, seed) in [(&out_a, "1"), (&out_b, "2")] {
        let st = rdlab(&[
            "simulate",
            "--config",
            &preset("chafee_lambda2.cfg"),
            "--override",
            "ensemble.count=1",
            "--override",
            "solver.horizon=0.1",
            "--override",
            "domain.resolution=63",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(st.status.success());
    }
    let a = std::fs::read(out_a.join("norms_0.csv")).unwrap();
    let b = std::fs::read(out_b.join("norms_0.csv")).unwrap();
    assert_ne!(a, b, "different seeds must produce different ensembles");
}
