//! Black-box checks of the binary: subcommand wiring, artifact outputs,
//! and exit codes (0 success, 1 stage error, 2 config error).

use std::path::Path;
use std::process::Command;

fn tempolex() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tempolex"))
}

fn write_corpus(dir: &Path) -> String {
    let mut csv = String::from("timestamp,flow,pressure\n");
    for row in 0..800 {
        let block = row / 8;
        let flow = if block % 2 == 0 {
            ((row % 8) as f64 * 0.8).sin() * 3.0
        } else {
            (row % 8) as f64 * 0.5
        };
        let pressure = (row as f64 * 0.05).cos() * 2.0 + (row % 8) as f64 * 0.1;
        csv.push_str(&format!("r{row},{flow},{pressure}\n"));
    }
    let path = dir.join("plant.csv");
    std::fs::write(&path, csv).unwrap();
    dir.join("*.csv").display().to_string()
}

#[test]
fn pipeline_subcommand_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_corpus(dir.path());
    let out = dir.path().join("out");
    let status = tempolex()
        .args([
            "pipeline",
            "--data",
            &data,
            "--patch-size",
            "8",
            "--k",
            "8",
            "--seed",
            "1",
            "--svg",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "report.json",
        "vocab.json",
        "stats.json",
        "grammar.json",
        "rank_frequency.csv",
        "rank_frequency.svg",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
}

#[test]
fn build_vocab_tokenize_stats_grammar_chain() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_corpus(dir.path());
    let vocab = dir.path().join("vocab.json");
    let status = tempolex()
        .args([
            "build-vocab",
            "--data",
            &data,
            "--k",
            "8",
            "--patch-size",
            "8",
            "--seed",
            "3",
            "--out",
        ])
        .arg(&vocab)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(vocab.is_file());

    let tokens = dir.path().join("tokens.json");
    let status = tempolex()
        .args(["tokenize", "--data", &data, "--vocab"])
        .arg(&vocab)
        .arg("--out")
        .arg(&tokens)
        .status()
        .unwrap();
    assert!(status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&tokens).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 2); // two channels

    let stats_out = dir.path().join("stats_out");
    let status = tempolex()
        .args(["stats", "--data", &data, "--vocab"])
        .arg(&vocab)
        .arg("--out")
        .arg(&stats_out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(stats_out.join("stats.json").is_file());
    assert!(stats_out.join("pca.csv").is_file());
    assert!(stats_out.join("centroids.csv").is_file());

    let grammar_out = dir.path().join("grammar_out");
    let status = tempolex()
        .args(["grammar", "--data", &data, "--vocab"])
        .arg(&vocab)
        .arg("--out")
        .arg(&grammar_out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(grammar_out.join("grammar.json").is_file());
    assert!(grammar_out.join("transition_matrix.csv").is_file());
}

#[test]
fn theory_subcommand_reports_pass_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("theory.json");
    let output = tempolex()
        .args(["theory", "--only", "covering,genbound", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("covering: PASS"), "{stdout}");
    assert!(stdout.contains("genbound: PASS"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["experiments"].as_array().unwrap().len(), 2);
}

#[test]
fn empty_glob_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let status = tempolex()
        .args(["pipeline", "--data", "/nonexistent/*.csv", "--out"])
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn interior_gap_without_interpolate_is_a_stage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "x\n1.0\nNaN\n3.0\n").unwrap();
    let data = dir.path().join("*.csv").display().to_string();
    let status = tempolex()
        .args(["pipeline", "--data", &data, "--out"])
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_corpus(dir.path());
    let config_path = dir.path().join("run.json");
    let out = dir.path().join("from_config");
    std::fs::write(
        &config_path,
        serde_json::json!({
            "data_glob": data,
            "patch_len": 8,
            "k": 16,
            "seed": 5,
            "output_dir": out,
        })
        .to_string(),
    )
    .unwrap();
    // --k overrides the file's 16.
    let status = tempolex()
        .args(["pipeline", "--config"])
        .arg(&config_path)
        .args(["--k", "8"])
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["k"], 8);
    assert_eq!(report["config"]["patch_len"], 8);
    assert_eq!(report["config"]["seed"], 5);
}

#[test]
fn sweep_subcommand_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_corpus(dir.path());
    let out = dir.path().join("sweep");
    let status = tempolex()
        .args([
            "sweep",
            "--data",
            &data,
            "--patch-sizes",
            "8",
            "--ks",
            "4,8",
            "--seed",
            "2",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("sweep_summary.csv").is_file());
    assert!(out.join("p8_k4").join("report.json").is_file());
    assert!(out.join("p8_k8").join("report.json").is_file());
}
