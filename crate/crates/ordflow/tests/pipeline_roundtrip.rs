//! End-to-end pipeline checks on a small synthetic run: artifact shapes,
//! cross-file consistency, estimate accuracy against the generating truth,
//! and the CLI's exit-code contract.

use ordflow::dtmc::{Classification, TransitionMatrix};
use ordflow::pipeline::{run_pipeline, run_stationary, Config, SynthManifest, TpmFile};
use ordflow::STATE_COUNT;
use std::path::Path;
use std::process::Command;

fn small_config() -> Config {
    let mut config = Config::default();
    config.days.truncate(2);
    config.synth.events_per_zone = 250;
    config.synth.seed = 7;
    config
}

fn read_csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn replicate_produces_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let config = small_config();
    let bundle = run_pipeline(&config, out).expect("pipeline");

    assert!(bundle.synthetic);
    assert_eq!(bundle.tpms.len(), 18, "3 categories x 6 zones");
    assert!(bundle
        .classifications
        .iter()
        .all(|(_, _, c)| *c == Classification::Ergodic));
    assert_eq!(bundle.jsd.categories.len(), 3);
    assert_eq!(bundle.ingest.sequence_count, 15 * 2 * 6);

    // Every stage's artifact exists.
    for name in [
        "ingest_report.json",
        "order_counts.csv",
        "gtest.json",
        "gtest.csv",
        "estimates.json",
        "average_summary.json",
        "doi.csv",
        "transitions_add_delete.csv",
        "transitions_fill_add.csv",
        "stationary.csv",
        "stationary.json",
        "jsd_HMC.csv",
        "jsd_MMC.csv",
        "jsd_LMC.csv",
        "pca_scores.csv",
        "pca_summary.json",
        "clusters.csv",
        "k_distance.csv",
        "cluster_summary.json",
        "estimate_vs_truth.csv",
        "run_manifest.json",
        "synth_manifest.json",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let seqs = std::fs::read_dir(out.join("sequences")).unwrap().count();
    assert_eq!(seqs, 180);
    let days = std::fs::read_dir(out.join("data")).unwrap().count();
    assert_eq!(days, 2);

    // The averaged matrices round-trip through their JSON schema as valid
    // row-stochastic matrices.
    let tpm_files = std::fs::read_dir(out.join("tpm")).unwrap().count();
    assert_eq!(tpm_files, 18 * 2, "matrix + heatmap per (category, zone)");
    let text = std::fs::read_to_string(out.join("tpm").join("HMC_T1.json")).unwrap();
    let file: TpmFile = serde_json::from_str(&text).unwrap();
    assert_eq!(file.states.len(), STATE_COUNT);
    let matrix = TransitionMatrix::from_probs(file.probs.clone()).expect("valid rows");
    assert_eq!(file.support.len(), matrix.support_rows().len());

    // Stationary table: 18 rows of 12 fields, each distribution summing
    // to one.
    let stationary = read_csv_rows(&out.join("stationary.csv"));
    assert_eq!(stationary.len(), 19);
    assert_eq!(stationary[0].len(), 2 + STATE_COUNT);
    for row in &stationary[1..] {
        let total: f64 = row[2..].iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{row:?} sums to {total}");
    }

    // JSD tables are lower-triangular with a zero diagonal.
    let jsd = read_csv_rows(&out.join("jsd_HMC.csv"));
    assert_eq!(jsd.len(), 7);
    for (i, row) in jsd[1..].iter().enumerate() {
        assert_eq!(row.len(), i + 2, "row {i} should hold label + {} cells", i + 1);
        let diagonal: f64 = row[i + 1].parse().unwrap();
        assert_eq!(diagonal, 0.0);
    }

    // Embedding and clustering cover all 18 matrices.
    let scores = read_csv_rows(&out.join("pca_scores.csv"));
    assert_eq!(scores.len(), 19);
    assert_eq!(scores[0], vec!["group", "label", "pc1", "pc2"]);
    let clusters = read_csv_rows(&out.join("clusters.csv"));
    assert_eq!(clusters.len(), 19);
    assert!(clusters[1..]
        .iter()
        .all(|row| row[5] == "core" || row[5] == "border" || row[5] == "noise"));

    // Estimates track the recorded generating truth.
    let manifest: SynthManifest =
        serde_json::from_str(&std::fs::read_to_string(out.join("synth_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest.master_seed, 7);
    assert_eq!(manifest.truth.len(), 18);
    assert_eq!(manifest.streams.len(), 180);
    let worst = bundle.worst_truth_error.expect("synthetic run");
    assert!(
        worst > 0.0 && worst < 0.25,
        "worst estimate-vs-truth error {worst} out of the plausible band"
    );
    assert_eq!(bundle.truth.len(), 18);

    // Re-running one stage over the same artifacts is stable.
    let again = run_stationary(&config, out).expect("stationary rerun");
    assert_eq!(again.rows.len(), 18);
}

#[test]
fn truth_errors_shrink_with_more_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config();
    config.days.truncate(1);
    config.synth.events_per_zone = 80;
    let small = run_pipeline(&config, &dir.path().join("small"))
        .expect("small run")
        .worst_truth_error
        .unwrap();
    config.synth.events_per_zone = 4000;
    let large = run_pipeline(&config, &dir.path().join("large"))
        .expect("large run")
        .worst_truth_error
        .unwrap();
    assert!(
        large < small,
        "worst error should shrink with 50x the data ({small} -> {large})"
    );
}

// ---------------------------------------------------------------------------
// CLI contract
// ---------------------------------------------------------------------------

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ordflow"))
}

#[test]
fn cli_help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let status = cli().arg(flag).output().unwrap();
        assert!(status.status.success(), "{flag} should exit 0");
    }
}

#[test]
fn cli_usage_and_validation_errors_exit_one() {
    let out = cli().arg("--definitely-not-a-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.json");
    std::fs::write(&config_path, r#"{"days": []}"#).unwrap();
    let out = cli()
        .args(["--config", config_path.to_str().unwrap()])
        .args(["--out", dir.path().join("out").to_str().unwrap()])
        .arg("simulate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("days"), "stderr should name the field: {stderr}");
}

#[test]
fn cli_missing_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .args(["--out", dir.path().to_str().unwrap()])
        .arg("gtest")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("ingest"), "hint should point at ingest: {stderr}");
}

#[test]
fn cli_replicate_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    let config = {
        let mut c = small_config();
        c.days.truncate(1);
        c.synth.events_per_zone = 120;
        c
    };
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let out = cli()
        .args(["--config", config_path.to_str().unwrap()])
        .args(["--out", out_dir.to_str().unwrap()])
        .arg("replicate")
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("pipeline finished"), "stdout: {stdout}");
    assert!(out_dir.join("run_manifest.json").is_file());

    // A seed override via the flag must change the synthetic stream.
    let out2_dir = dir.path().join("out2");
    let out2 = cli()
        .args(["--config", config_path.to_str().unwrap()])
        .args(["--out", out2_dir.to_str().unwrap()])
        .args(["--seed", "99"])
        .arg("replicate")
        .output()
        .unwrap();
    assert_eq!(out2.status.code(), Some(0));
    let first = std::fs::read(out_dir.join("stationary.csv")).unwrap();
    let second = std::fs::read(out2_dir.join("stationary.csv")).unwrap();
    assert_ne!(first, second, "different seeds should change the results");
}
