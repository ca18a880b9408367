mod common;

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use bidguard::pipeline::{emit_report, read_report, run_pipeline, PipelineConfig, RunManifest, REPORT_FILES};
use bidguard::Error;
use common::demo_config;

/// One demo run per test binary.
fn demo_run() -> &'static (tempfile::TempDir, RunManifest) {
    static RUN: OnceLock<(tempfile::TempDir, RunManifest)> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let manifest = run_pipeline(&demo_config(), dir.path(), 2).unwrap();
        (dir, manifest)
    })
}

fn out_dir() -> PathBuf {
    demo_run().0.path().to_path_buf()
}

#[test]
fn demo_run_writes_every_report() {
    let (dir, manifest) = demo_run();
    for f in REPORT_FILES {
        assert!(dir.path().join(f).exists(), "{f}");
        assert!(manifest.artifacts.contains_key(f));
    }
    assert!(dir.path().join("conference/manifest.json").exists());
    assert!(!dir.path().join("STALE").exists());
    let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let reread: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(&reread, manifest);
    let digest = bidguard::conference::sha256_hex(&std::fs::read(dir.path().join("table1.csv")).unwrap());
    assert_eq!(manifest.artifacts["table1.csv"], digest);
}

#[test]
fn summary_quotes_the_csv_values() {
    let dir = out_dir();
    let text = emit_report(&dir).unwrap();
    let table1 = read_report(&dir, "table1.csv").unwrap();
    let row = table1.find_row("setting", "md=0").unwrap();
    let line = text.lines().find(|l| l.starts_with("quality md=0")).expect("quality line");
    let frac = &table1.rows[row][table1.column("frac_positive_bids").unwrap()];
    assert!(line.split_whitespace().nth(2) == Some(frac.as_str()), "{line} vs {frac}");
    for section in ["simple black-box", "colluding", "detection TPR", "TRIM"] {
        assert!(text.contains(section), "{section}");
    }
    // Six decimals everywhere.
    let v = table1.rows[row][table1.column("avg_tpms").unwrap()].clone();
    assert_eq!(v.split('.').nth(1).map(str::len), Some(6));
}

#[test]
fn empty_directory_is_missing_reports() {
    let dir = tempfile::tempdir().unwrap();
    match emit_report(dir.path()) {
        Err(Error::MissingFile(name)) => assert!(name.ends_with("fig1.csv")),
        other => panic!("expected missing file, got {other:?}"),
    }
}

#[test]
fn oversized_candidate_set_is_a_parameter_error() {
    let mut cfg = demo_config();
    cfg.experiment.k = 10_000;
    let dir = tempfile::tempdir().unwrap();
    let err = run_pipeline(&cfg, dir.path(), 1).unwrap_err();
    assert!(err.is_param(), "{err}");
}

#[test]
fn config_round_trips_and_rejects_unknown_keys() {
    let cfg = demo_config();
    assert_eq!(PipelineConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    assert!(PipelineConfig::from_json(r#"{"seed": 1, "bogus": 2}"#).is_err());
    let missing = PipelineConfig::load(Path::new("/nonexistent/config.json"));
    assert!(missing.is_err());
}
