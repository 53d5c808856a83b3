use std::path::Path;
use std::process::Command;

use spikefield_cli::{run, ExperimentConfig, Kind, RunOptions};

fn small() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{"neurons": 100, "ladder": [50, 100], "replicas": 6, "times": [0.5, 1.0],
            "paths": 40, "degree": 4, "closure_degree": 6, "coupled": 4, "dt": 0.002}"#,
    )
    .unwrap()
}

fn opts(dir: &Path, workers: usize) -> RunOptions {
    RunOptions {
        out: dir.to_path_buf(),
        workers: Some(workers),
        plotdata: true,
        assert: false,
    }
}

const KINDS: [Kind; 6] = [
    Kind::Simulate,
    Kind::SolveMeanfield,
    Kind::Rates,
    Kind::Fluctuations,
    Kind::LimitSystem,
    Kind::Mesoscopic,
];

#[test]
fn reruns_and_worker_counts_reproduce_hashes() {
    for kind in KINDS {
        let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
        let a = run(kind, small(), &opts(dirs[0].path(), 1)).unwrap();
        let b = run(kind, small(), &opts(dirs[1].path(), 1)).unwrap();
        let c = run(kind, small(), &opts(dirs[2].path(), 3)).unwrap();
        assert!(!a.hashes.is_empty());
        assert_eq!(a.hashes, b.hashes, "{kind:?}");
        assert_eq!(a.hashes, c.hashes, "{kind:?} with 3 workers");
        let m0 = std::fs::read(dirs[0].path().join("MANIFEST.json")).unwrap();
        let m1 = std::fs::read(dirs[1].path().join("MANIFEST.json")).unwrap();
        assert_eq!(m0, m1);
    }
}

#[test]
fn every_csv_carries_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(Kind::Fluctuations, small(), &opts(dir.path(), 1)).unwrap();
    for name in report.hashes.keys().filter(|n| n.ends_with(".csv")) {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let first = text.lines().next().unwrap();
        let head: serde_json::Value = serde_json::from_str(first.trim_start_matches("# ")).unwrap();
        assert_eq!(head["config"]["kind"], "fluctuations", "{name}");
    }
}

#[test]
fn rate_curve_starts_at_initial_rate() {
    let dir = tempfile::tempdir().unwrap();
    run(Kind::SolveMeanfield, ExperimentConfig::default(), &opts(dir.path(), 1)).unwrap();
    let text = std::fs::read_to_string(dir.path().join("rate_curve.csv")).unwrap();
    let row = text.lines().nth(2).unwrap();
    let mut cols = row.split(',');
    assert_eq!(cols.next(), Some("0"));
    let p0: f64 = cols.next().unwrap().parse().unwrap();
    assert!((p0 - 0.5).abs() < 1e-12, "{p0}");
}

#[test]
fn rate_table_has_one_row_per_size() {
    let cfg = ExperimentConfig {
        ladder: vec![100, 1000],
        replicas: 200,
        ..ExperimentConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    run(Kind::Rates, cfg, &opts(dir.path(), 1)).unwrap();
    let text = std::fs::read_to_string(dir.path().join("rate_table.csv")).unwrap();
    let lines: Vec<&str> = text.lines().skip(1).collect();
    assert!(lines[0].starts_with("N,replicas,coupling_mean,coupling_se"));
    assert_eq!(lines.len(), 3);
    for row in &lines[1..] {
        let cols: Vec<f64> = row.split(',').take(8).map(|c| c.parse().unwrap()).collect();
        assert!(cols[3] > 0.0 && cols[5] > 0.0 && cols[7] > 0.0, "{row}");
    }
}

fn binary(args: &[&str], config: &str) -> (i32, String) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_spikefield"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn exit_codes() {
    let (code, err) = binary(&["rates"], r#"{"neuronz": 3}"#);
    assert_eq!(code, 2);
    let rec: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(rec["error"], "config");

    let (code, err) = binary(&["solve-meanfield"], r#"{"max_iterations": 1}"#);
    assert_eq!(code, 3, "{err}");

    let (code, err) = binary(&["mesoscopic", "--assert"], r#"{"ladder": [60, 60], "replicas": 3, "paths": 1, "degree": 2}"#);
    assert_eq!(code, 4, "{err}");
    let rec: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(rec["failures"].as_array().unwrap().len(), 1);

    let (code, _) = binary(&["solve-meanfield", "--assert"], r#"{"times": [0.5, 1.0]}"#);
    assert_eq!(code, 0);
}
