use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nlburgers::diagnostics::DiagnosticsRecord;
use nlburgers::runner;
use nlburgers::spectral::forward;
use nlburgers::{RealField, SpectralGrid};
use tempfile::TempDir;

fn nlburgers(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlburgers"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn run_json(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let out = nlburgers(&[
            "run", "--model", "alpha1", "--initial", "random:0.5", "--seed", "11",
            "--n-modes", "128", "--t-final", "0.2", "--output-every", "0.05",
            "--output-dir", dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(fs::read(dir.join("timeseries.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn header_and_row_count() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("r");
    let out = nlburgers(&[
        "run", "--n-modes", "64", "--t-final", "0.1", "--output-every", "0.025",
        "--output-dir", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.join("timeseries.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "t,linf_p,linf_dxp,h0,h1,h2,a0,a1,energy_E,energy_F,energy_G,tail_fraction,dt"
    );
    let r = rows(&dir.join("timeseries.csv"));
    let times: Vec<f64> = r.iter().map(|row| row[0]).collect();
    assert_eq!(times.len(), 5);
    for (t, want) in times.iter().zip([0.0, 0.025, 0.05, 0.075, 0.1]) {
        assert!((t - want).abs() < 1e-12, "{t} vs {want}");
    }
    assert!(r.iter().flatten().all(|v| v.is_finite()));
    let snaps = fs::read_dir(&dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("snapshot_"))
        .count();
    assert_eq!(snaps, 5);
}

#[test]
fn config_file_then_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    let dir = tmp.path().join("out");
    fs::write(&cfg, r#"{"beta": 2.0, "model": "alpha1", "n_modes": 64, "t_final": 0.0}"#).unwrap();
    let out = nlburgers(&[
        "run", "--config", cfg.to_str().unwrap(), "--beta", "3", "--output-dir", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let meta = run_json(&dir);
    assert_eq!(meta["config"]["beta"], 3.0);
    assert_eq!(meta["config"]["model"], "alpha1");
    assert_eq!(meta["config"]["n_modes"], 64);
}

#[test]
fn invalid_inputs_exit_with_one() {
    let out = nlburgers(&["run", "--beta", "-1", "--output-dir", "/nonexistent/never"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));

    let out = nlburgers(&["run", "--preset", "fig_alpha9"]);
    assert_eq!(out.status.code(), Some(1));

    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("typo.json");
    fs::write(&cfg, r#"{"betta": 2.0}"#).unwrap();
    let out = nlburgers(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("betta"));

    let out = nlburgers(&["run", "--model", "general", "--alpha", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zero_final_time_gives_initial_row() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("t0");
    let out = nlburgers(&[
        "run", "--model", "alpha0", "--n-modes", "128", "--t-final", "0",
        "--initial", "sines:-2,4", "--output-dir", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let r = rows(&dir.join("timeseries.csv"));
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][0], 0.0);
    assert!((r[0][1] - 2.0).abs() < 1e-12);
    assert!((r[0][2] - 8.0).abs() < 1e-9);
}

#[test]
fn snapshots_round_trip_to_recorded_norms() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("snap");
    let out = nlburgers(&[
        "run", "--model", "alpha2", "--n-modes", "128", "--t-final", "0.3", "--output-every", "0.1",
        "--initial", "sines:1,1;0.5,3,0.7", "--output-dir", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let cfg = runner::preset("fig_alpha2").unwrap();
    let params = nlburgers::ModelParams::new(cfg.model, 2.0, 2.0, 1.0);
    let series = rows(&dir.join("timeseries.csv"));
    let grid = SpectralGrid::new(128).unwrap();
    for row in &series {
        let path = dir.join(runner::snapshot_name(row[0]));
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,p\n"));
        let p: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        let spec = forward(&RealField::new(&grid, p).unwrap()).unwrap();
        let rec = DiagnosticsRecord::compute(row[0], &spec, &params, row[12]);
        let recomputed = [rec.linf_p, rec.h_norms[0], rec.h_norms[1], rec.h_norms[2], rec.a_norms[0], rec.a_norms[1]];
        let recorded = [row[1], row[3], row[4], row[5], row[6], row[7]];
        for (a, b) in recomputed.iter().zip(recorded) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "t = {}: {a} vs {b}", row[0]);
        }
    }
}

#[test]
fn last_row_matches_termination_time() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("a0");
    let out = nlburgers(&["run", "--preset", "fig_alpha0", "--n-modes", "1024", "--output-dir", dir.to_str().unwrap()]);
    let code = out.status.code().unwrap();
    assert!(code == 2 || code == 3, "exit {code}");
    let meta = run_json(&dir);
    assert_eq!(meta["exit_code"], code);
    let t_end = meta["termination"]["time"].as_f64().unwrap();
    let r = rows(&dir.join("timeseries.csv"));
    assert_eq!(r.last().unwrap()[0], t_end);
    assert!(t_end < 0.5);
    assert!(r.iter().flatten().all(|v| v.is_finite()));
    assert!(meta["version"].is_string());
    assert!(meta["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = TempDir::new().unwrap();
    let out = nlburgers(&[
        "sweep", "--param", "beta", "--values", "0,1,2", "--n-modes", "64", "--t-final", "0.05",
        "--output-dir", tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for v in ["0", "1", "2"] {
        let meta = run_json(&tmp.path().join(format!("beta_{v}")));
        assert_eq!(meta["config"]["beta"], v.parse::<f64>().unwrap());
    }
}

#[test]
fn validate_writes_report() {
    let tmp = TempDir::new().unwrap();
    let report = tmp.path().join("cc.json");
    let out = nlburgers(&["validate", "cross-check", "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["verdict"], "pass");
    for key in ["parameter", "values", "errors", "estimated_order", "threshold", "metadata"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }

    let report = tmp.path().join("lin.json");
    let out = nlburgers(&["validate", "linear", "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}
