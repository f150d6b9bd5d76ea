//! End-to-end runs of the `priorgp` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn priorgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_priorgp"))
        .args(args)
        .env_remove("PRIORGP_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = priorgp(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const GENERATOR: &str = r#"{
    "basis": {"kind": "polynomial", "order": 2},
    "coef_mean": [1.0, 0.5, 0.02],
    "coef_cov": [[0.04, 0.0, 0.0], [0.0, 0.0025, 0.0], [0.0, 0.0, 0.000004]],
    "noise_sd": 0.1,
    "sampling": {"kind": "grid", "xs": [10, 13, 16, 19, 22, 25, 28, 31, 34, 37, 40]},
    "count": 6,
    "seed": 11
}"#;

/// Synthesizes a small quadratic ensemble and returns its manifest path.
fn synthetic(dir: &Path) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let gen = dir.join("generator.json");
    std::fs::write(&gen, GENERATOR).unwrap();
    let out = dir.join("data");
    ok(&["synthesize", "--generator", s(&gen), "--out", s(&out)]);
    out.join("manifest.json")
}

fn json(text: &[u8]) -> Value {
    serde_json::from_slice(text).unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(text)))
}

#[test]
fn help_documents_every_flag() {
    let expected: &[(&str, &[&str])] = &[
        ("ingest", &["--config", "--dataset", "--out", "--seed", "--threads", "--no-timing"]),
        ("synthesize", &["--generator", "--seed", "--out"]),
        ("select-order", &["--candidates", "--dataset"]),
        ("fit", &["--method", "--order", "--error-estimator", "--starts", "--quadrature-direct"]),
        ("predict", &["--predictive-noise", "--observed", "--method"]),
        ("benchmark", &["--methods", "--threads", "--no-timing", "--starts", "--quadrature-direct"]),
        ("calibrate", &["--predictive-noise", "--method"]),
        ("variance-forecast", &["--model", "--schedule", "--target", "--steps"]),
        ("diagnose", &["--model", "--grid-points"]),
        ("validate", &["<PATH>"]),
    ];
    for (cmd, flags) in expected {
        let out = ok(&[cmd, "--help"]);
        let text = String::from_utf8(out.stdout).unwrap();
        for flag in *flags {
            let line = text
                .lines()
                .find(|l| l.trim_start().starts_with(flag) || l.contains(&format!(", {flag}")))
                .unwrap_or_else(|| panic!("`{cmd} --help` lacks {flag}:\n{text}"));
            // clap puts the description on the same line or the next one
            let idx = text.find(line).unwrap() + line.len();
            let described = line.split("  ").filter(|p| !p.trim().is_empty()).count() > 1
                || text[idx..].lines().nth(1).is_some_and(|l| !l.trim().is_empty() && !l.trim().starts_with('-'));
            assert!(described, "`{cmd} --help` does not describe {flag}:\n{text}");
        }
    }
}

#[test]
fn benchmark_writes_one_row_per_method() {
    let dir = TempDir::new().unwrap();
    let manifest = synthetic(dir.path());
    let cfg = dir.path().join("bench.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{
                "dataset": "{}",
                "methods": [
                    {{"label": "GPM-curr"}},
                    {{"label": "GPM-prev-ZM-SE"}},
                    {{"label": "GPM-prev-POLY"}},
                    {{"label": "IGPM-poly"}},
                    {{"label": "IGPM-paris", "basis": {{"width": 152.4, "stress_range": 48.26,
                      "initial_crack": 9.0, "material_c": 8.7096e-11, "alphas": [2.9, 3.2]}}}}
                ],
                "flags": {{"starts": 2}}
            }}"#,
            s(&manifest)
        ),
    )
    .unwrap();
    let out = dir.path().join("bench");
    ok(&["benchmark", "--config", s(&cfg), "--out", s(&out)]);
    let text = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "model,rmse,mape,rmse_half,mape_half,pred_time_s,select_time_s");
    let labels: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["GPM-curr", "GPM-prev-ZM-SE", "GPM-prev-POLY", "IGPM-poly", "IGPM-paris"]);
    assert!(out.join("config.json").is_file());
    assert!(out.join("series").join("IGPM-paris.csv").is_file());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let manifest = synthetic(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "benchmark",
            "--dataset",
            s(&manifest),
            "--methods",
            "GPM-prev-POLY,IGPM-poly",
            "--starts",
            "3",
            "--seed",
            "5",
            "--no-timing",
            "--out",
            s(&out),
        ]);
        out
    };
    let a = run("a");
    let b = run("b");
    for f in ["metrics.csv", "series/GPM-prev-POLY.csv", "series/IGPM-poly.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    // the echoed config reproduces the run from any directory
    let c = dir.path().join("c");
    ok(&["benchmark", "--config", s(&a.join("config.json")), "--out", s(&c)]);
    assert_eq!(std::fs::read(a.join("metrics.csv")).unwrap(), std::fs::read(c.join("metrics.csv")).unwrap());
}

#[test]
fn synthesis_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = synthetic(&dir.path().join("a"));
    let b = synthetic(&dir.path().join("b"));
    let read = |m: &Path| std::fs::read(m.parent().unwrap().join("trajectories.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn variance_forecast_needs_no_measurements() {
    let dir = TempDir::new().unwrap();
    let manifest = synthetic(dir.path());
    let fit_out = dir.path().join("fit");
    ok(&["fit", "--dataset", s(&manifest), "--method", "IGPM-poly", "--out", s(&fit_out)]);
    let model = fit_out.join("model.json");
    assert!(model.is_file());

    // only a model and a measurement plan: no dataset at all
    let out = dir.path().join("vf");
    ok(&[
        "variance-forecast",
        "--model",
        s(&model),
        "--schedule",
        "10,13,16,19,22,25,28",
        "--target",
        "40",
        "--out",
        s(&out),
    ]);
    let text = std::fs::read_to_string(out.join("variance.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "step,ci_halfwidth");
    let widths: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(widths.len(), 8);
    assert!(widths.iter().all(|w| w.is_finite() && *w >= 0.0));
    assert!(widths.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert!(out.join("variance.svg").is_file());
}

#[test]
fn failures_emit_error_json() {
    let dir = TempDir::new().unwrap();
    let out = priorgp(&[
        "benchmark",
        "--dataset",
        s(&dir.path().join("missing.json")),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert!(!out.status.success());
    let err = json(&out.stderr);
    assert!(err["error"]["kind"].is_string());
    assert!(err["error"]["message"].as_str().unwrap().contains("missing.json"));
}

#[test]
fn unknown_method_lists_the_labels() {
    let out = priorgp(&["fit", "--method", "GPM-next"]);
    assert_eq!(out.status.code(), Some(2));
    let err = json(&out.stderr);
    assert_eq!(err["error"]["kind"], "usage");
    let msg = err["error"]["message"].as_str().unwrap();
    for label in ["GPM-curr", "GPM-prev-ZM-SE", "GPM-prev-POLY", "IGPM-poly", "IGPM-paris"] {
        assert!(msg.contains(label), "{msg}");
    }
}

#[test]
fn validate_reports_json_pointers() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"method": {"label": "IGPM-paris"}, "q_candidates": []}"#).unwrap();
    let out = priorgp(&["validate", s(&bad)]);
    assert!(!out.status.success());
    let report = json(&out.stdout);
    let pointers: Vec<&str> = report["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["pointer"].as_str().unwrap())
        .collect();
    assert_eq!(pointers, ["/method/basis", "/q_candidates"]);

    let good = dir.path().join("good.json");
    std::fs::write(&good, "{}").unwrap();
    let out = ok(&["validate", s(&good)]);
    let report = json(&out.stdout);
    assert_eq!(report["valid"], true);
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);

    let typo = dir.path().join("typo.json");
    std::fs::write(&typo, r#"{"method": {"label": "IGPM-poly", "ordr": 2}}"#).unwrap();
    let report = json(&priorgp(&["validate", s(&typo)]).stdout);
    assert_eq!(report["violations"][0]["pointer"], "/method/ordr");
}

#[test]
fn outputs_default_to_the_environment_root() {
    let dir = TempDir::new().unwrap();
    let gen = dir.path().join("generator.json");
    std::fs::write(&gen, GENERATOR).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_priorgp"))
        .args(["synthesize", "--generator", s(&gen)])
        .env("PRIORGP_OUT", dir.path().join("root"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("root/synthesize/trajectories.csv").is_file());
    assert!(dir.path().join("root/synthesize/config.json").is_file());
}

#[test]
fn select_order_and_diagnose_write_their_artifacts() {
    let dir = TempDir::new().unwrap();
    let manifest = synthetic(dir.path());
    let sel = dir.path().join("sel");
    ok(&["select-order", "--dataset", s(&manifest), "--candidates", "1,2,3", "--out", s(&sel)]);
    let report = json(&std::fs::read(sel.join("order_selection.json")).unwrap());
    assert!(report["order"].as_u64().is_some());

    let diag = dir.path().join("diag");
    ok(&["diagnose", "--dataset", s(&manifest), "--grid-points", "12", "--out", s(&diag)]);
    let summary = json(&std::fs::read(diag.join("diagnostics.json")).unwrap());
    assert_eq!(summary["grid_points"], 12);
    assert!(diag.join("model_covariance.svg").is_file());
    assert!(diag.join("sample_covariance.csv").is_file());

    let cal = dir.path().join("cal");
    ok(&["calibrate", "--dataset", s(&manifest), "--out", s(&cal)]);
    let text = std::fs::read_to_string(cal.join("calibration.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "level,empirical_frequency");
    assert_eq!(text.lines().count(), 5);

    let pred = dir.path().join("pred");
    ok(&["predict", "--dataset", s(&manifest), "--out", s(&pred)]);
    assert!(pred.join("series.csv").is_file());
    assert!(pred.join("fans").join("1.svg").is_file());
}
