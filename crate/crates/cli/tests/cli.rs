//! End-to-end checks of the binary: determinism of generated artifacts,
//! the dephasing-demo spectrum, closed-form optima, and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lindblad-learn"))
}

fn run(out_dir: &Path, args: &[&str]) -> Output {
    bin()
        .arg("--out")
        .arg(out_dir)
        .args(args)
        .output()
        .expect("binary should launch")
}

#[test]
fn same_seed_gives_byte_identical_dataset_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let res = run(out, &["gen-dataset", "--preset", "spin32-tindep", "--seed", "11"]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let rel = "gen-dataset-spin32-tindep-seed11/dataset.csv";
    let left = std::fs::read(a.join(rel)).unwrap();
    let right = std::fs::read(b.join(rel)).unwrap();
    assert!(!left.is_empty());
    assert_eq!(left, right, "dataset files differ between identical runs");
    let rel_json = "gen-dataset-spin32-tindep-seed11/dataset.json";
    assert_eq!(std::fs::read(a.join(rel_json)).unwrap(), std::fs::read(b.join(rel_json)).unwrap());
}

#[test]
fn dephasing_demo_spectrum_reports_known_gap_and_decoherence_time() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(tmp.path(), &["spectrum", "--gamma", "0.25"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text =
        std::fs::read_to_string(tmp.path().join("spectrum-demo/spectrum.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&text).unwrap();
    let delta_1 = summary["delta_1"].as_f64().unwrap();
    let t_dc = summary["t_dc"].as_f64().unwrap();
    // rate-gamma dephasing damps coherences at 2*gamma
    assert!((delta_1 - 0.5).abs() <= 1e-10, "gap {delta_1}");
    assert!((t_dc - 2.0).abs() <= 1e-9, "t_dc {t_dc}");
}

#[test]
fn closed_form_optima_land_at_the_known_windows() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(tmp.path(), &["efficiency", "closed-form"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text =
        std::fs::read_to_string(tmp.path().join("efficiency-closed-form/optima.json")).unwrap();
    let optima: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mae = optima["argmax_t_over_tdc"]["mae"].as_f64().unwrap();
    let mse = optima["argmax_t_over_tdc"]["mse"].as_f64().unwrap();
    assert!((1.74..=1.84).contains(&mae), "MAE argmax {mae}");
    assert!((1.65..=1.75).contains(&mse), "MSE argmax {mse}");
}

#[test]
fn usage_errors_exit_1_and_runtime_failures_exit_2_with_marker() {
    let tmp = tempfile::tempdir().unwrap();

    let res = run(tmp.path(), &["gen-dataset", "--preset", "not-a-preset", "--seed", "1"]);
    assert_eq!(res.status.code(), Some(1));

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\"no_such_field\": 3}").unwrap();
    let res = run(
        tmp.path(),
        &["gen-dataset", "--preset", "chain", "--seed", "1", "--config", bad.to_str().unwrap()],
    );
    assert_eq!(res.status.code(), Some(1), "unknown override field is a usage error");

    let zero = tmp.path().join("zero.json");
    std::fs::write(&zero, "{\"n_times\": 0}").unwrap();
    let res = run(
        tmp.path(),
        &[
            "gen-dataset",
            "--preset",
            "spin32-tdep",
            "--seed",
            "1",
            "--config",
            zero.to_str().unwrap(),
        ],
    );
    assert_eq!(res.status.code(), Some(2), "runtime failure should exit 2");
    assert!(
        tmp.path().join("gen-dataset-spin32-tdep-seed1/FAILED.txt").exists(),
        "failed run should leave a marker"
    );
}

#[test]
fn config_overrides_apply_field_by_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, "{\"n_batches\": 2, \"n_times\": 5}").unwrap();
    let res = run(
        tmp.path(),
        &[
            "gen-dataset",
            "--preset",
            "spin32-tdep",
            "--seed",
            "3",
            "--config",
            cfg.to_str().unwrap(),
        ],
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(
            tmp.path().join("gen-dataset-spin32-tdep-seed3/manifest.json"),
        )
        .unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["n_batches"], 2);
    assert_eq!(manifest["config"]["n_times"], 5);
    // untouched fields keep the preset value
    assert_eq!(manifest["config"]["t_end"], 20.0);
    assert_eq!(manifest["seeds"]["dataset_seed"], 3);
    assert!(manifest["version"].as_str().is_some());
}

#[test]
fn train_writes_log_report_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, "{\"n_batches\": 1, \"n_times\": 6, \"t_end\": 3.0}").unwrap();
    let res = run(
        tmp.path(),
        &[
            "train",
            "--preset",
            "spin32-tdep",
            "--seed",
            "3",
            "--config",
            cfg.to_str().unwrap(),
            "--epochs",
            "5",
            "--n-init",
            "1",
        ],
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let dir = tmp.path().join("train-spin32-tdep-seed3");
    for name in ["training_log.csv", "report.json", "loss.svg", "errors.svg", "manifest.json"] {
        assert!(dir.join(name).exists(), "missing {name}");
    }
    let log = std::fs::read_to_string(dir.join("training_log.csv")).unwrap();
    assert!(log.lines().count() >= 6, "expected one row per epoch");
    let svg = std::fs::read_to_string(dir.join("loss.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}
