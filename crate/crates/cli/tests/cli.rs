use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_diffest"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn config(m: usize) -> Value {
    let locations: Vec<f64> = (1..=m)
        .map(|l| std::f64::consts::PI * (2.0 * l as f64 - m as f64 - 1.0) / m as f64)
        .collect();
    json!({
        "model": {
            "n_modes": 4,
            "kappa0": 1.0,
            "mu1": 0.02,
            "mu2": 0.5,
            "alpha1": 1e-6,
            "beta1": 2.0,
            "alpha2": 1e-3,
            "beta2": 2.0,
            "dt": 0.01,
            "n_steps": 40,
            "sensor_locations": locations,
            "sensor_sigmas": vec![1e-3; m]
        },
        "source": { "modes": [ { "k": 1, "cos": 1.0 }, { "k": 2, "sin": 2.0 } ] },
        "seed": 11,
        "truth": {
            "kappa": { "constant": 1.0, "modes": [ { "k": 1, "sin": 0.3 } ] },
            "alpha2": 0.0,
            "spinup_steps": 200
        },
        "estimate": { "max_iters": 2, "tol": 1e-4 }
    })
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn simulate(dir: &Path, cfg: &Value, out: &str) -> PathBuf {
    let c = write_json(dir, &format!("{out}.json"), cfg);
    let out = dir.join(out);
    let o = run(bin().args(["simulate", "--config"]).arg(&c).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn checksums(dir: &Path) -> Vec<(String, String)> {
    manifest(dir)["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["path"].as_str().unwrap().to_owned(), f["sha256"].as_str().unwrap().to_owned()))
        .collect()
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# diffest-"), "missing format header in {}", path.display());
    text.lines().skip(2).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn simulate_writes_versioned_files_with_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let out = simulate(tmp.path(), &config(8), "sim");
    for f in ["truth_modes.csv", "truth_grid.csv", "measurements.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let files = checksums(&out);
    assert_eq!(files.len(), 3);
    for (path, sum) in files {
        let bytes = fs::read(out.join(&path)).unwrap();
        use sha2::Digest;
        assert_eq!(hex::encode(sha2::Sha256::digest(&bytes)), sum, "{path}");
    }
    let m = manifest(&out);
    assert_eq!(m["seeds"]["truth"], 11);
    assert_eq!(m["config"]["model"]["n_modes"], 4);
    assert_eq!(data_rows(&out.join("measurements.csv")).len(), 40);
}

#[test]
fn same_config_and_seed_reproduce_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let a = simulate(tmp.path(), &config(8), "a");
    let b = simulate(tmp.path(), &config(8), "b");
    assert_eq!(checksums(&a), checksums(&b));
    let mut other = config(8);
    other["seed"] = json!(12);
    let c = simulate(tmp.path(), &other, "c");
    assert_ne!(checksums(&a), checksums(&c));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let c = write_json(tmp.path(), "c.json", &config(8));
    let out = tmp.path().join("o");
    let o = run(bin().args(["simulate", "--seed", "99", "--config"]).arg(&c).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(&out)["seeds"]["truth"], 99);
}

#[test]
fn missing_field_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(8);
    cfg["model"].as_object_mut().unwrap().remove("sensor_locations");
    let c = write_json(tmp.path(), "c.json", &cfg);
    let o = run(bin().args(["simulate", "--config"]).arg(&c).arg("--out").arg(tmp.path().join("o")));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sensor_locations"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(8);
    cfg["model"]["kapa0"] = json!(1.0);
    let c = write_json(tmp.path(), "c.json", &cfg);
    let o = run(bin().args(["simulate", "--config"]).arg(&c).arg("--out").arg(tmp.path().join("o")));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kapa0"));
}

fn estimate(dir: &Path, cfg: &Value, measurements: &Path, out: &str, extra: &[&str]) -> (Output, PathBuf) {
    let c = write_json(dir, &format!("{out}.json"), cfg);
    let out = dir.join(out);
    let o = run(bin()
        .args(["estimate", "--config"])
        .arg(&c)
        .arg("--measurements")
        .arg(measurements)
        .arg("--out")
        .arg(&out)
        .args(extra));
    (o, out)
}

#[test]
fn estimate_twin_reports_per_iteration_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulate(tmp.path(), &config(8), "sim");
    let (o, out) = estimate(tmp.path(), &config(8), &sim.join("measurements.csv"), "est", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["smoothed_states.csv", "mean_fields.csv", "convergence.json", "error_metrics.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let errors = data_rows(&out.join("error_metrics.csv"));
    assert_eq!(errors.len(), 3);
    for (i, row) in errors.iter().enumerate() {
        assert_eq!(row[0], i.to_string());
        let e: f64 = row[1].parse().unwrap();
        assert!(e.is_finite() && e >= 0.0);
    }
    let smoothed = data_rows(&out.join("smoothed_states.csv"));
    assert_eq!(smoothed.len(), 41 * 2 * 5);
    assert!(smoothed.iter().all(|r| r[6].parse::<f64>().unwrap() >= 0.0));
    let means = data_rows(&out.join("mean_fields.csv"));
    assert_eq!(means.len(), 41 * 9);
    assert!(means.iter().all(|r| r[4].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn estimate_with_zero_iterations_returns_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulate(tmp.path(), &config(8), "sim");
    let (o, out) = estimate(tmp.path(), &config(8), &sim.join("measurements.csv"), "est", &["--max-iters", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&out.join("error_metrics.csv")).len(), 1);
    let conv: Value = serde_json::from_str(&fs::read_to_string(out.join("convergence.json")).unwrap()).unwrap();
    assert_eq!(conv["report"]["records"].as_array().unwrap().len(), 1);
    let kappa: Vec<f64> = data_rows(&out.join("mean_fields.csv"))
        .iter()
        .map(|r| r[4].parse().unwrap())
        .collect();
    assert!(kappa.iter().all(|k| (k - 1.0).abs() < 1e-12));
}

#[test]
fn nan_measurement_names_the_row() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulate(tmp.path(), &config(8), "sim");
    let path = sim.join("measurements.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut cells: Vec<&str> = lines[2 + 5].split(',').collect();
    cells[3] = "NaN";
    lines[2 + 5] = cells.join(",");
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let (o, _) = estimate(tmp.path(), &config(8), &bad, "est", &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 5"));
}

#[test]
fn sensor_count_mismatch_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = simulate(tmp.path(), &config(8), "sim");
    let (o, _) = estimate(tmp.path(), &config(6), &sim.join("measurements.csv"), "est", &[]);
    assert_eq!(o.status.code(), Some(3));
}

fn calibrate(dir: &Path, targets: &Value) -> (Output, PathBuf) {
    let c = write_json(dir, "c.json", &config(8));
    let t = write_json(dir, "targets.json", targets);
    let out = dir.join("cal");
    let o = run(bin().args(["calibrate", "--config"]).arg(&c).arg("--targets").arg(&t).arg("--out").arg(&out));
    (o, out)
}

#[test]
fn calibrate_recovers_power_law() {
    let tmp = tempfile::tempdir().unwrap();
    // κ₀ = 1, μ₁ = 0.02: C_T,k = α₁ k^{-β₁} / (2(k² + 0.02 k⁴)); C_θ,k = α₂ k^{-β₂} / (2·0.5 k²).
    let (a1, b1, a2, b2) = (0.3, 1.7, 0.05, 2.4);
    let temperature: Vec<(u32, f64)> = (1..=4)
        .map(|k| {
            let kf = k as f64;
            (k, a1 * kf.powf(-b1) / (2.0 * (kf * kf + 0.02 * kf.powi(4))))
        })
        .collect();
    let theta: Vec<(u32, f64)> = (1..=4)
        .map(|k| {
            let kf = k as f64;
            (k, a2 * kf.powf(-b2) / (2.0 * 0.5 * kf * kf))
        })
        .collect();
    let (o, out) = calibrate(tmp.path(), &json!({ "temperature": temperature, "theta": theta, "mu1_candidates": [0.02] }));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cal: Value = serde_json::from_str(&fs::read_to_string(out.join("calibration.json")).unwrap()).unwrap();
    assert!((cal["noise"]["beta1"].as_f64().unwrap() - b1).abs() < 1e-8);
    assert!((cal["noise"]["beta2"].as_f64().unwrap() - b2).abs() < 1e-8);
    assert!((cal["noise"]["alpha1"].as_f64().unwrap() - a1).abs() < 1e-8);
    assert_eq!(cal["mu1_star"].as_f64().unwrap(), 0.02);
    assert_eq!(data_rows(&out.join("hyperdiffusion_curve.csv")).len(), 1);
    let table = data_rows(&out.join("covariance_comparison.csv"));
    assert_eq!(table.len(), 8);
    assert!(table.iter().filter(|r| r[0] == "theta").all(|r| r[4].parse::<f64>().unwrap() < 1e-8));
}

#[test]
fn empty_targets_are_a_calibration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, _) = calibrate(tmp.path(), &json!({ "temperature": [], "theta": [] }));
    assert_eq!(o.status.code(), Some(4));
}

fn sweep(dir: &Path, spec: &Value) -> (Output, PathBuf) {
    let c = write_json(dir, "c.json", &config(8));
    let s = write_json(dir, "sweep.json", spec);
    let out = dir.join("sweep");
    let o = run(bin().args(["sweep", "--config"]).arg(&c).arg("--sweep").arg(&s).arg("--out").arg(&out));
    (o, out)
}

#[test]
fn sweep_over_sigma_aggregates_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = sweep(tmp.path(), &json!({ "parameter": "sigma", "values": [1e-3, 1e-2, 1e-1] }));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 3);
    for (row, v) in rows.iter().zip(["0.001", "0.01", "0.1"]) {
        assert_eq!(row[0], v);
        assert!(row[1].parse::<f64>().unwrap().is_finite());
        assert!(out.join(format!("sigma={v}")).join("error_metrics.csv").exists());
    }
}

#[test]
fn sweep_with_no_values_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, _) = sweep(tmp.path(), &json!({ "parameter": "m", "values": [] }));
    assert_eq!(o.status.code(), Some(2));
}
