use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn nehari(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nehari")).args(args).output().expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

/// The only run directory under `root`.
fn run_dir(root: &Path) -> PathBuf {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_result_manifest_and_field() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let (code, text) = nehari(&["solve", "--c", "1", "--grid-n", "64", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let dir = run_dir(&out);
    let result = read_json(&dir.join("result.json"));
    for key in ["lambda", "energy_gap", "residual", "iterations", "converged"] {
        assert!(result.get(key).is_some(), "missing {key}");
    }
    assert_eq!(result["converged"], Value::Bool(true));
    assert!(result["residual"].as_f64().unwrap() <= 1e-6);
    let manifest = read_json(&dir.join("manifest.json"));
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["config"]["grid"]["n"], 64);
    assert_eq!(manifest["config"]["solver"]["residual_tol"], 1e-6);
    assert!(manifest["wall_time_seconds"].is_number());
    assert!(manifest["versions"]["nehari-core"].is_string());
    let field = std::fs::read_to_string(dir.join("solution.csv")).unwrap();
    assert_eq!(field.lines().next(), Some("# dim=1 n=64"));
    assert_eq!(field.lines().count(), 1 + 64);
}

#[test]
fn identical_runs_give_identical_results() {
    let tmp = tempfile::tempdir().unwrap();
    let mut results = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("runs{k}"));
        let (code, text) = nehari(&["solve", "--c", "0.5", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{text}");
        results.push(std::fs::read(run_dir(&out).join("result.json")).unwrap());
    }
    assert_eq!(results[0], results[1]);
}

#[test]
fn sweep_csv_keeps_input_order() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let (code, text) = nehari(&["sweep", "--c", "0.25,0.5,1,2,4", "--grid-n", "32", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let csv = std::fs::read_to_string(run_dir(&out).join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("c,lambda_1c,residual,converged"));
    let cs: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(cs, vec![0.25, 0.5, 1.0, 2.0, 4.0]);
}

#[test]
fn fibering_profiles_a_stored_field() {
    let tmp = tempfile::tempdir().unwrap();
    let solved = tmp.path().join("solved");
    let (code, text) = nehari(&["solve", "--c", "1", "--grid-n", "32", "--out", solved.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let field = run_dir(&solved).join("solution.csv");
    let cfg = write_config(
        tmp.path(),
        &format!("c = 1.0\n[grid]\nn = 32\n[fibering]\nfield = {:?}\npoints = 50\n", field.to_str().unwrap()),
    );
    let out = tmp.path().join("fib");
    let (code, text) = nehari(&["fibering", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let dir = run_dir(&out);
    let csv = std::fs::read_to_string(dir.join("profile.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,value,derivative"));
    assert_eq!(csv.lines().count(), 51);
    // the stored field is already projected, so its root is t = 1
    let t = read_json(&dir.join("result.json"))["root"]["t"].as_f64().unwrap();
    assert!((t - 1.0).abs() <= 1e-9, "{t}");
}

#[test]
fn field_of_wrong_shape_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let field = tmp.path().join("f.csv");
    std::fs::write(&field, "# dim=2 n=4\n0\n0\n0\n0\n0\n0\n0\n0\n0\n0\n0\n0\n0\n0\n0\n0\n").unwrap();
    let cfg = write_config(tmp.path(), &format!("[grid]\nn = 4\n[fibering]\nfield = {:?}\n", field.to_str().unwrap()));
    let out = tmp.path().join("runs");
    let (code, text) = nehari(&["fibering", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 4, "{text}");
    assert!(text.contains("does not match"));
}

#[test]
fn validator_failure_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let (code, text) = nehari(&["validate", "--c=-1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{text}");
    let result = read_json(&run_dir(&out).join("result.json"));
    let reports = result["reports"].as_array().unwrap();
    let f2 = reports.iter().find(|r| r["hypothesis"] == "f2").unwrap();
    assert_eq!(f2["verdict"], "fail");
    assert!(f2["counterexample"].is_object());

    let out = tmp.path().join("ok");
    let (code, text) = nehari(&["validate", "--c", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
}

#[test]
fn bad_configurations_exit_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let cfg = write_config(tmp.path(), "[grid]\nsize = 3\n");
    assert_eq!(nehari(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]).0, 4);
    let cfg = write_config(
        tmp.path(),
        "[problem]\nmodel = \"kirchhoff\"\np = 2.0\ntheta = -1.0\nnonlinearity = { kind = \"pure_power\", r = 4.0 }\n",
    );
    assert_eq!(nehari(&["solve", "--config", &cfg, "--c", "1", "--out", out.to_str().unwrap()]).0, 4);
    assert_eq!(nehari(&["solve", "--grid-n", "0", "--out", out.to_str().unwrap()]).0, 4);
}

#[test]
fn kirchhoff_direct_solve_and_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[problem]\nmodel = \"kirchhoff\"\np = 2.0\ntheta = -1.0\nnonlinearity = { kind = \"pure_power\", r = 4.0 }\n[grid]\nn = 32\n",
    );
    let out = tmp.path().join("k");
    let (code, text) = nehari(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let result = read_json(&run_dir(&out).join("result.json"));
    assert!(result["lambda"].is_null());
    assert!(result["level"].as_f64().unwrap() < 0.0);

    let out = tmp.path().join("o");
    let (code, text) = nehari(&["oracle", "--grid-n", "64", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let dir = run_dir(&out);
    let branches = read_json(&dir.join("result.json"))["branches"].as_array().unwrap().len();
    assert!(branches >= 1);
    assert!(dir.join("branch_0.csv").exists());
}
