//! End-to-end tests of the `phaseturb` binary: exit codes, output layout and
//! reproducibility from a manifest.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = "\
# small desk run
[physics]
alpha = 0.1
eps_hat = 0.1
L = 40
[grid]
N = 64
[time]
dt = 0.01
t_end_hat = 1
diagnostic_interval = 0.1
snapshot_interval = 0.5
";

fn phaseturb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phaseturb")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let o = phaseturb(&[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(code(&phaseturb(&["frobnicate"])), 2);
}

#[test]
fn verify_symbols_reports_every_bound() {
    let o = phaseturb(&["verify-symbols", "--eps", "0.5", "--alpha", "0.3", "--N", "128"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    let map = v.as_object().unwrap();
    assert_eq!(map.len(), 4);
    for entry in map.values() {
        assert!(entry["max_ratio"].as_f64().unwrap() <= 1.0);
        assert!(entry["argmax_k"].is_number());
        assert_eq!(entry["pass"], Value::Bool(true));
    }
}

#[test]
fn verify_symbols_rejects_large_alpha() {
    let o = phaseturb(&["verify-symbols", "--eps", "0.5", "--alpha", "0.8"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("alpha^2 < 1/2"));
}

#[test]
fn config_errors_name_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "alpha = 0.1\neps_hat = 0.05\nL = 40\nL0 = 800\n");
    let o = phaseturb(&["simulate-ks", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("L, L0"), "{err}");

    let cfg = write_config(dir.path(), "typo.cfg", "alpha = 0.1\neps_hat = 0.05\nL = 40\nNN = 64\n");
    let o = phaseturb(&["simulate-ks", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 4: key `NN`"), "{}", stderr(&o));
}

#[test]
fn large_alpha_config_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.cfg", &SMALL.replace("alpha = 0.1", "alpha = 0.8"));
    let o = phaseturb(&["check-class-c", "--config", &cfg]);
    assert!(stderr(&o).contains("outside theorem validity"), "{}", stderr(&o));
}

#[test]
fn simulate_coupled_layout_and_manifest_rerun_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let first = dir.path().join("first");
    let o = phaseturb(&["simulate-coupled", "--config", &cfg, "--out", first.to_str().unwrap(), "--gnuplot"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["manifest.json", "diagnostics.csv", "diagnostics.dat", "report.json", "snapshots/index.json"] {
        assert!(first.join(f).exists(), "missing {f}");
    }
    let csv = fs::read_to_string(first.join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with('#'));
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("t,norm_mu_L2,norm_s_L2,"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 12);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["tool"], "phaseturb");
    assert_eq!(manifest["seed"], 1);
    assert!(manifest["version"].is_string());
    assert!(manifest["config"]["derived"]["chi"].is_number());

    let index: Value = serde_json::from_str(&fs::read_to_string(first.join("snapshots/index.json")).unwrap()).unwrap();
    assert_eq!(index["entries"].as_array().unwrap().len(), 3);

    let second = dir.path().join("second");
    let m = first.join("manifest.json");
    let o = phaseturb(&["simulate-coupled", "--config", m.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["diagnostics.csv", "report.json", "snapshots/t_00002_mu.txt"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn norms_of_a_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let out = dir.path().join("ks");
    let o = phaseturb(&["simulate-ks", "--config", &cfg, "--out", out.to_str().unwrap(), "--snapshot-every", "0.25"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("snapshots/t_00004_mu.txt").exists());
    let field = out.join("snapshots/t_00004_mu.txt");
    let o = phaseturb(&["norms", "--field", field.to_str().unwrap(), "--sigma", "4", "--delta", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["sigma"], 4.0);
    assert_eq!(v["delta"], 3.0);
    for key in ["l2", "linf", "w_sigma", "n_sigma", "norm_sigma", "top_mode_weighted"] {
        assert!(v[key].as_f64().unwrap() >= 0.0, "{key}");
    }
}

#[test]
fn norms_of_a_missing_file_exits_2() {
    assert_eq!(code(&phaseturb(&["norms", "--field", "/nonexistent/field.txt"])), 2);
}

#[test]
fn simulate_cgl_tracks_the_coupled_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let out = dir.path().join("cgl");
    let o = phaseturb(&["simulate-cgl", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let last: Vec<f64> =
        csv.lines().last().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    // Scaled ‖μ̂‖ stays close to its initial size over one scaled time unit.
    assert!((last[2] - 7.08).abs() < 0.05, "{}", last[2]);
}

#[test]
fn compare_names_failed_residual_gate() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}[sweep]\neps_hat_list = 0.1, 0.09\n");
    let cfg = write_config(dir.path(), "sweep.cfg", &text);
    let out = dir.path().join("cmp");
    let o = phaseturb(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("slaving_ratio_0.1_0.09"), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], Value::Bool(false));
    assert!(report["fitted"]["eps_hat0"].is_number());
    assert!(out.join("diagnostics_eps_0.09.csv").exists());
}

#[test]
fn verify_coercive_emits_documented_keys() {
    let o = phaseturb(&["verify-coercive", "--L", "10", "--trials", "12"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    for key in ["phi_norm_sq", "phi_phi_phi", "hs_norm_sq", "hs_tail_bound", "coercivity_min_slack", "K_empirical"] {
        assert!(v[key].is_number(), "{key}");
    }
    assert!(v["phi_norm_sq"].as_f64().unwrap() <= 4.0 / 3.0 * 1000.0);
}

#[test]
fn verify_coercive_rejects_eps_above_limit() {
    assert_eq!(code(&phaseturb(&["verify-coercive", "--L", "10", "--eps", "0.9", "--trials", "2"])), 2);
}

#[test]
fn check_class_c_accepts_default_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let o = phaseturb(&["check-class-c", "--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["member"], Value::Bool(true));
    assert_eq!(v["conditions"].as_array().unwrap().len(), 4);
}
