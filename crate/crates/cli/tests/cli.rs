use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use u2flow_cli::manifest::RunManifest;

const CYLINDER: &str = "k = 1\ninitial = cylinder_segment\ninitial.b0 = 1\nxi_max = 4\nn = 40\nb_tip_min = 0.05\nremap = off\n";
const TANH_SHORT: &str = "k = 2\nn = 200\nt_max = 0.02\n";

fn u2flow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_u2flow")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_config(dir: &Path, text: &str, out: &str) -> Output {
    let cfg = dir.join(format!("{}.cfg", out.replace('/', "_")));
    fs::write(&cfg, text).unwrap();
    u2flow(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.join(out).to_str().unwrap()])
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn tanh_run_writes_monitors_and_a_valid_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_config(tmp.path(), TANH_SHORT, "tanh");
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("tanh");
    let monitors = fs::read_to_string(out.join("monitors.csv")).unwrap();
    let mut lines = monitors.lines();
    assert!(lines.next().unwrap().starts_with("t,dt,steps,b_tip"));
    assert!(lines.count() >= 2);
    let m = RunManifest::read(&out).unwrap();
    m.validate(&out).unwrap();
    assert_eq!(m.config, TANH_SHORT);
    for f in ["config.txt", "monitors.csv", "trajectory.json", "snapshots/00000.csv", "snapshots/00000.csv.meta"] {
        assert!(m.files.iter().any(|e| e.path == f), "{f} not in manifest");
    }
}

#[test]
fn missing_k_exits_2_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_config(tmp.path(), "n = 100\n", "nok");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`k`"), "{}", stderr(&o));
}

#[test]
fn bad_value_is_reported_with_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_config(tmp.path(), "k = 2\ngauge = sideways\n", "bad");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("blocker"), "").unwrap();
    let o = run_config(tmp.path(), CYLINDER, "blocker/sub");
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["one", "two"] {
        assert!(run_config(tmp.path(), CYLINDER, out).status.success());
    }
    let m = RunManifest::read(&tmp.path().join("one")).unwrap();
    let n = RunManifest::read(&tmp.path().join("two")).unwrap();
    assert_eq!(m.files, n.files);
}

#[test]
fn cylinder_analysis_reports_type_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_config(tmp.path(), CYLINDER, "cyl").status.success());
    let dir = tmp.path().join("cyl");
    let o = u2flow(&["analyze", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = read_json(&dir.join("analysis/analysis.json"));
    assert_eq!(a["singularity"]["ok"]["verdict"], "type_i");
    assert_eq!(a["margins"]["all_satisfied"], true);
    // A segment has no tip to blow up at.
    assert!(a["blowup"]["unavailable"].is_string());
}

#[test]
fn tanh_analysis_finds_the_eh_regime_with_falling_distance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "k = 2\nn = 200\ngrading = geometric\ngrading.ratio = 1.02\nb_tip_min = 0.05\n";
    assert!(run_config(tmp.path(), cfg, "tanh").status.success());
    let dir = tmp.path().join("tanh");
    let o = u2flow(&["analyze", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = read_json(&dir.join("analysis/analysis.json"));
    let b = &a["blowup"]["ok"];
    assert_eq!(b["classification"]["ok"]["regime"], "eguchi_hanson");
    let (start, end) = (b["eh_distance_final_decade"][0].as_f64().unwrap(), b["eh_distance_final_decade"][1].as_f64().unwrap());
    assert!(end < start, "{start} -> {end}");
}

#[test]
fn empty_directory_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = u2flow(&["analyze", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no trajectory"), "{}", stderr(&o));
}

#[test]
fn certify_bundle_verifies_with_nine_quadratic_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let o = u2flow(&["certify", "--out", tmp.path().to_str().unwrap(), "--seed", "11"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b = read_json(&tmp.path().join("certificates.json"));
    assert_eq!(b["exact_verified"], true);
    assert_eq!(b["seed"], 11);
    assert_eq!(b["quadratic"].as_array().unwrap().len(), 9);
}

#[test]
fn injected_fault_exits_1_with_witness() {
    let o = u2flow(&["certify", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("quartic_positive") && err.contains("witness"), "{err}");
}

#[test]
fn eh_profile_is_asymptotically_conical_with_unit_slopes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = u2flow(&["eh", "--out", tmp.path().to_str().unwrap(), "--s-max", "50"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&tmp.path().join("eh_report.json"));
    for key in ["a_s_end", "b_s_end", "a_secant", "b_secant"] {
        assert!((r[key].as_f64().unwrap() - 1.0).abs() < 1e-3, "{key} = {}", r[key]);
    }
}

#[test]
fn soliton_sweep_reports_every_radius() {
    let tmp = tempfile::tempdir().unwrap();
    let o = u2flow(&["soliton", "--out", tmp.path().to_str().unwrap(), "--rho", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&tmp.path().join("soliton_report.json"));
    let reports = r.as_array().unwrap();
    assert_eq!(reports.len(), 8);
    for rep in reports {
        assert!(rep["tip_y_s"].as_f64().unwrap() < 0.0);
        assert_eq!(rep["obstructed"], true);
    }
}

#[test]
fn negative_rho_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = u2flow(&["soliton", "--out", tmp.path().to_str().unwrap(), "--rho", "-0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("soliton_report.json").exists());
}
