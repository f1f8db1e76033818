//! End-to-end runs of the `fwpath` binary: outputs, exit codes and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fwpath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fwpath")).args(args).output().expect("binary runs")
}

/// Writes `config` to a fresh directory, runs `command` on it and returns the directory.
fn run(command: &str, config: &str) -> (TempDir, Output) {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, config).unwrap();
    let out = out_dir(&dir);
    let o = fwpath(&[command, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    (dir, o)
}

fn out_dir(dir: &TempDir) -> PathBuf {
    dir.path().join("out")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn summary(dir: &TempDir, o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    json(&out_dir(dir).join("summary.json"))
}

fn config(body: &str) -> String {
    format!("format_version = \"1.0\"\n{body}")
}

const MS3: &str = "[model]\nmodel = \"maier_stein\"\nalpha = 3.0\n";

#[test]
fn maier_stein_instanton_stays_on_axis() {
    let (dir, o) = run("instanton", &config(&format!("{MS3}[solver]\nfan_size = 16\n")));
    let s = summary(&dir, &o);
    assert_eq!(s["optimal"]["on_axis"], true);
    assert_eq!(s["crossings"], 0);
    assert!((s["optimal"]["action"].as_f64().unwrap() - 0.5).abs() < 1e-4);
    for f in ["trajectories.csv", "candidates.csv", "crossings.csv", "fan.csv", "config.toml"] {
        assert!(out_dir(&dir).join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out_dir(&dir).join("fan.csv")).unwrap();
    assert!(csv.starts_with("# format_version: 1.0\n"));
}

#[test]
fn biaxial_fan_has_no_crossings() {
    let body = "[model]\nmodel = \"macrospin\"\nD = 20.0\ncurrent_ratio = 0.8\nomega_ratio = 0.25\n[solver]\nfan_size = 8\n";
    let (dir, o) = run("instanton", &config(body));
    let s = summary(&dir, &o);
    assert_eq!(s["crossings"], 0);
    assert_eq!(s["all_reach_separatrix"], true);
}

#[test]
fn oracle_check_matches_closed_form() {
    let body = "[model]\nmodel = \"macrospin\"\nD = 0.0\ncurrent_ratio = 0.3\n[solver]\nfan_size = 8\n";
    let (dir, o) = run("oracle-check", &config(body));
    let s = summary(&dir, &o);
    assert!(s["max_rms"].as_f64().unwrap() <= 1e-2);
    assert!(s["max_action_rel_err"].as_f64().unwrap() <= 1e-4);
    assert_eq!(s["failed"].as_array().unwrap().len(), 0);
}

#[test]
fn oracle_check_rejects_anisotropy() {
    let body = "[model]\nmodel = \"macrospin\"\nD = 2.0\ncurrent_ratio = 0.3\n";
    let (dir, o) = run("oracle-check", &config(body));
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&out_dir(&dir).join("error.json"))["error"]["kind"], "validation");
}

fn counts(s: &Value) -> (u64, u64, u64) {
    let c = &s["counts"];
    (c["min"].as_u64().unwrap(), c["max"].as_u64().unwrap(), c["saddle"].as_u64().unwrap())
}

#[test]
fn norm_map_below_threshold() {
    let (dir, o) = run("norm-map", &config(MS3));
    let s = summary(&dir, &o);
    assert_eq!(counts(&s), (2, 0, 1));
    let saddle = s["extrema"].as_array().unwrap().iter().find(|e| e["kind"] == "saddle").unwrap();
    assert!((saddle["x"].as_f64().unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-6);
    assert!(saddle["y"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn norm_map_above_threshold() {
    let (dir, o) = run("norm-map", &config("[model]\nmodel = \"maier_stein\"\nalpha = 5.0\n"));
    let s = summary(&dir, &o);
    assert_eq!(counts(&s), (2, 1, 2));
    let extrema = s["extrema"].as_array().unwrap();
    for e in extrema {
        let off_axis = e["y"].as_f64().unwrap().abs() > 1e-6;
        assert_eq!(off_axis, e["kind"] == "saddle", "{e}");
    }
}

#[test]
fn norm_map_double_well_has_zero_minima() {
    let (dir, o) = run("norm-map", &config("[model]\nmodel = \"double_well\"\n"));
    let s = summary(&dir, &o);
    let minima: Vec<_> = s["extrema"].as_array().unwrap().iter().filter(|e| e["kind"] == "min").collect();
    assert_eq!(minima.len(), 3);
    assert!(minima.iter().all(|e| e["value"].as_f64().unwrap().abs() < 1e-12));
}

#[test]
fn bifurcation_finds_alpha_four() {
    let (dir, o) = run("bifurcation", &config("[bifurcation]\nrange = [3.0, 5.0]\nsteps = 41\n"));
    let s = summary(&dir, &o);
    assert_eq!(s["found"], true);
    assert!((s["threshold"].as_f64().unwrap() - 4.0).abs() <= 0.05);
    assert_eq!(s["steps"].as_array().unwrap().len(), 41);
    assert!(s["steps"].as_array().unwrap().iter().all(|st| st["counts"]["min"].as_u64().unwrap() >= 1));
    let extrema = std::fs::read_to_string(out_dir(&dir).join("extrema.csv")).unwrap();
    assert!(extrema.lines().count() > 41);
}

#[test]
fn bifurcation_outside_range_is_not_found() {
    let (dir, o) = run("bifurcation", &config("[bifurcation]\nrange = [1.0, 2.0]\nsteps = 11\n"));
    let s = summary(&dir, &o);
    assert_eq!(s["found"], false);
    assert!(s["threshold"].is_null());
}

const LANGEVIN: &str = "[model]\nmodel = \"maier_stein\"\nalpha = 3.0\n[langevin]\nnoise = 0.1\nstep = 0.01\n\
max_time = 500.0\nrealizations = 20\ninitial = [1.0, 0.0, 0.0]\nseed = 11\npath_stride = 50\n\
probe = { axis = 0, level = 0.5 }\n";

#[test]
fn langevin_is_deterministic_under_a_seed() {
    let (a, oa) = run("langevin", &config(LANGEVIN));
    let (b, ob) = run("langevin", &config(LANGEVIN));
    let s = summary(&a, &oa);
    summary(&b, &ob);
    assert_eq!(s["escaped"].as_u64().unwrap() + s["censored"]["count"].as_u64().unwrap(), 20);
    for f in ["events.csv", "paths.csv", "summary.json"] {
        let x = std::fs::read(out_dir(&a).join(f)).unwrap();
        let y = std::fs::read(out_dir(&b).join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn seed_flag_changes_the_sample() {
    let (a, oa) = run("langevin", &config(LANGEVIN));
    summary(&a, &oa);
    let cfg = a.path().join("run.toml");
    let other = a.path().join("other");
    let o = fwpath(&["langevin", "--config", cfg.to_str().unwrap(), "--out", other.to_str().unwrap(), "--seed", "12"]);
    assert!(o.status.success());
    let x = std::fs::read(out_dir(&a).join("events.csv")).unwrap();
    let y = std::fs::read(other.join("events.csv")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let (a, oa) = run("langevin", &config(LANGEVIN));
    let s = summary(&a, &oa);
    let embedded = s["resolved_config"].as_str().unwrap();
    let (b, ob) = run("langevin", embedded);
    summary(&b, &ob);
    for f in ["events.csv", "paths.csv", "config.toml"] {
        assert_eq!(std::fs::read(out_dir(&a).join(f)).unwrap(), std::fs::read(out_dir(&b).join(f)).unwrap(), "{f}");
    }
}

#[test]
fn stationary_energies_follow_the_damped_law() {
    let body = "[model]\nmodel = \"macrospin\"\nalpha = 0.1\nD = 0.0\ncurrent_ratio = 0.0\n[langevin]\nnoise = 0.5\n\
step = 0.01\nmax_time = 50.0\nrealizations = 40\ninitial = [0.0, 0.0, 1.0]\nseed = 7\n\
[stationary]\nburn_in = 10.0\nevery = 1.0\nper_realization = 40\n";
    let (dir, o) = run("langevin", &config(body));
    let s = summary(&dir, &o);
    let st = &s["stationary"];
    assert_eq!(st["samples"], 1600);
    assert!(st["p_value"].as_f64().unwrap() > 0.01, "{st}");
    assert!(st["naive_p_value"].as_f64().unwrap() < 1e-6);
}

#[test]
fn stationary_needs_zero_current() {
    let body = "[model]\nmodel = \"macrospin\"\nD = 0.0\ncurrent_ratio = 0.5\n[langevin]\nnoise = 0.5\nstep = 0.01\n\
max_time = 5.0\nrealizations = 2\ninitial = [0.0, 0.0, 1.0]\nseed = 7\n\
[stationary]\nburn_in = 1.0\nevery = 1.0\nper_realization = 2\n";
    let (_, o) = run("langevin", &config(body));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zero_realizations_is_a_validation_error() {
    let (dir, o) = run("langevin", &config(&LANGEVIN.replace("realizations = 20", "realizations = 0")));
    assert_eq!(o.status.code(), Some(1));
    let e = json(&out_dir(&dir).join("error.json"));
    assert_eq!(e["format_version"], "1.0");
    assert_eq!(e["error"]["exit_code"], 1);
    let stderr: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(stderr, e);
}

#[test]
fn unknown_keys_are_rejected() {
    let (_, o) = run("norm-map", &config(&format!("{MS3}[solver]\nfan_sise = 16\n")));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fan_sise"));
    let (_, o) = run("norm-map", &config("[model]\nmodel = \"maier_stein\"\nalpha = 3.0\nbeta = 1.0\n"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn command_mismatch_and_bad_version_are_rejected() {
    let (_, o) = run("norm-map", &format!("format_version = \"1.0\"\ncommand = \"instanton\"\n{MS3}"));
    assert_eq!(o.status.code(), Some(1));
    let (_, o) = run("norm-map", &format!("format_version = \"2.0\"\n{MS3}"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn non_finite_parameter_is_rejected() {
    let (_, o) = run("norm-map", &config("[model]\nmodel = \"maier_stein\"\nalpha = nan\n"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_fails_under_an_injected_tolerance() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fwpath(&["report", "--out", out, "--only", "8", "--inject-tolerance", "c8.action_rel=1e-30"]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL 8")), "{stdout}");
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["passed"], false);
    assert!((report["overrides"]["c8.action_rel"].as_f64().unwrap() / 1e-30 - 1.0).abs() < 1e-12);
    assert_eq!(json(&dir.path().join("error.json"))["error"]["failed"][0], "8");
}

#[test]
fn report_passes_selected_criteria() {
    let dir = TempDir::new().unwrap();
    let o = fwpath(&["report", "--out", dir.path().to_str().unwrap(), "--only", "8", "--only", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let report = json(&dir.path().join("report.json"));
    let ids: Vec<_> = report["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["8", "9"]);
}

#[test]
fn report_rejects_unknown_tolerance() {
    let dir = TempDir::new().unwrap();
    let o = fwpath(&["report", "--out", dir.path().to_str().unwrap(), "--inject-tolerance", "c8.bogus=1"]);
    assert_eq!(o.status.code(), Some(1));
}
