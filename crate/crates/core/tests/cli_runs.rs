use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn hessquot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hessquot")).args(args).output().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn poisson_solve_converges() {
    let out = tempfile::tempdir().unwrap();
    let cfg = preset("poisson.cfg");
    let o = hessquot(&["solve", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(out.path());
    assert_eq!(r["schema"], 1);
    assert_eq!(r["solve"]["converged"], true);
    assert_eq!(r["bounds"]["comparison"]["ok"], true);
    let csv = std::fs::read_to_string(out.path().join("field.csv")).unwrap();
    assert!(csv.starts_with("# grid n=2 dims=33,33 "));
    assert_eq!(csv.lines().count(), 1 + 33 * 33);
}

#[test]
fn bad_signature_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(preset("poisson.cfg")).unwrap().replace("problem.l = 0", "problem.l = 1");
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, text).unwrap();
    let o = hessquot(&["solve", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("0 <= l < k"));
}

#[test]
fn verify_reports_failed_alpha0_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(preset("poisson.cfg")).unwrap() + "structural.alpha0 = 0.1\n";
    let cfg = dir.path().join("v.cfg");
    std::fs::write(&cfg, text).unwrap();
    let o = hessquot(&["verify", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["structural"]["alpha0_ok"], false);
    assert_eq!(r["structural"]["c0_ok"], true);
    assert!(r["solve"].is_null());
}

#[test]
fn solver_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(preset("manufactured_box.cfg"))
        .unwrap()
        .replace("solver.nodes = 16", "solver.nodes = 6\nsolver.max_iter = 1\nsolver.dt_min = 0.2");
    let cfg = dir.path().join("f.cfg");
    std::fs::write(&cfg, text).unwrap();
    let o = hessquot(&["solve", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(2));
    let r = report(dir.path());
    assert_eq!(r["solve"]["converged"], false);
    assert_eq!(r["solve"]["failure"]["kind"], "continuation");
}

#[test]
fn unknown_key_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("u.cfg");
    std::fs::write(&cfg, "problem.n = 2\nproblem.colour = red\n").unwrap();
    assert_eq!(hessquot(&["solve", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(hessquot(&["solve", "/nonexistent.cfg"]).status.code(), Some(1));
    assert_eq!(hessquot(&["frobnicate", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn radial_sweep_reports_ratio_study() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("radial_quartic.cfg");
    let o = hessquot(&["sweep", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["sweep"]["runs"].as_array().unwrap().len(), 6);
    assert_eq!(r["sweep"]["study"]["stable"], true);
}
