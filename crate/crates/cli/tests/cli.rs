use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const SMALL: &str = r#"{
  "mesh": {"nx": 6, "ny": 3},
  "grid": {"steps": 3},
  "optimizer": {"max_outer_iters": 4, "gamma_schedule": [10, 100], "volume_penalty": {"weight": 1, "fraction": 0.5}},
  "study": {"gammas": [10, 100, 1000], "ks": [2, 4], "sizes": [0.01, 0.001]}
}"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_plastopt"));
    c.env_remove("PLASTOPT_OUT");
    c
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(dir: &Path, config: &str, args: &[&str], out: &str) -> (Output, PathBuf) {
    let cfg = write_config(dir, config);
    let out = dir.join(out);
    let o = bin().args(args).arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    (o, out)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_report(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn messages(report: &Value) -> Vec<String> {
    report["messages"].as_array().unwrap().iter().map(|m| m.as_str().unwrap().to_string()).collect()
}

fn artifact_hashes(out: &Path) -> Vec<(String, String)> {
    let m = json(&out.join("manifest.json"));
    m["artifacts"].as_array().unwrap().iter().map(|a| (a["path"].as_str().unwrap().into(), a["sha256"].as_str().unwrap().into())).collect()
}

fn assert_manifest_on_disk(out: &Path) {
    let m = json(&out.join("manifest.json"));
    let arts = m["artifacts"].as_array().unwrap();
    assert!(!arts.is_empty());
    for a in arts {
        let path = out.join(a["path"].as_str().unwrap());
        let bytes = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(bytes.len() as u64, a["bytes"].as_u64().unwrap());
        assert_eq!(hex::encode(Sha256::digest(&bytes)), a["sha256"].as_str().unwrap());
    }
}

#[test]
fn zero_loads_give_a_zero_summary() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(dir.path(), r#"{"mesh": {"nx": 4, "ny": 2}, "grid": {"steps": 2}, "loads": {"g": ["0", "0"]}}"#, &["forward"], "fwd");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("summary.json"));
    for key in ["total_dissipation", "max_abs_u", "max_abs_p", "final_energy", "min_energy_slack"] {
        assert_eq!(s[key].as_f64(), Some(0.0), "{key}");
    }
    for key in ["terminal_body", "terminal_traction", "increment_body", "increment_traction"] {
        assert_eq!(s["objective"][key].as_f64(), Some(0.0), "{key}");
    }
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["mode"], "forward");
    assert!(m["contracts"].as_array().unwrap().iter().all(|c| c["held"] == true));
    let names: Vec<String> = artifact_hashes(&out).into_iter().map(|(p, _)| p).collect();
    assert_eq!(names, ["config.json", "state_000.vtk", "state_001.vtk", "state_002.vtk", "steps.csv", "summary.json"]);
    assert_manifest_on_disk(&out);
}

#[test]
fn loads_not_vanishing_at_start_are_rejected() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(dir.path(), r#"{"loads": {"f": ["0", "-0.01"]}}"#, &["forward"], "out");
    assert_eq!(o.status.code(), Some(2));
    let report = stderr_report(&o);
    assert_eq!(report["kind"], "config");
    assert_eq!(messages(&report), ["loads must vanish at t = 0, but `f` does not"]);
    assert!(out.join("error.json").exists());
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn negative_yield_stress_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"material": {"weak": {"mu": 1e-3, "lambda": 1e-3, "h": 1e-4, "d": -5e-5, "ell": 1e-3}}}"#;
    let (o, _) = run(dir.path(), cfg, &["forward"], "out");
    assert_eq!(o.status.code(), Some(2));
    let m = messages(&stderr_report(&o));
    assert_eq!(m.len(), 1, "{m:?}");
    assert!(m[0].starts_with("material coefficient d0 = -0.00005"), "{m:?}");
}

#[test]
fn all_violations_are_reported_together() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"mesh": {"nx": 0}, "loads": {"g": ["0", "t +"]}, "delta": -1, "optimizer": {"delta": -1, "shrink": 2}}"#;
    let (o, _) = run(dir.path(), cfg, &["forward"], "out");
    assert_eq!(o.status.code(), Some(2));
    let m = messages(&stderr_report(&o));
    for needle in ["mesh:", "loads.g[1]", "delta = -1", "optimizer: delta = -1", "optimizer: shrink = 2"] {
        assert!(m.iter().any(|s| s.contains(needle)), "{needle} missing from {m:?}");
    }
}

#[test]
fn syntax_errors_name_the_line() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run(dir.path(), "{\n  \"grid\": {\"steps\": 4,}\n}", &["forward"], "out");
    assert_eq!(o.status.code(), Some(2));
    let m = messages(&stderr_report(&o));
    assert!(m[0].contains(":2:"), "{m:?}");
    let (o, _) = run(dir.path(), r#"{"grid": {"stepz": 4}}"#, &["forward"], "out");
    assert_eq!(o.status.code(), Some(2));
    assert!(messages(&stderr_report(&o))[0].contains("stepz"));
}

#[test]
fn gamma_sweep_has_one_row_per_gamma() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(dir.path(), SMALL, &["lab", "gamma_sweep"], "lab");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("gamma_sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert!(rows[0].starts_with("gamma,distance_to_exact,"));
    let gammas: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(gammas, ["10", "100", "1000"]);
    assert_eq!(json(&out.join("manifest.json"))["mode"], "lab:gamma_sweep");
    assert_manifest_on_disk(&out);
}

#[test]
fn every_study_runs() {
    let dir = TempDir::new().unwrap();
    for study in ["timestep_sweep", "delta_sweep", "mm_profile_check", "adjoint_bound_study", "lipschitz_in_z_study"] {
        let (o, out) = run(dir.path(), SMALL, &["lab", study], study);
        assert!(o.status.success(), "{study}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join(format!("{study}.csv")).exists());
        assert_eq!(json(&out.join(format!("{study}.json")))["study"], study);
    }
}

#[test]
fn lab_study_can_come_from_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"study": {"name": "mm_profile_check", "deltas": [0.02]}}"#;
    let (o, out) = run(dir.path(), cfg, &["lab"], "lab");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("mm_profile_check.json"));
    assert!(s["table"]["rows"][0][2].as_f64().unwrap() < 0.02);
    let (o, _) = run(dir.path(), "{}", &["lab"], "none");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_writes_trace_and_design() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(dir.path(), SMALL, &["optimize"], "opt");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> = artifact_hashes(&out).into_iter().map(|(p, _)| p).collect();
    for want in ["trace.csv", "stages.csv", "design.vtk", "summary.json"] {
        assert!(names.iter().any(|n| n == want), "{want} not in {names:?}");
    }
    let vtk = std::fs::read_to_string(out.join("design.vtk")).unwrap();
    assert!(vtk.contains("SCALARS z double 1"));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().count() > 2);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["stages"].as_array().unwrap().len(), 2);
    assert_manifest_on_disk(&out);
}

#[test]
fn artifacts_are_deterministic_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut hashes = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out = dir.path().join(name);
        let o = bin().args(["optimize", "--threads", threads, "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(json(&out.join("manifest.json"))["threads"].as_u64(), Some(threads.parse().unwrap()));
        hashes.push((artifact_hashes(&out), json(&out.join("manifest.json"))["config_sha256"].clone()));
    }
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(hashes[0], hashes[2]);
}

#[test]
fn output_directory_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg_text = format!(r#"{{"output": "{}", "mesh": {{"nx": 2, "ny": 1}}, "grid": {{"steps": 1}}}}"#, dir.path().join("from_config").display());
    let cfg = write_config(dir.path(), &cfg_text);
    let go = |env: Option<&Path>, out: Option<&Path>| {
        let mut c = bin();
        c.arg("forward").arg("--config").arg(&cfg);
        if let Some(e) = env {
            c.env("PLASTOPT_OUT", e);
        }
        if let Some(o) = out {
            c.arg("--out").arg(o);
        }
        assert!(c.output().unwrap().status.success());
    };
    go(None, None);
    assert!(dir.path().join("from_config/manifest.json").exists());
    go(Some(&dir.path().join("from_env")), None);
    assert!(dir.path().join("from_env/manifest.json").exists());
    go(Some(&dir.path().join("env_loses")), Some(&dir.path().join("from_flag")));
    assert!(dir.path().join("from_flag/manifest.json").exists());
    assert!(!dir.path().join("env_loses").exists());
}

#[test]
fn check_runs_the_property_suite() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run(dir.path(), "{}", &["check"], "check");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let outcomes = json(&out.join("check.json"));
    assert!(outcomes.as_array().unwrap().len() >= 6);
    assert!(outcomes.as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let tmp = TempDir::new().unwrap();
        let o = bin().args(["lab", "mm_profile_check", "--config"]).arg(&path).arg("--out").arg(tmp.path()).output().unwrap();
        assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
        n += 1;
    }
    assert!(n >= 3);
}
