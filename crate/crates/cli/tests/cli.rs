//! End-to-end runs of the `forced-waves` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const PSET_A: &str = r#"
scenario = "eu"
speed = 2.5

[model]
d = 1.0
r1 = 1.0
r2 = 2.0
r3 = 1.0
a = 2.0
b = 0.1
h = 0.5
k = 1.5

[shift]
family = "sigmoid"
m = 2.0
rho = 1.5
K = 1.0
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forced-waves"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is one JSON report")
}

#[test]
fn check_reports_epsilon_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", PSET_A);
    let o = run(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&o);
    assert_eq!(r["status"], "pass");
    let eps = r["result"]["hypotheses"]["epsilon_max"].as_f64().unwrap();
    assert!((eps - 0.2).abs() < 1e-12, "{eps}");
    assert_eq!(r["config"]["model"]["r2"], 2.0);
}

#[test]
fn failing_hypothesis_exits_3_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "a.toml",
        &PSET_A.replace("r1 = 1.0", "r1 = 2.0"),
    );
    let o = run(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("(r1)"), "{}", stderr(&o));
}

#[test]
fn forced_constant_fails_verification_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{PSET_A}\n[bounds.overrides]\nq1 = 1.01\n");
    let cfg = write_config(dir.path(), "a.toml", &text);
    let out = dir.path().join("out");
    let o = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("L2") && err.contains("z = "), "{err}");
    assert!(out.join("verify.json").exists());
    assert!(out.join("residuals.csv").exists());
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", &format!("bogus = 1\n{PSET_A}"));
    let o = run(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));
}

#[test]
fn missing_file_and_bad_usage_exit_1() {
    assert_eq!(
        run(&["check", "--config", "/nonexistent/x.toml"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["frobnicate", "--config", "x.toml"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["check"]).status.code(), Some(1));
}

#[test]
fn printed_schema_is_a_valid_config() {
    let o = run(&["--print-schema"]);
    assert_eq!(o.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", &String::from_utf8(o.stdout).unwrap());
    let o = run(&["speeds", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s2 = report(&o)["result"]["critical_speeds"]["s2_star"]
        .as_f64()
        .unwrap();
    assert!((s2 - 2.0).abs() < 1e-12);
}

#[test]
fn solver_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{PSET_A}\n[grid]\nn = 1001\n[solver]\nmax_iterations = 1\n");
    let cfg = write_config(dir.path(), "a.toml", &text);
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{PSET_A}\n[grid]\nn = 1001\n");
    let cfg = write_config(dir.path(), "a.toml", &text);
    let out = dir.path().join("out");
    let args = [
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    let first = run(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let wave = fs::read(out.join("wave.csv")).unwrap();
    let json = fs::read(out.join("solve.json")).unwrap();
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(wave, fs::read(out.join("wave.csv")).unwrap());
    assert_eq!(json, fs::read(out.join("solve.json")).unwrap());
    let header = String::from_utf8(wave).unwrap();
    assert!(header.starts_with("z,phi1,phi2,phi3\n"));
}

#[test]
fn parallel_sweep_matches_serial() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{PSET_A}\n[grid]\nn = 801\n[sweep]\nspeeds = [2.5, 3.0]\n");
    let cfg = write_config(dir.path(), "a.toml", &text);
    let serial = dir.path().join("serial");
    let parallel = dir.path().join("parallel");
    for (out, jobs) in [(&serial, "1"), (&parallel, "2")] {
        let o = run(&[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for sub in ["s_2.5", "s_3"] {
        assert_eq!(
            fs::read(serial.join(sub).join("wave.csv")).unwrap(),
            fs::read(parallel.join(sub).join("wave.csv")).unwrap()
        );
    }
}
