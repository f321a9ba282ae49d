use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qpattern(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpattern"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const CONFIG: &str = "\
[grid]
width = 64
height = 64
seed = 5

[pattern]
spacing = 8.0
delta_rho = 0.5
region = [0, 0, 64, 64]
";

fn write_config(dir: &Path) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, CONFIG).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_artifacts_and_recovers_spacing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = qpattern(&["run", "-c", &cfg, "-o", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in [
        "grid.txt",
        "spectrum.csv",
        "spectrum_transposed.csv",
        "counters.json",
        "config.toml",
        "report.json",
    ] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["presence"]["present"], true);
    let d = report["estimate"]["d_hat"].as_f64().unwrap();
    assert!((d - 8.0).abs() < 0.5, "{d}");
    assert!(report["estimate"]["theta_hat"].as_f64().unwrap().abs() < 0.05);
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let args = ["run", "-c", &cfg, "--mode", "sample", "--shots", "3000"];
    let a = qpattern(&args);
    let b = qpattern(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn flags_and_overrides_change_the_config() {
    let out = qpattern(&[
        "generate",
        "--width",
        "8",
        "--height",
        "4",
        "--spacing",
        "4",
        "--delta-rho",
        "0.5",
        "--region",
        "0,0,8,4",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "P1");
    assert_eq!(rows[1], "8 4");
    assert!(rows[2..].iter().all(|r| *r == "10011001"));

    let base = qpattern(&["generate", "--width", "8", "--height", "8"]);
    let set = qpattern(&[
        "generate",
        "--width",
        "8",
        "--height",
        "8",
        "--set",
        "grid.seed=9",
    ]);
    assert_ne!(base.stdout, set.stdout);
}

#[test]
fn invalid_input_fails_with_field_name() {
    let out = qpattern(&["run", "--rho", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("grid.rho"));
    let out = qpattern(&["run", "--set", "run.nonsense=1"]);
    assert!(!out.status.success());
    let out = qpattern(&["run", "--region", "1,2"]);
    assert!(!out.status.success());
    let out = qpattern(&["run", "-c", "/nonexistent/exp.toml"]);
    assert!(!out.status.success());
}

#[test]
fn sweep_and_spectrum_emit_csv() {
    let out = qpattern(&["sweep", "--sizes", "8,10,12"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert!(lines[1].starts_with("s,size,qft_gates"));
    let gates: Vec<&str> = lines[2..]
        .iter()
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(gates, ["40", "60", "84"]);

    let out = qpattern(&[
        "spectrum",
        "--width",
        "8",
        "--height",
        "4",
        "--rho",
        "0.25",
        "--spacing",
        "4",
        "--delta-rho",
        "0.75",
        "--line-width",
        "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let p: Vec<f64> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(p.len(), 32);
    for (k, v) in p.iter().enumerate() {
        let want = if k % 8 == 0 { 0.25 } else { 0.0 };
        assert!((v - want).abs() < 1e-12, "k={k} {v}");
    }
}

#[test]
fn localise_reports_quadrant_and_budget() {
    let args = [
        "localise",
        "--width",
        "64",
        "--height",
        "64",
        "--spacing",
        "4",
        "--delta-rho",
        "0.5",
        "--region",
        "32,0,32,32",
        "--chi-hint",
        "0.25",
    ];
    let out = qpattern(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let outcome: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        outcome["regions"],
        serde_json::json!([{"x0": 32, "y0": 0, "width": 32, "height": 32}])
    );

    let mut limited = args.to_vec();
    limited.extend(["--budget", "1"]);
    let out = qpattern(&limited);
    assert_eq!(out.status.code(), Some(3));
}
