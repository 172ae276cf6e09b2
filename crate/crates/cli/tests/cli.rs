use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn subflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subflow"))
        .args(args)
        .env("SUBFLOW_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stable_spec(dir: &Path) -> String {
    write(dir, "stable05.toml", "family = \"stable\"\nalpha = 0.5\n")
}

#[test]
fn validate_prints_empty_list() {
    let dir = TempDir::new().unwrap();
    let spec = stable_spec(dir.path());
    let out = subflow(&["validate", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "[]");
}

#[test]
fn validate_reports_violations() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "bad.toml", "family = \"stable\"\nalpha = 1.5\n");
    let out = subflow(&["validate", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("AlphaOutOfRange"));
}

#[test]
fn parse_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "bad.toml", "family = \"stable\"\nalpha = \n");
    let out = subflow(&["validate", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(2));
    let spec = stable_spec(dir.path());
    let csv = dir.path().join("d.csv");
    let out = subflow(&[
        "density",
        "--spec",
        &spec,
        "--kind",
        "l",
        "--t",
        "1",
        "--grid",
        "4:0:10",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn density_l_starts_at_tail_value() {
    let dir = TempDir::new().unwrap();
    let spec = stable_spec(dir.path());
    let csv = dir.path().join("l.csv");
    let out = subflow(&[
        "density",
        "--spec",
        &spec,
        "--kind",
        "l",
        "--t",
        "1",
        "--grid",
        "0:4:400",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,value"));
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(first[0], 0.0);
    // ν(1) = 1/Γ(1/2)
    let nu1 = 1.0 / std::f64::consts::PI.sqrt();
    assert!((first[1] - nu1).abs() < 1e-12);
    assert_eq!(text.lines().count(), 402);
    let manifest = fs::read_to_string(dir.path().join("l.csv.manifest.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(m["subcommand"], "density");
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let spec = stable_spec(dir.path());
    let run = |name: &str| {
        let csv = dir.path().join(name);
        let out = subflow(&[
            "simulate",
            "--spec",
            &spec,
            "--gamma",
            "1e-2",
            "--paths",
            "2000",
            "--seed",
            "42",
            "--t",
            "1.0",
            "--functional",
            "cdf",
            "--out",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        fs::read(csv).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn solve_and_moments_write_outputs() {
    let dir = TempDir::new().unwrap();
    let spec = stable_spec(dir.path());
    let sg = write(
        dir.path(),
        "sg.toml",
        "kind = \"scalar_relaxation\"\nmu = 1.0\n",
    );
    let u0 = write(dir.path(), "u0.csv", "value\n1.0\n");
    let traj = dir.path().join("traj.csv");
    let res = dir.path().join("res.csv");
    let out = subflow(&[
        "solve",
        "--spec",
        &spec,
        "--semigroup",
        &sg,
        "--u0",
        &u0,
        "--tgrid",
        "0:2:100",
        "--out",
        traj.to_str().unwrap(),
        "--residuals",
        res.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(fs::read_to_string(&traj).unwrap().lines().count(), 102);
    assert!(fs::read_to_string(&res)
        .unwrap()
        .starts_with("t,residual\n"));

    let mom = dir.path().join("m.csv");
    let out = subflow(&[
        "moments",
        "--spec",
        &spec,
        "--times",
        "1",
        "--orders",
        "2",
        "--out",
        mom.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&mom).unwrap();
    let v: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .next_back()
        .unwrap()
        .parse()
        .unwrap();
    assert!((v - 2.0).abs() < 2e-3, "{v}");
}

#[test]
fn check_suites_pass_for_stable() {
    let dir = TempDir::new().unwrap();
    let spec = stable_spec(dir.path());
    for suite in ["bounds", "longrange"] {
        let out = subflow(&["check", "--suite", suite, "--spec", &spec]);
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert_eq!(out.status.code(), Some(0), "{suite}: {stdout}");
        assert!(stdout.lines().all(|l| l.starts_with("PASS")));
    }
}

#[test]
fn derivative_of_line() {
    let dir = TempDir::new().unwrap();
    let spec = stable_spec(dir.path());
    let mut text = String::from("t,value\n");
    for k in 0..=100 {
        let t = k as f64 / 100.0;
        text.push_str(&format!("{t},{t}\n"));
    }
    let input = write(dir.path(), "u.csv", &text);
    let out_csv = dir.path().join("d.csv");
    let out = subflow(&[
        "derivative",
        "--spec",
        &spec,
        "--input",
        &input,
        "--kind",
        "rl",
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let d = fs::read_to_string(&out_csv).unwrap();
    // the endpoint is missing for an infinite-activity tail
    assert!(d.lines().nth(1).unwrap().ends_with(','));
}
