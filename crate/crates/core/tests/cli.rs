//! End-to-end runs of the `curveflow` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn curveflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curveflow"))
        .args(args)
        .env("CURVEFLOW_THREADS", "0")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_artifacts_and_reruns_bit_identically_from_its_manifest() {
    let tmp = TempDir::new().unwrap();
    let config = write(
        tmp.path(),
        "knot.json",
        r#"{"scenario": "knot_biot_savart", "M": 48, "T_final": 0.02,
            "force": {"kind": "biot_savart", "biot_savart": {"delta": 0.1}},
            "output": {"snapshot_every": 0.01, "formats": ["csv", "obj"]}}"#,
    );
    let first = tmp.path().join("first");
    let out = curveflow(&["run", "--config", &config, "--out", first.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(
        stdout(&out).starts_with("knot_biot_savart: t = 0.02"),
        "{}",
        stdout(&out)
    );
    assert!(stderr(&out).contains("default integrator.tol"));
    for file in [
        "series.csv",
        "manifest.json",
        "snap_0.csv",
        "snap_2.csv",
        "snap_2.obj",
    ] {
        assert!(first.join(file).is_file(), "missing {file}");
    }
    let manifest = fs::read_to_string(first.join("manifest.json")).unwrap();
    assert!(manifest.contains(r#""status": "completed""#), "{manifest}");

    let second = tmp.path().join("second");
    let manifest_path = first.join("manifest.json");
    let out = curveflow(&[
        "run",
        "--config",
        manifest_path.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(
        !stderr(&out).contains("default "),
        "a manifest needs no defaults"
    );
    assert_eq!(
        fs::read(first.join("series.csv")).unwrap(),
        fs::read(second.join("series.csv")).unwrap()
    );
    assert_eq!(
        fs::read(first.join("snap_2.csv")).unwrap(),
        fs::read(second.join("snap_2.csv")).unwrap()
    );
}

#[test]
fn configuration_errors_exit_with_status_two() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        (r#"{"scenario": "gage", "bogus": 1}"#, "bogus"),
        (
            r#"{"scenario": "knot_biot_savart"}"#,
            "force.biot_savart.delta",
        ),
        (
            r#"{"scenario": "gage", "integrator": {"tol": -1}}"#,
            "integrator",
        ),
        (r#"{"scenario": "hopf_parallel"}"#, "hopf.lambda"),
    ];
    for (i, (text, key)) in cases.into_iter().enumerate() {
        let config = write(tmp.path(), &format!("c{i}.json"), text);
        let out = curveflow(&["run", "--config", &config]);
        assert_eq!(out.status.code(), Some(2), "{text}: {}", stderr(&out));
        assert!(stderr(&out).contains(key), "{text}: {}", stderr(&out));
    }
    let out = curveflow(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hopf_writes_trajectory_and_direction_field() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("hopf");
    let out = curveflow(&[
        "hopf",
        "--lambda",
        "5.36808",
        "--t-final",
        "50",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("stable focus"), "{}", stdout(&out));
    let trajectory = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = trajectory.lines().collect();
    assert_eq!(lines[0], "t,r,a,omega");
    assert_eq!(lines.len(), 1 + 1001);
    let last: Vec<f64> = lines
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((last[0] - 50.0).abs() < 1e-12);
    let r_steady = 1.0 / (5.36808f64 - 1.0).sqrt();
    assert!((last[1] - r_steady).abs() < 1e-3, "{last:?}");
    assert!(dir.join("phase.csv").is_file());

    let out = curveflow(&["hopf", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn linking_reads_obj_and_snapshot_files() {
    let tmp = TempDir::new().unwrap();
    let ring = |f: &dyn Fn(f64) -> [f64; 3]| {
        let m = 120;
        let mut text = String::new();
        for k in 0..m {
            let p = f(2.0 * std::f64::consts::PI * k as f64 / m as f64);
            text.push_str(&format!("v {} {} {}\n", p[0], p[1], p[2]));
        }
        text.push('l');
        for k in 1..=m {
            text.push_str(&format!(" {k}"));
        }
        text.push_str(" 1\n");
        text
    };
    let a = write(tmp.path(), "a.obj", &ring(&|t| [t.cos(), t.sin(), 0.0]));
    let b = write(
        tmp.path(),
        "b.obj",
        &ring(&|t| [1.0 + t.cos(), 0.0, t.sin()]),
    );
    let far = write(
        tmp.path(),
        "far.obj",
        &ring(&|t| [10.0 + t.cos(), t.sin(), 0.0]),
    );

    let out = curveflow(&["linking", "--a", &a, "--b", &b]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(
        stdout(&out).contains("(rounded -1)") || stdout(&out).contains("(rounded 1)"),
        "{}",
        stdout(&out)
    );
    let out = curveflow(&["linking", "--a", &a, "--b", &far]);
    assert!(stdout(&out).contains("(rounded 0)"), "{}", stdout(&out));

    let config = write(
        tmp.path(),
        "circle.json",
        r#"{"scenario": "shrinking_circle", "M": 40, "T_final": 0.01, "output": {"snapshot_times": []}}"#,
    );
    let run_dir = tmp.path().join("run");
    let out = curveflow(&[
        "run",
        "--config",
        &config,
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let snap = run_dir.join("snap_0.csv");
    let out = curveflow(&["linking", "--a", snap.to_str().unwrap(), "--b", &b]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("linking number"), "{}", stdout(&out));

    let out = curveflow(&["linking", "--a", "/nonexistent.obj", "--b", &b]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn eoc_prints_a_table_and_csv() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("eoc.csv");
    let out = curveflow(&[
        "eoc",
        "--meshes",
        "20,40",
        "--t-final",
        "0.05",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = stdout(&out);
    assert!(table.lines().count() >= 3, "{table}");
    let eoc: f64 = table
        .lines()
        .nth(2)
        .unwrap()
        .split_whitespace()
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!((1.8..=2.1).contains(&eoc), "{table}");
    assert!(fs::read_to_string(&csv).unwrap().lines().count() >= 3);

    let out = curveflow(&["eoc", "--meshes", "40,20"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}
