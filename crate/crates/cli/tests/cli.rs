use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parisian"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn models(dir: &Path) -> (PathBuf, PathBuf) {
    let bm = write(
        dir,
        "bm.json",
        r#"{"kind":"BrownianDrift","gamma":0.0,"sigma":1.4142135623730951}"#,
    );
    let cl = write(
        dir,
        "cl.toml",
        "kind = \"CramerLundbergExp\"\ngamma = 1.5\njump_rate = 1.0\n[jump]\nlaw = \"exponential\"\nrate = 1.0\n",
    );
    (bm, cl)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn rows(csv: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# "));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let data = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, data)
}

#[test]
fn scale_table_of_driftless_brownian_motion_is_identity() {
    let dir = TempDir::new().unwrap();
    let (bm, _) = models(dir.path());
    let out = dir.path().join("w.csv");
    let o = run(&[
        "scale",
        "--model",
        bm.to_str().unwrap(),
        "--q",
        "0",
        "--x",
        "0:5:0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, data) = rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(header, ["x", "W", "Wp", "Z"]);
    assert_eq!(data.len(), 51);
    for r in data {
        assert!((r[1] - r[0]).abs() < 1e-10, "{r:?}");
    }
}

#[test]
fn invalid_model_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"kind":"BrownianDrift","sigma":1.0}"#,
    );
    let out = dir.path().join("o.csv");
    let o = run(&[
        "exit",
        "--model",
        bad.to_str().unwrap(),
        "--r",
        "0.5",
        "--x",
        "0.5",
        "--a",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(!o.stderr.is_empty());
}

#[test]
fn bad_drawdown_spec_exits_2() {
    let dir = TempDir::new().unwrap();
    let (_, cl) = models(dir.path());
    let o = run(&[
        "exit",
        "--model",
        cl.to_str().unwrap(),
        "--r",
        "0.5",
        "--x",
        "0.5",
        "--a",
        "2",
        "--xi",
        "linear:1.5,0",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_convergent_tail_exits_3_with_value() {
    let dir = TempDir::new().unwrap();
    let (_, cl) = models(dir.path());
    let o = run(&[
        "ruin-prob",
        "--model",
        cl.to_str().unwrap(),
        "--r",
        "0.5",
        "--xi",
        "barrier:1",
        "--x",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let (_, data) = rows(&String::from_utf8(o.stdout).unwrap());
    assert!((data[0][1] - 1.0).abs() < 1e-12);
}

#[test]
fn exit_json_and_table_drawdown() {
    let dir = TempDir::new().unwrap();
    let (_, cl) = models(dir.path());
    let table = write(dir.path(), "xi.csv", "z,xi\n0.1,0\n1,0\n3,2\n");
    let m = cl.to_str().unwrap();
    let o = run(&[
        "exit",
        "--model",
        m,
        "--r",
        "0.5",
        "--x",
        "0.5",
        "--a",
        "2",
        "--xi",
        "barrier:1",
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let from_barrier = v["rows"][0][1].as_f64().unwrap();
    assert!(from_barrier > 0.0 && from_barrier < 1.0);
    let o = run(&[
        "exit",
        "--model",
        m,
        "--r",
        "0.5",
        "--x",
        "0.5",
        "--a",
        "2",
        "--xi",
        &format!("table:{}", table.display()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, data) = rows(&String::from_utf8(o.stdout).unwrap());
    assert!((data[0][1] - from_barrier).abs() < 1e-6);
}

#[test]
fn every_formula_subcommand_runs() {
    let dir = TempDir::new().unwrap();
    let (_, cl) = models(dir.path());
    let m = cl.to_str().unwrap();
    let cases: [&[&str]; 9] = [
        &["psi", "--x", "0:2:1"],
        &["ell", "--q", "0.1", "--r", "0.5", "--x", "0,1"],
        &["excursion", "--q", "0.1", "--r", "0.5", "--x", "1"],
        &[
            "exit",
            "--classical",
            "--q",
            "0.1",
            "--x",
            "0.5",
            "--a",
            "2",
            "--xi",
            "linear:0.5,1",
        ],
        &[
            "exit",
            "--q",
            "0.1",
            "--r",
            "0.5",
            "--x",
            "0.5",
            "--a",
            "2",
            "--eta",
            "const:-40",
            "--inversion",
            "euler",
        ],
        &[
            "joint-laplace",
            "--q",
            "0.1",
            "--r",
            "0.5",
            "--x",
            "0.5",
            "--a",
            "2",
            "--lambda",
            "0.3",
        ],
        &[
            "potential",
            "--q",
            "0.1",
            "--r",
            "0.5",
            "--x",
            "0.5",
            "--a",
            "2",
        ],
        &[
            "dividends",
            "--classical",
            "--q",
            "0.1",
            "--b",
            "1",
            "--k",
            "2",
            "--x",
            "0.5",
        ],
        &[
            "dividends",
            "--q",
            "0.1",
            "--r",
            "0.5",
            "--b",
            "1",
            "--xi",
            "barrier:1",
            "--x",
            "0.5",
        ],
    ];
    for args in cases {
        let o = bin().args(args).args(["--model", m]).output().unwrap();
        assert!(
            o.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let (_, data) = rows(&String::from_utf8(o.stdout).unwrap());
        assert!(data.iter().flatten().all(|v| v.is_finite()), "{args:?}");
    }
}

#[test]
fn simulate_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let (_, cl) = models(dir.path());
    let m = cl.to_str().unwrap();
    let mut texts = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = run(&[
            "simulate",
            "--target",
            "potential",
            "--model",
            m,
            "--q",
            "0.1",
            "--r",
            "0.5",
            "--x",
            "0.5,1",
            "--a",
            "2",
            "--paths",
            "2000",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        texts.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn verify_report_schema() {
    let dir = TempDir::new().unwrap();
    let (_, cl) = models(dir.path());
    let out = dir.path().join("v.json");
    let o = run(&[
        "verify",
        "--suite",
        "standard",
        "--model",
        cl.to_str().unwrap(),
        "--paths",
        "20000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    for r in reports {
        for key in [
            "quantity",
            "formula_value",
            "mc_estimate",
            "std_error",
            "z_score",
            "pass",
        ] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
        assert!(r["z_score"].as_f64().unwrap().abs() < 3.0);
        assert_eq!(r["pass"], true);
    }
}
