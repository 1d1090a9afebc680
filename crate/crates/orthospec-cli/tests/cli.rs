use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orthospec"))
        .args(args)
        .env_remove("ORTHOSPEC_TOL")
        .env_remove("ORTHOSPEC_EXTENDED")
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn classify_examples() {
    let q = report(&["classify", "--family", "quartic", "--c", "0", "--mu", "0"]);
    assert_eq!(q["outputs"]["verdict"], "INDET_S_INDET_H");
    let dn = report(&["classify", "--family", "stieltjes-dn", "--k2", "0.5"]);
    assert_eq!(dn["outputs"]["verdict"], "DET_H");
    let unit = report(&["classify", "--lambda", "1", "--mu", "1*(n>0)"]);
    assert_eq!(unit["outputs"]["verdict"], "DET_H");
    assert_eq!(unit["inputs"]["rates"]["family"], "custom");
}

#[test]
fn markov_transform_matches_series_of_masses() {
    let r = report(&["transform", "--family", "stieltjes-dn", "--k2", "0.5", "--x", "0,1", "--mode", "markov"]);
    let (re, im) = complex(&r["outputs"]["value"]);
    assert_eq!(r["outputs"]["converged"], true);
    // Σ ψ_n/(i − t_n) with the dn Fourier masses, summed independently here.
    let k = 1.854_074_677_301_371_9_f64;
    let q = (-std::f64::consts::PI).exp();
    let pi = std::f64::consts::PI;
    let (mut ore, mut oim) = (0.0, 0.0);
    for n in 0..60 {
        let m = if n == 0 { pi / (2.0 * k) } else { 2.0 * pi / k * q.powi(n) / (1.0 + q.powi(2 * n)) };
        let t = (n as f64 * pi / k).powi(2);
        let d = t * t + 1.0;
        ore += m * (-t) / d;
        oim += m * (-1.0) / d;
    }
    assert!((re - ore).abs() < 1e-8 && (im - oim).abs() < 1e-8, "({re},{im}) vs ({ore},{oim})");
}

#[test]
fn krein_transform_matches_nevanlinna_ratio() {
    let k = report(&["transform", "--family", "quartic", "--x", "10,10", "--mode", "krein"]);
    let n = report(&["transform", "--family", "quartic", "--x", "10,10", "--mode", "nevanlinna:0"]);
    let (a, b) = (complex(&k["outputs"]["value"]), complex(&n["outputs"]["value"]));
    assert!((a.0 - b.0).abs() < 1e-7 && (a.1 - b.1).abs() < 1e-7, "{a:?} vs {b:?}");
    let f = report(&["transform", "--family", "quartic", "--x", "10,10", "--mode", "friedrichs"]);
    let g = report(&["transform", "--family", "quartic", "--x", "10,10", "--mode", "nevanlinna:inf", "--convention", "mu"]);
    let (a, b) = (complex(&f["outputs"]["value"]), complex(&g["outputs"]["value"]));
    assert!((a.0 - b.0).abs() < 1e-7 && (a.1 - b.1).abs() < 1e-7, "{a:?} vs {b:?}");
}

#[test]
fn spectrum_files() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("psi.json");
    let r = report(&["spectrum", "--family", "stieltjes-dn", "--k2", "0.5", "--mode", "dn-measure", "--out", json_path.to_str().unwrap()]);
    assert_eq!(r["outputs"]["normalized"], true);
    let psi: Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let k = 1.854_074_677_301_371_9_f64;
    let t1 = psi["support"][1].as_f64().unwrap();
    assert!((t1 / (std::f64::consts::PI / k).powi(2) - 1.0).abs() < 1e-14);

    let csv_path = dir.path().join("fr.csv");
    report(&["spectrum", "--family", "quartic", "--mode", "border:friedrichs", "--out", csv_path.to_str().unwrap()]);
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let first: f64 = text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((first / (std::f64::consts::PI / k).powi(4) - 1.0).abs() < 1e-14);

    let g = report(&["spectrum", "--mode", "gauss:1"]);
    let atom = &g["outputs"]["first_atoms"][0];
    assert_eq!(g["outputs"]["atoms"], 1);
    assert!((atom[0].as_f64().unwrap() - 0.5).abs() < 1e-15 && (atom[1].as_f64().unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn nextremal_spectrum_krein() {
    let r = report(&["spectrum", "--family", "quartic", "--mode", "nextremal:0", "--window", "-1,3000"]);
    let atoms = r["outputs"]["first_atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 3);
    let k = 1.854_074_677_301_371_9_f64;
    let x1 = (2.0 * std::f64::consts::PI / k).powi(4);
    assert!((atoms[1][0].as_f64().unwrap() / x1 - 1.0).abs() < 1e-7);
    assert!(atoms[0][0].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn output_is_deterministic() {
    let args = ["transform", "--family", "quartic", "--x", "3,2", "--mode", "nevanlinna:alpha"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| run(args).status.code().unwrap();
    assert_eq!(code(&["transform", "--family", "stieltjes-dn", "--x", "0,1", "--mode", "friedrichs"]), 3);
    assert_eq!(code(&["spectrum", "--family", "quartic", "--mode", "dn-measure"]), 3);
    assert_eq!(code(&["transform", "--x", "a,b", "--mode", "markov"]), 2);
    assert_eq!(code(&["classify", "--lambda", "1+", "--mu", "n"]), 2);
    assert_eq!(code(&["classify", "--lambda", "1-n", "--mu", "n"]), 2);
    assert_eq!(code(&["transform", "--x", "1,1", "--mode", "sideways"]), 2);
    assert_eq!(code(&["classify", "--bogus"]), 2);
    assert_eq!(code(&["spectrum", "--family", "quartic", "--mode", "border:krein", "--out", "/nonexistent/dir/k.csv"]), 4);
}

#[test]
fn environment_switches() {
    let out = Command::new(env!("CARGO_BIN_EXE_orthospec"))
        .args(["classify", "--family", "quartic"])
        .env("ORTHOSPEC_TOL", "1e-8")
        .env("ORTHOSPEC_EXTENDED", "1")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["diagnostics"]["tol"], 1e-8);
    assert_eq!(v["diagnostics"]["extended"], true);
    let version = run(&["--version"]);
    assert_eq!(String::from_utf8_lossy(&version.stdout).trim(), format!("orthospec {}", env!("CARGO_PKG_VERSION")));
}
