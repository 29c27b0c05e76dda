use std::path::Path;
use std::process::{Command, Output};

fn peplift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peplift"))
        .args(args)
        .env_remove("PEPLIFT_TOL")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn certify_ogm_passes() {
    let o = peplift(&["certify", "--algo", "ogm", "--metric", "func", "--n", "16"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["pass"], true);
    assert_eq!(v["n"], 16);
    assert_eq!(v["metric"], "func");
}

#[test]
fn incompatible_pair_is_usage_error() {
    let o = peplift(&["certify", "--algo", "silver", "--metric", "grad", "--k", "2"]);
    assert_eq!(code(&o), 2);
    let o = peplift(&["lift", "--algo", "ogmg", "--metric", "func", "--n", "4"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn zero_steps_is_invalid() {
    let o = peplift(&["certify", "--algo", "ogm", "--n", "0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid argument"));
}

#[test]
fn unknown_algorithm_lists_names() {
    let o = peplift(&["certify", "--algo", "heavyball", "--n", "3"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["silver", "gsw", "ogm", "ogmg"] {
        assert!(err.contains(name));
    }
}

#[test]
fn lift_silver_default_rate() {
    let o = peplift(&["lift", "--algo", "silver", "--k", "4", "--xi", "paper"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let rate = v["rate"].as_f64().unwrap();
    let rho = 1.0 + 2f64.sqrt();
    let expect = rho / (2f64.sqrt() * (4.0 * rho.powi(4) - 2.0));
    assert!((rate - expect).abs() <= 1e-12 * expect);
    assert_eq!(v["laplacian_ok"], true);
    // 17 significant digits
    let text = stdout(&o);
    let line = text.lines().find(|l| l.contains("\"rate\"")).unwrap();
    let digits: String = line.split(':').nth(1).unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
    assert!(digits.len() >= 17, "{line}");
}

#[test]
fn lift_pseudo_reports_smaller_xi() {
    let o = peplift(&["lift", "--algo", "silver", "--k", "3", "--xi", "pseudo"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert!(v["pseudo_xi"].as_f64().unwrap() <= 1.0 / 2f64.sqrt());
}

#[test]
fn lift_rejects_negative_and_tiny_xi() {
    let o = peplift(&["lift", "--algo", "silver", "--k", "2", "--xi", "-1"]);
    assert_eq!(code(&o), 2);
    let o = peplift(&["lift", "--algo", "silver", "--k", "2", "--xi", "1e-6"]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["pass"], false);
}

#[test]
fn lift_grad_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = peplift(&["lift", "--algo", "gsw", "--k", "3", "--json", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("PASS"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["metric"], "grad");
}

fn write_problem(dir: &Path, body: &str) -> String {
    let p = dir.join("problem.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_pogm_with_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let prob = write_problem(dir.path(), r#"{"kind":"lasso","rows":20,"cols":10,"seed":3}"#);
    let csv = dir.path().join("t.csv");
    let js = dir.path().join("t.json");
    let o = peplift(&[
        "run", "--algo", "pogm", "--problem", &prob, "--n", "12",
        "--csv", csv.to_str().unwrap(), "--json", js.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("PASS"));
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 14);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(js).unwrap()).unwrap();
    assert_eq!(v["gap"].as_array().unwrap().len(), 13);
    assert_eq!(v["distance"].as_array().unwrap().len(), 13);
}

#[test]
fn run_other_methods() {
    let dir = tempfile::tempdir().unwrap();
    let prob = write_problem(dir.path(), r#"{"kind":"box_qp","rows":15,"cols":8,"seed":5,"lo":-0.5,"hi":0.5}"#);
    for args in [
        vec!["--algo", "proxgd-silver", "--k", "3"],
        vec!["--algo", "proxgd-silver", "--n", "7"],
        vec!["--algo", "proxgd-gsw", "--k", "2"],
        vec!["--algo", "pogmg", "--n", "9"],
        vec!["--algo", "fista", "--n", "9"],
        vec!["--algo", "proxgd-const", "--n", "9", "--alpha", "1.5"],
    ] {
        let mut all = vec!["run", "--problem", prob.as_str()];
        all.extend(args.iter());
        let o = peplift(&all);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = peplift(&["run", "--problem", &prob, "--algo", "proxgd-silver", "--n", "6"]);
    assert_eq!(code(&o), 2);
    let o = peplift(&["run", "--problem", "/nonexistent.json", "--algo", "pogm", "--n", "3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_grid_and_empty_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(
        &cfg,
        r#"{"cells":[{"algorithm":"silver","sizes":[1,2,3]},{"algorithm":"ogmg","sizes":[2,5]}],
            "instances":{"count":2,"rows":10,"cols":6}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = peplift(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
    assert!(out.join("silver_k3.json").exists());
    assert!(out.join("ogmg_n5.json").exists());

    std::fs::write(&cfg, "{}").unwrap();
    let empty = dir.path().join("empty");
    let o = peplift(&["sweep", "--config", cfg.to_str().unwrap(), "--out", empty.to_str().unwrap()]);
    assert_eq!(code(&o), 0);

    std::fs::write(&cfg, r#"{"cells":[{"algorithm":"nesterov","sizes":[1]}]}"#).unwrap();
    let o = peplift(&["sweep", "--config", cfg.to_str().unwrap(), "--out", empty.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ogmg"));
}

#[test]
fn tolerance_override_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_peplift"))
        .args(["certify", "--algo", "silver", "--k", "2"])
        .env("PEPLIFT_TOL", "1e-20")
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["tol"].as_f64().unwrap(), 1e-20);
}

#[test]
fn certificate_export_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let o = peplift(&["certify", "--algo", "ogmg", "--n", "5", "--export", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let file = peplift::certificates::CertificateFile::load(&path).unwrap();
    let cert = file.into_grad().unwrap();
    assert_eq!(cert, peplift::certificates::ogmg_grad_certificate(5).unwrap());
}
