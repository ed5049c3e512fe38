use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tppp::analytic::{success_gap, success_prob};
use tppp::model::from_db;
use tppp::{Model, NetworkParams};

fn params() -> Value {
    json!({ "lambda": 1.0, "mu": 1.0, "p": 0.3, "theta": 1.0, "d_link": 0.25, "alpha": 4.0 })
}

fn run(dir: &Path, args: &[&str], config: Option<&Value>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tppp"));
    cmd.args(args).arg("--out").arg(dir).env_remove("TPPP_OUT_DIR");
    if let Some(cfg) = config {
        let path = dir.join(format!("{}.config.json", args[0]));
        fs::create_dir_all(dir).unwrap();
        fs::write(&path, serde_json::to_vec(cfg).unwrap()).unwrap();
        cmd.arg(path);
    }
    cmd.output().unwrap()
}

fn csv_rows(path: PathBuf) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn manifest(dir: &Path, command: &str) -> Value {
    serde_json::from_slice(&fs::read(dir.join(format!("{command}.manifest.json"))).unwrap()).unwrap()
}

#[test]
fn empty_model_list_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({ "params": params(), "models": [], "theta_db": [0.0, 10.0] });
    let out = run(dir.path(), &["success"], Some(&cfg));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("success.csv")).unwrap();
    assert_eq!(text, "theta_db,theta,model,value\n");
}

#[test]
fn single_theta_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({ "params": params(), "models": ["tppp_plp", "plp_ppp"], "theta_db": [3.0], "tol": 1e-8 });
    let out = run(dir.path(), &["success"], Some(&cfg));
    assert!(out.status.success());
    let (_, rows) = csv_rows(dir.path().join("success.csv"));
    assert_eq!(rows.len(), 2);
    let p = NetworkParams::default().with_theta(from_db(3.0));
    for (row, model) in rows.iter().zip([Model::TpppPlp, Model::PlpPpp]) {
        assert_eq!(row[2], model.name());
        let expected = success_prob(model, &p, 1e-8).unwrap();
        assert_eq!(row[3].parse::<f64>().unwrap(), expected);
    }
}

#[test]
fn plp_below_both_limits_of_its_parts() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = params();
    p["mu"] = json!(2.0);
    let cfg = json!({
        "params": p,
        "models": ["plp_ppp", "ppp1d", "ppp2d"],
        "theta_db": { "start": -10, "stop": 20, "num": 7 },
    });
    assert!(run(dir.path(), &["success"], Some(&cfg)).status.success());
    let (_, rows) = csv_rows(dir.path().join("success.csv"));
    for chunk in rows.chunks(3) {
        let v: Vec<f64> = chunk.iter().map(|r| r[3].parse().unwrap()).collect();
        assert!(v[0] <= v[1].min(v[2]) + 1e-9, "{v:?}");
    }
}

#[test]
fn repeated_seed_reproduces_checksums() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = json!({
        "params": params(),
        "models": ["plp_ppp", "tppp_plp"],
        "n_realizations": 300,
        "outputs": ["md", "success", "raw", "points"],
    });
    assert!(run(a.path(), &["simulate", "--seed", "7"], Some(&cfg)).status.success());
    assert!(run(b.path(), &["simulate", "--seed", "7", "--threads", "1"], Some(&cfg)).status.success());
    let (ma, mb) = (manifest(a.path(), "simulate"), manifest(b.path(), "simulate"));
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert_eq!(ma["outputs"].as_array().unwrap().len(), 4);
    let (header, rows) = csv_rows(a.path().join("simulate_raw.csv"));
    assert_eq!(header, vec!["plp_ppp", "tppp_plp"]);
    assert_eq!(rows.len(), 300);

    let c = tempfile::tempdir().unwrap();
    assert!(run(c.path(), &["simulate", "--seed", "8"], Some(&cfg)).status.success());
    assert_ne!(ma["outputs"], manifest(c.path(), "simulate")["outputs"]);
}

#[test]
fn bad_configs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = json!({ "params": params(), "models": [], "theta_db": [0.0], "colour": "red" });
    let out = run(dir.path(), &["success"], Some(&unknown));
    assert_eq!(out.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(report["error"]["kind"], "config");

    let mut p = params();
    p["p"] = json!(1.5);
    let invalid = json!({ "params": p, "models": ["tppp_plp"], "theta_db": [0.0] });
    assert_eq!(run(dir.path(), &["success"], Some(&invalid)).status.code(), Some(2));

    let missing = run(dir.path(), &["success", "/nonexistent/config.json"], None);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "params": params(),
        "models": ["tppp_plp"],
        "methods": ["beta", "empirical"],
        "theta_db": [0.0, 5.0],
        "x": [0.2, 0.6, 0.9],
        "n_realizations": 200,
    });
    assert!(run(dir.path(), &["metadist", "--seed", "3"], Some(&cfg)).status.success());
    let again = tempfile::tempdir().unwrap();
    let manifest_path = dir.path().join("metadist.manifest.json");
    let out = run(again.path(), &["replay", manifest_path.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["identical"], true);
    assert_eq!(
        fs::read(dir.path().join("metadist.csv")).unwrap(),
        fs::read(again.path().join("metadist.csv")).unwrap()
    );

    let mut tampered = manifest(dir.path(), "metadist");
    tampered["outputs"][0]["sha256"] = json!("00");
    fs::write(&manifest_path, serde_json::to_vec(&tampered).unwrap()).unwrap();
    let out = run(again.path(), &["replay", manifest_path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn success_contour_keeps_lambda_p_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "params": params(),
        "target_q": 0.9,
        "inv_lambda_grid": { "start": 0.1, "stop": 2.0, "num": 20 },
    });
    assert!(run(dir.path(), &["contour"], Some(&cfg)).status.success());
    let (header, rows) = csv_rows(dir.path().join("contour.csv"));
    assert_eq!(header, vec!["lambda", "inv_lambda", "p", "achieved_metric", "feasible"]);
    let lp: Vec<f64> = rows
        .iter()
        .map(|r| r[0].parse::<f64>().unwrap() * r[2].parse::<f64>().unwrap())
        .collect();
    assert!(lp.iter().all(|v| (v - lp[0]).abs() < 1e-10 * lp[0]));
    let range = &manifest(dir.path(), "contour")["summary"]["success_range"];
    assert!((range["min"].as_f64().unwrap() - 0.9).abs() < 1e-10);
}

#[test]
fn one_point_gap_scan_is_the_direct_difference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({ "mu": 0.204, "lambda_p": [0.12], "d2_theta_delta": [10.1], "tol": 1e-9 });
    assert!(run(dir.path(), &["maxgap"], Some(&cfg)).status.success());
    let scan: Value = serde_json::from_slice(&fs::read(dir.path().join("maxgap.json")).unwrap()).unwrap();
    let direct = success_gap(0.204, 4.0, 2, 0.12, 10.1, 1e-9).unwrap();
    assert_eq!(scan["best"]["gap"].as_f64().unwrap(), direct);
    assert_eq!(scan["grid"].as_array().unwrap().len(), 1);
}

#[test]
fn metadist_exact_and_beta_agree_at_low_reliability() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "params": params(),
        "models": ["tppp_plp"],
        "methods": ["exact", "beta"],
        "theta_db": [0.0],
        "x": [0.01, 0.95],
    });
    assert!(run(dir.path(), &["metadist"], Some(&cfg)).status.success());
    let (header, rows) = csv_rows(dir.path().join("metadist.csv"));
    assert_eq!(header[4..6], ["exact", "beta"]);
    let exact: f64 = rows[0][4].parse().unwrap();
    let beta: f64 = rows[0][5].parse().unwrap();
    assert!((exact - beta).abs() < 1e-3);
    assert!(rows[0][6].is_empty());
    let headline: f64 = rows[1][4].parse().unwrap();
    assert!((headline - 0.2).abs() < 0.03, "{headline}");
}

#[test]
fn stick_models_reject_exact_inversion() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = params();
    p["street_model"] = json!("psp");
    p["half_length_param"] = json!(1.0);
    let cfg = json!({
        "params": p,
        "models": ["psp_ppp"],
        "methods": ["exact"],
        "theta_db": [0.0],
        "x": [0.5],
    });
    assert_eq!(run(dir.path(), &["metadist"], Some(&cfg)).status.code(), Some(2));
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let cfg = json!({ "params": params(), "models": ["ppp2d"], "theta_db": [0.0] });
    fs::write(&cfg_path, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let target = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_tppp"))
        .arg("success")
        .arg(&cfg_path)
        .env("TPPP_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("success.csv").exists());
    assert!(target.join("success.manifest.json").exists());
}
