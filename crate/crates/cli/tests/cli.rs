use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use wlasso_cli::document::ResultDocument;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn wlasso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wlasso")).args(args).env_remove("WLASSO_THREADS").output().unwrap()
}

fn fit(extra: &[&str]) -> (Output, Option<ResultDocument>) {
    let x = data("x.csv");
    let y = data("y.csv");
    let mut args = vec!["fit", "--x", x.to_str().unwrap(), "--y", y.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = wlasso(&args);
    let doc = serde_json::from_slice(&out.stdout).ok();
    (out, doc)
}

fn expected() -> Value {
    serde_json::from_str(&std::fs::read_to_string(data("expected.json")).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn write_csv(path: &Path, rows: &[Vec<f64>]) {
    let text: Vec<String> =
        rows.iter().map(|r| r.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")).collect();
    std::fs::write(path, text.join("\n")).unwrap();
}

#[test]
fn golden_wlasso_selects_truth() {
    let (out, doc) = fit(&[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = doc.unwrap();
    let truth: Vec<usize> = expected()["truth"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
    for t in &truth {
        assert!(doc.selected.contains(t), "{t} missing from {:?}", doc.selected);
    }
    assert_eq!(doc.schema_version, 1);
    assert_eq!(doc.coefficients.len(), 10);
    assert_eq!(doc.path.as_ref().unwrap().lambdas.len(), 100);
    for stage in ["sigma_estimation", "whitening", "path_solve", "thresholding", "total"] {
        assert!(doc.timings.contains_key(stage));
    }
}

#[test]
fn golden_lasso_path_matches_reference_solver() {
    let (out, doc) = fit(&["--method", "lasso", "--select-size", "2"]);
    assert!(out.status.success());
    let doc = doc.unwrap();
    let path = doc.path.unwrap();
    let exp = expected();
    let lambdas = floats(&exp["lambdas"]);
    let objective = floats(&exp["lasso_objective"]);
    for (k, (a, b)) in path.lambdas.iter().zip(&lambdas).enumerate() {
        assert!((a - b).abs() <= 1e-10 * b, "λ[{k}]: {a} vs {b}");
    }
    for (k, (a, b)) in path.objective.iter().zip(&objective).enumerate() {
        assert!((a - b).abs() <= 1e-8 * b.max(1.0), "objective[{k}]: {a} vs {b}");
    }
    for (k, row) in exp["lasso_coefficients"].as_array().unwrap().iter().enumerate() {
        for (a, b) in path.coefficients[k].iter().zip(floats(row)) {
            assert!((a - b).abs() < 1e-5, "β[{k}]: {a} vs {b}");
        }
    }
    assert_eq!(doc.selected, vec![2, 7]);
}

#[test]
fn lasso_and_identity_wlasso_share_the_path() {
    let (_, lasso) = fit(&["--method", "lasso"]);
    let sigma = data("identity.csv");
    let (out, wl) = fit(&["--sigma", sigma.to_str().unwrap()]);
    assert!(out.status.success());
    let (a, b) = (lasso.unwrap().path.unwrap(), wl.unwrap().path.unwrap());
    assert_eq!(a.lambdas, b.lambdas);
    for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
        for (s, t) in u.iter().zip(v) {
            assert!((s - t).abs() < 1e-8);
        }
    }
}

#[test]
fn document_round_trips() {
    let (_, doc) = fit(&[]);
    let doc = doc.unwrap();
    let text = serde_json::to_string(&doc).unwrap();
    let back: ResultDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(back, doc);
}

#[test]
fn mismatched_rows_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let y = dir.path().join("y.csv");
    write_csv(&y, &vec![vec![1.0]; 7]);
    let x = data("x.csv");
    let out = wlasso(&["fit", "--x", x.to_str().unwrap(), "--y", y.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let nan = dir.path().join("nan.csv");
    std::fs::write(&nan, "1,2\nNaN,3\n").unwrap();
    let out = wlasso(&["fit", "--x", nan.to_str().unwrap(), "--y", y.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = wlasso(&["fit", "--x", x.to_str().unwrap(), "--y", data("y.csv").to_str().unwrap(), "--gamma", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn holp_on_duplicated_rows_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows: Vec<Vec<f64>> = (0..4).map(|i| (0..12).map(|j| ((i * 12 + j) as f64 * 0.7).sin()).collect()).collect();
    rows.push(rows[1].clone());
    let (x, y) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    write_csv(&x, &rows);
    write_csv(&y, &(0..5).map(|i| vec![i as f64]).collect::<Vec<_>>());
    let out = wlasso(&["fit", "--method", "holp", "--x", x.to_str().unwrap(), "--y", y.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let doc: ResultDocument = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc.error.unwrap().name, "SingularGram");
}

#[test]
fn ic_check_on_orthogonal_design() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    let rows: Vec<Vec<f64>> = (0..6).map(|i| (0..6).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    write_csv(&x, &rows);
    let out = wlasso(&["ic-check", "--x", x.to_str().unwrap(), "--support", "1,2", "--signs", "-,+"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["raw"]["violated_fraction"].as_f64(), Some(0.0));
    assert_eq!(v["raw"]["complement"], serde_json::json!([3, 4, 5, 6]));
}

#[test]
fn ic_check_fraction_grows_with_eta() {
    let run = |eta: &str| -> Vec<f64> {
        let out = wlasso(&["ic-check", "--seed", "3", "--replications", "3", "--p", "100", "--eta", eta]);
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v["replications"].as_array().unwrap().iter().map(|r| r["raw"].as_f64().unwrap()).collect()
    };
    for (a, b) in run("0").iter().zip(run("0.5")) {
        assert!(b >= *a);
    }
}

#[test]
fn simulate_identity_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = wlasso(&[
        "simulate", "--alphas", "identity", "--p", "60", "--n", "30", "--replications", "2", "--seed", "1",
        "--methods", "wlasso,lasso", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["summary"]["scenario"]["alphas"]["kind"], "identity");
    // two WLasso variants and one Lasso row per replication, plus header
    let csv = std::fs::read_to_string(dir.path().join("replications.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
}

#[test]
fn simulate_requires_seed_and_valid_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(wlasso(&["simulate", "--out", d]).status.code(), Some(2));
    assert_eq!(wlasso(&["simulate", "--seed", "1", "--alphas", "0.9,0.9", "--out", d]).status.code(), Some(2));
    assert_eq!(wlasso(&["simulate", "--seed", "1", "--methods", "ridge", "--out", d]).status.code(), Some(2));
}

#[test]
fn bench_writes_stage_columns() {
    let out = wlasso(&["bench", "--p", "60", "--n", "20", "--grid-count", "20"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,n,grid_count,sigma_estimation,whitening,path_solve,thresholding,total"));
    assert!(lines.next().unwrap().starts_with("60,20,20,"));
}
