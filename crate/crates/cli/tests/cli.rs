use std::path::Path;
use std::process::{Command, Output};

fn zolo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zolo-svd"))
        .args(args)
        .env_remove("POLAR_SVD_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json_records(path: &Path) -> Vec<serde_json::Value> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    v["records"].as_array().unwrap().clone()
}

#[test]
fn choose_r_ends_at_order_eight_with_two_passes() {
    let out = zolo(&["choose-r", "--kappa", "1e16", "--r-max", "8"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "schema_version,kappa,r,predicted_iters,chosen");
    assert_eq!(text.lines().last().unwrap(), "1,1e16,8,2,true");
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn svd_of_moderately_conditioned_input_takes_three_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("svd.json");
    let out = zolo(&[
        "svd", "--synthetic", "200,9.06e3,1", "--method", "zolo", "--r", "fixed:3",
        "--format", "json", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let recs = json_records(&path);
    assert_eq!(recs.len(), 1);
    let rec = &recs[0];
    assert_eq!(rec["pd_iters"], 3);
    assert_eq!(rec["r"], 3);
    assert_eq!(rec["bound_source"], "exact");
    for key in ["res", "orth_l", "orth_r", "flops_mults", "flops_adds", "timings"] {
        assert!(!rec[key].is_null(), "missing {key}");
    }
    assert!(rec["res"].as_f64().unwrap() <= 1e-13);
}

#[test]
fn pd_of_orthogonal_input_takes_one_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pd.json");
    let out = zolo(&[
        "pd", "--synthetic", "100,1,1", "--method", "qdwh", "--format", "json", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let rec = &json_records(&path)[0];
    assert_eq!(rec["iters"], 1);
    assert!(rec["res"].as_f64().unwrap() <= 1e-14);
}

#[test]
fn estimated_bounds_are_labelled() {
    let out = zolo(&["pd", "--synthetic", "60,100,2", "--estimate-bounds", "--no-timings"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "bound_source").unwrap();
    assert_eq!(row[col], "estimated");
}

#[test]
fn usage_errors_exit_64() {
    for args in [
        &["pd", "--synthetic", "10,2,1", "--input", "a.mtx"][..],
        &["pd", "--synthetic", "10,2,1", "--alpha", "1"][..],
        &["pd", "--synthetic", "10,2,1", "--alpha", "1", "--beta", "0.1", "--estimate-bounds"][..],
        &["svd"][..],
        &["svd", "--synthetic", "10,2,1", "--r", "fixed:x"][..],
        &["svd", "--synthetic", "10,2,1", "--method", "lanczos"][..],
        &["bogus"][..],
    ] {
        assert_eq!(code(&zolo(args)), 64, "{args:?}");
    }
    assert_eq!(code(&zolo(&["--help"])), 0);
}

#[test]
fn domain_and_parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mtx");
    std::fs::write(&bad, "%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n").unwrap();
    let out = zolo(&["svd", "--input", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    assert_eq!(code(&zolo(&["svd", "--input", "/no/such/file.mtx"])), 2);
    assert_eq!(code(&zolo(&["svd", "--synthetic", "10,0.5,1"])), 2);
    assert_eq!(code(&zolo(&["choose-r", "--kappa", "0.5"])), 2);
    assert_eq!(code(&zolo(&["svd", "--synthetic", "10,2,1", "--r", "fixed:9"])), 2);
    assert_eq!(code(&zolo(&["svd", "--synthetic", "10,2,1", "--workers", "1", "--r", "fixed:3"])), 2);
}

#[test]
fn matrix_market_input_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = dir.path().join("small.mtx");
    std::fs::write(
        &mtx,
        "%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 4\n2 1 1\n2 2 3\n3 3 2\n",
    )
    .unwrap();
    let out = zolo(&["svd", "--input", mtx.to_str().unwrap(), "--no-timings"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.lines().nth(1).unwrap().starts_with("1,small,3,3,,"));
}

#[test]
fn non_convergence_exits_3_and_writes_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    // A threshold far below roundoff can never be met.
    let out = zolo(&[
        "pd", "--synthetic", "30,10,1", "--method", "qdwh", "--tol", "1e-300", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    let log = std::fs::read_to_string(&path).unwrap();
    assert!(log.starts_with("schema_version,index,branch,ell_before,ell_after,step_delta,qr_fallbacks,seconds"));
    assert_eq!(log.lines().count(), 1 + 12);
}

#[test]
fn identical_invocations_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = zolo(&[
            "bench-accuracy", "--ns", "40", "--kappas", "1e3,1e9", "--workers", "8", "--nb", "16",
            "--no-timings", "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(!text.contains("seconds"));
}

#[test]
fn bench_iters_reports_predictions() {
    let out = zolo(&["bench-iters", "--n", "60", "--kappas", "1e3", "--configs", "qdwh,zolo-r3", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let recs = v["records"].as_array().unwrap();
    assert_eq!(recs.len(), 2);
    for rec in recs {
        assert_eq!(rec["converged"], true);
        assert!(rec["passes"].as_u64().unwrap() >= rec["predicted"].as_u64().unwrap());
        assert_eq!(rec["bound_source"], "exact");
    }
}

#[test]
fn bench_structured_qr_counts_flops() {
    let out = zolo(&["bench-structured-qr", "--shapes", "128x128", "--shifts", "1", "--nb", "16", "--no-timings"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let ratio: f64 = row[header.iter().position(|h| *h == "mult_ratio").unwrap()].parse().unwrap();
    assert!(ratio < 1.0);
}
