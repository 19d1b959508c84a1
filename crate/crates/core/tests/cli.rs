//! Golden-file tests for the command-line tool. Set `UPDATE_GOLDEN=1` to
//! rewrite the files under `tests/golden/` after an intended schema change.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_met-dgldpc"))
}

fn spec(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../specs")
        .join(name);
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Blanks the wall-clock field so outputs compare byte for byte.
fn normalize(text: &str) -> String {
    text.lines()
        .map(|l| {
            if l.trim_start().starts_with("\"duration_seconds\"") {
                "  \"duration_seconds\": 0".to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn check_golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    let actual = normalize(actual);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &actual).unwrap();
        return;
    }
    let expected =
        std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {name}"));
    assert_eq!(actual, expected, "output differs from {name}");
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn validate_figure_one() {
    let out = run(&["validate", &spec("fig1.json")]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["results"]["length"], 28);
    assert_eq!(v["results"]["dimension"], 8);
    assert_eq!(v["results"]["rate"]["exact"], "2/7");
    assert_eq!(v["spec_digest"].as_str().unwrap().len(), 64);
    check_golden("validate_fig1.json", &stdout(&out));
}

#[test]
fn stability_refuses_punctured_spec() {
    let out = run(&["stability", &spec("fig1.json")]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("punctur"), "{err}");
}

#[test]
fn stability_bound_of_spc_pair() {
    let out = run(&["stability", &spec("ex1_spc3.json"), "--bound"]);
    assert!(out.status.success());
    let v = json(&out);
    let b = v["results"]["bound"]["value"].as_f64().unwrap();
    assert!((b - 0.5).abs() < 1e-6);
    assert_eq!(v["results"]["weight2_disjoint"], false);
    check_golden("stability_ex1_bound.json", &stdout(&out));
}

#[test]
fn stability_at_epsilon() {
    let out = run(&["stability", &spec("ex2_ra_q2.json"), "--epsilon", "0.4"]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((v["results"]["sigma"]["sigma"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(v["results"]["sigma"]["status"], "stable");
    check_golden("stability_ex2_eps.json", &stdout(&out));
    let csv = run(&[
        "stability",
        &spec("ex2_ra_q2.json"),
        "--epsilon",
        "0.4",
        "--format",
        "csv",
    ]);
    check_golden("stability_ex2_eps.csv", &stdout(&csv));
}

#[test]
fn threshold_of_regular_ldpc() {
    let out = run(&["threshold", &spec("ldpc_3_6.json")]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((v["results"]["threshold"].as_f64().unwrap() - 0.4294).abs() < 1e-3);
    check_golden("threshold_ldpc.json", &stdout(&out));
}

#[test]
fn exit_chart_csv() {
    let out = run(&["exit-chart", &spec("ex2_ra_q2.json"), "--epsilon", "0.3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().any(|l| l == "iter,I_EV_1,I_EV_2"));
    assert!(text.contains("# spec_digest: "));
    check_golden("exit_chart_ex2.csv", &text);
}

#[test]
fn inffunc_json() {
    let out = run(&["inffunc", &spec("fig1.json"), "--type", "gamma3"]);
    assert!(out.status.success());
    check_golden("inffunc_gamma3.json", &stdout(&out));
    let missing = run(&["inffunc", &spec("fig1.json"), "--type", "nope"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn simulate_is_reproducible() {
    let args = [
        "simulate",
        &spec("ldpc_3_6.json"),
        "--scale",
        "200",
        "--eps",
        "0.3:0.5:0.1",
        "--trials",
        "20",
        "--seed",
        "5",
    ];
    let a = run(&args);
    assert!(a.status.success());
    let mut with_jobs = args.to_vec();
    with_jobs.extend(["--jobs", "1"]);
    let b = run(&with_jobs);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.lines().any(|l| l == "eps,ber,bler,ci_lo,ci_hi,trials"));
    check_golden("simulate_ldpc.csv", &text);
}

#[test]
fn simulate_labels_out_of_scope_specs() {
    let out = run(&[
        "simulate",
        &spec("fig1.json"),
        "--scale",
        "10",
        "--eps",
        "0.1",
        "--trials",
        "4",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    assert_eq!(
        json(&out)["results"]["prediction"],
        "no stability prediction"
    );
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("met-dgldpc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("t.json");
    let out = run(&[
        "threshold",
        &spec("ldpc_3_6.json"),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"threshold\""));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn error_exit_codes() {
    let dir = std::env::temp_dir().join(format!("met-dgldpc-codes-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p.to_string_lossy().into_owned()
    };
    let unbalanced = write(
        "unbalanced.json",
        r#"{"edge_types":1,
            "vn_types":[{"name":"v","generator":[[1,1]],"socket_types":[1,1],"count":3}],
            "cn_types":[{"name":"c","parity_check":[[1,1,1]],"socket_types":[1,1,1],"count":1}]}"#,
    );
    let out = run(&["validate", &unbalanced]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("VN 6 / CN 3"));

    let ones = vec!["1"; 25].join(",");
    let types = vec!["1"; 25].join(",");
    let big = write(
        "big.json",
        &format!(
            r#"{{"edge_types":1,
                "vn_types":[{{"name":"v","generator":[[1]],"socket_types":[1],"count":25}}],
                "cn_types":[{{"name":"c","parity_check":[[{ones}]],"socket_types":[{types}],"count":1}}]}}"#
        ),
    );
    assert_eq!(run(&["validate", &big]).status.code(), Some(2));
    assert_eq!(
        run(&["validate", "/nonexistent/spec.json"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["validate", &write("bad.json", "{")]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    std::fs::remove_dir_all(&dir).unwrap();
}
