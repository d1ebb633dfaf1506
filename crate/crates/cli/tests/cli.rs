use std::path::PathBuf;
use std::process::{Command, Output};

fn qrfnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrfnet")).args(args).output().expect("binary runs")
}

fn scenario(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "scenarios", &format!("{name}.qrf")].iter().collect();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn lists_examples() {
    let o = qrfnet(&["examples", "--list"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).lines().collect::<Vec<_>>(),
        ["pair", "chain", "paradox", "network_no_interact", "network_with_G", "great_grand"]
    );
}

#[test]
fn emits_bundled_source() {
    let o = qrfnet(&["examples", "--emit", "paradox"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), std::fs::read_to_string(scenario("paradox")).unwrap());
    assert_eq!(qrfnet(&["examples", "--emit", "nope"]).status.code(), Some(2));
}

#[test]
fn paradox_csv_sums_to_one() {
    let o = qrfnet(&["run", &scenario("paradox"), "--csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("L,probability"));
    let total: f64 = lines.map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn csv_query_selection() {
    let o = qrfnet(&["run", &scenario("network_with_G"), "--csv", "--query", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("outcome,L,probability,expected,pass\n"));
    assert_eq!(qrfnet(&["run", &scenario("paradox"), "--csv", "--query", "9"]).status.code(), Some(2));
}

#[test]
fn grand_frame_check_passes() {
    let o = qrfnet(&["check", &scenario("network_with_G"), "--set", "G,F,F2,S,S2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: PASS"));
    let o = qrfnet(&["check", &scenario("network_with_G"), "--set", "G,F,F2,S,S2", "--expect", "pass"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn expectation_mismatch_exits_one() {
    let o = qrfnet(&["check", &scenario("paradox"), "--set", "F,F2,S,S2", "--expect", "pass"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("verdict: FAIL"));
    let o = qrfnet(&["check", &scenario("paradox"), "--set", "F,F2,S,S2", "--expect", "fail"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn check_json_report() {
    let o = qrfnet(&["check", &scenario("network_with_G"), "--set", "G,F,F2,S,S2", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["records"].as_array().unwrap().len(), 4);
    for r in v["records"].as_array().unwrap() {
        assert_eq!(r["conditional_total"].as_object().unwrap().len(), 1);
    }
}

#[test]
fn bundled_names_work_without_a_file() {
    let o = qrfnet(&["check", "network_with_G.qrf", "--set", "G,F,F2,S,S2"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn json_is_byte_identical() {
    let a = qrfnet(&["run", &scenario("great_grand"), "--json"]);
    let b = qrfnet(&["run", &scenario("great_grand"), "--json"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["schema"], 1);
}

#[test]
fn writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let o = qrfnet(&["run", &scenario("paradox"), "--csv", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(path).unwrap().starts_with("L,probability"));
}

#[test]
fn parse_errors_exit_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.qrf");
    std::fs::write(&path, "particle F\nparticle S\nprepare F X {0: 1}\n").unwrap();
    let o = qrfnet(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 3") && err.contains("'X'"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(qrfnet(&["run"]).status.code(), Some(2));
    assert_eq!(qrfnet(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(qrfnet(&["check", &scenario("paradox"), "--set", "F,Q"]).status.code(), Some(2));
    assert_eq!(qrfnet(&["run", "/no/such/file.qrf"]).status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("leak.qrf");
    std::fs::write(&path, "particle A\nparticle B\ninteract A B [(0,0)->(0,1): 1]\n").unwrap();
    let o = qrfnet(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("event 0"));
}

#[test]
fn validate_unitary_reports_cross_total() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.qrf");
    std::fs::write(&path, "particle A\nparticle B\nunitary good = swap -1..1\nunitary bad = [(0,0)->(0,1): 1; (0,1)->(0,0): 1]\n").unwrap();
    let o = qrfnet(&["validate-unitary", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("good: ok"));
    assert!(text.contains("bad: INVALID"));
    assert!(text.contains("maps total 1 to total 0"));
    let o = qrfnet(&["validate-unitary", &scenario("paradox")]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn transform_prints_before_and_after() {
    let o = qrfnet(&["transform", &scenario("network_with_G"), "--coords", "network", "--at", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("(G,F,F2,S,S2) -> (LA,LB,LR,LC,LC')"));
    assert!(text.contains("before:") && text.contains("after:"));
    let o = qrfnet(&["transform", &scenario("chain"), "--coords", "network"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qrfnet(&["transform", &scenario("pair"), "--coords", "pair", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kind"], "transform");
    assert_eq!(v["matrix"], serde_json::json!([[1, 1], [0, 1]]));
}

#[test]
fn sampling_mode_is_reproducible() {
    let args = ["run", &scenario("paradox"), "--sample", "500", "--seed", "3"];
    let a = qrfnet(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, qrfnet(&args).stdout);
    let text = stdout(&a);
    assert!(text.starts_with("outcome,count\n"));
    let total: usize = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 500);
}
