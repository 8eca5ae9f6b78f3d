use std::fs;
use std::process::{Command, Output};

fn trustkey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trustkey"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn bound_333() {
    let out = trustkey(&["bound", "--n", "333", "--d", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "7\n");
}

#[test]
fn levels_333() {
    let out = trustkey(&["levels", "--n", "333", "--d", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "8\n");
}

#[test]
fn domain_errors_exit_one() {
    let out = trustkey(&["bound", "--n", "0", "--d", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("node count"));
    assert!(out.stdout.is_empty());

    let out = trustkey(&["levels", "--n", "5", "--d", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fanout"));
}

#[test]
fn usage_errors_exit_two() {
    let out = trustkey(&["bound", "--n", "3", "--d", "2", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--bogus"));

    assert_eq!(trustkey(&["bound", "--n", "x", "--d", "2"]).status.code(), Some(2));
    assert_eq!(trustkey(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(trustkey(&["verify", "--quick", "--full"]).status.code(), Some(2));
}

#[test]
fn coverage_csv_is_clean() {
    let out = trustkey(&["coverage", "--n", "333", "--d", "2", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout(&out),
        "time_unit,nodes_covered\n0,1\n1,3\n2,7\n3,15\n4,31\n5,63\n6,127\n7,255\n8,333\n"
    );
    assert!(out.stderr.is_empty());
}

#[test]
fn coverage_ascii() {
    let out = trustkey(&["coverage", "--n", "7", "--d", "2", "--format", "ascii"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3);
    assert!(text.ends_with("7\n") && !text.ends_with("\n\n"));
}

#[test]
fn simulate_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |dir: &str| {
        vec![
            "simulate".to_owned(),
            "--n".into(),
            "100".into(),
            "--d".into(),
            "3".into(),
            "--duration".into(),
            "30".into(),
            "--join-rate".into(),
            "1.2".into(),
            "--leave-rate".into(),
            "1.0".into(),
            "--rejoin-pool".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            dir.to_owned(),
        ]
    };
    for dir in [&a, &b] {
        let argv = args(dir.path().to_str().unwrap());
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        let out = trustkey(&argv);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(stdout(&out).lines().count(), 1);
    }
    for name in ["metrics.csv", "coverage.csv"] {
        let left = fs::read(a.path().join(name)).unwrap();
        let right = fs::read(b.path().join(name)).unwrap();
        assert_eq!(left, right, "{name}");
        assert!(left.ends_with(b"\n") && !left.ends_with(b"\n\n"));
    }
    let metrics = fs::read_to_string(a.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with(
        "event_time,trigger,peer_id,key_version,tree_size,height,chart_time_full_coverage,completion_time,messages,swaps\n"
    ));
}

#[test]
fn simulate_churn_free_333() {
    let dir = tempfile::tempdir().unwrap();
    let out = trustkey(&["simulate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("rekeys=1 "));
    let coverage = fs::read_to_string(dir.path().join("coverage.csv")).unwrap();
    assert!(coverage.ends_with("8,333\n"));
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().nth(1), Some("0,manual,,1,333,8,8,11,334,0"));
}

#[test]
fn simulate_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = trustkey(&[
        "simulate",
        "--time-lo",
        "10",
        "--time-hi",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("metrics.csv").exists());
}

#[test]
fn verify_quick() {
    let out = trustkey(&["verify", "--quick", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).ends_with("7 passed, 0 failed\n"));
}
