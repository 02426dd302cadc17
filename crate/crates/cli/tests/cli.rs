//! End-to-end command tests driving the compiled binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn chp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn data(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name);
    p.to_string_lossy().to_string()
}

#[test]
fn price_builtin3_matches_reference_table() {
    let out = chp(&["price", "--builtin", "3", "--method", "both"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("primal cost: 4815.00"), "{text}");
    assert!(text.contains("chp price [30.09]"), "{text}");
    assert!(text.contains("mchp price [30.13]"), "{text}");
    assert!(text.contains("403.60"), "{text}");
    assert!(text.contains("4.60"), "{text}");
}

#[test]
fn price_reports_are_deterministic() {
    let a = stdout(&chp(&["price", "--builtin", "5", "--format", "structured"]));
    let b = stdout(&chp(&["price", "--builtin", "5", "--format", "structured"]));
    assert_eq!(a, b);
    assert!(a.contains("\"display\": \"20.20\""), "{a}");
}

#[test]
fn price_from_scenario_file() {
    let out = chp(&["price", "--scenario", &data("ex8.json"), "--method", "both"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("chp price [15.10, 10.00]"), "{text}");
    assert!(text.contains("FTR holders"), "{text}");
    assert!(text.contains("mchp price [15.13, 15.13]"), "{text}");
    assert!(text.contains("congestion rent 0.00"), "{text}");
}

#[test]
fn malformed_scenario_exits_2() {
    let out = chp(&["price", "--scenario", &data("malformed.json")]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("g_min") || err.contains("schema"), "{err}");
}

#[test]
fn infeasible_scenario_exits_3() {
    let out = chp(&["price", "--scenario", &data("infeasible.json")]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn verify_prints_verdicts_and_certificates() {
    let out = chp(&[
        "verify",
        "--builtin",
        "3",
        "--method",
        "chp",
        "--price",
        "30.09375",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("true"), "{text}");
    assert!(text.contains("unit1"), "{text}");
    let out = chp(&[
        "verify",
        "--builtin",
        "3",
        "--method",
        "chp",
        "--price",
        "29.00",
    ]);
    assert!(stdout(&out).starts_with("false"));
    let out = chp(&[
        "verify",
        "--builtin",
        "9",
        "--method",
        "mchp",
        "--price",
        "32.67",
        "10.00",
    ]);
    assert!(stdout(&out).starts_with("true"));
}

#[test]
fn reproduce_single_example_passes() {
    let out = chp(&["reproduce", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(
        text.lines().all(|l| l.is_empty() || l.starts_with("ok")),
        "{text}"
    );
    assert!(text.contains("ex3 chp total uplift"), "{text}");
}

#[test]
fn export_round_trips_through_price() {
    let json = stdout(&chp(&["export", "--builtin", "7"]));
    let dir = std::env::temp_dir().join("chp-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ex7.json");
    std::fs::write(&path, &json).unwrap();
    let out = chp(&[
        "price",
        "--scenario",
        path.to_str().unwrap(),
        "--method",
        "chp",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("chp price [80.00]"));
}

#[test]
fn oracle_flag_cross_checks() {
    let out = chp(&["price", "--builtin", "6", "--oracle"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle:"));
}
