use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gsexp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsexp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn corpus_problem(dir: &Path, name: &str) -> PathBuf {
    let text = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("corpus")
            .join(format!("{name}.json")),
    )
    .unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let p = dir.join(format!("{name}.json"));
    std::fs::write(&p, v["problem"].to_string()).unwrap();
    p
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn without_wall_time(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_time_seconds");
    v
}

#[test]
fn classify_example_i() {
    let d = tempfile::tempdir().unwrap();
    let o = gsexp(&["classify", s(&corpus_problem(d.path(), "example_i"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("verdict: martingale\n"), "{}", stdout(&o));
}

#[test]
fn classify_example_ii() {
    let d = tempfile::tempdir().unwrap();
    let o = gsexp(&["classify", s(&corpus_problem(d.path(), "example_ii"))]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("verdict: uniformly_integrable_martingale\n"));
}

#[test]
fn classify_undecidable_names_the_condition() {
    let d = tempfile::tempdir().unwrap();
    let o = gsexp(&["classify", s(&corpus_problem(d.path(), "undecidable"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("(x − p)·b²/σ² ∈ L¹_loc"), "{}", stderr(&o));
    assert!(stderr(&o).contains("inconclusive"));
}

#[test]
fn invalid_files_list_every_issue() {
    let d = tempfile::tempdir().unwrap();
    let p = write(
        d.path(),
        "bad.json",
        r#"{"interval": {"left": 1, "right": 0}, "x0": 5, "mu": "1 +", "sigma": "1"}"#,
    );
    let o = gsexp(&["classify", s(&p)]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("b: missing"), "{err}");
    let p = write(
        d.path(),
        "bad2.json",
        r#"{"interval": {"left": 1, "right": 0}, "x0": 5, "mu": "1 +", "sigma": "1", "b": "x^"}"#,
    );
    let err = stderr(&gsexp(&["classify", s(&p)]));
    assert!(
        err.contains("mu:") && err.contains("b:") && err.contains("interval"),
        "{err}"
    );
    assert_eq!(code(&gsexp(&["classify", "/nonexistent/problem.json"])), 1);
}

#[test]
fn classify_report_is_canonical_and_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let p = corpus_problem(d.path(), "bessel3");
    let (r1, r2) = (d.path().join("r1.json"), d.path().join("r2.json"));
    assert_eq!(code(&gsexp(&["classify", s(&p), "--report", s(&r1), "--quiet"])), 0);
    assert_eq!(code(&gsexp(&["--report", s(&r2), "classify", s(&p)])), 0);
    let text = std::fs::read_to_string(&r1).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let mut again = serde_json::to_string_pretty(&v).unwrap();
    again.push('\n');
    assert_eq!(again, text);
    assert_eq!(v["classification"]["level"], "strict_local_martingale");
    assert_eq!(without_wall_time(&r1), without_wall_time(&r2));
}

#[test]
fn quiet_classify_prints_nothing() {
    let d = tempfile::tempdir().unwrap();
    let o = gsexp(&["--quiet", "classify", s(&corpus_problem(d.path(), "example_i"))]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
}

#[test]
fn simulate_example_i_checks_out() {
    let d = tempfile::tempdir().unwrap();
    let p = corpus_problem(d.path(), "example_i");
    let o = gsexp(&[
        "simulate",
        s(&p),
        "--paths",
        "100000",
        "--dt",
        "1e-4",
        "--horizon",
        "1",
        "--seed",
        "42",
        "--times",
        "1",
        "--check",
    ]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("consistent_with_martingale"));
}

#[test]
fn simulate_bessel_records_the_deficit() {
    let d = tempfile::tempdir().unwrap();
    let p = corpus_problem(d.path(), "bessel3");
    let r = d.path().join("r.json");
    let o = gsexp(&["simulate", s(&p), "--check", "--report", s(&r)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = without_wall_time(&r);
    assert_eq!(v["mc"]["estimates"][0]["outcome"], "mean_deficit");
    assert_eq!(v["check"]["contradiction"], false);
    assert!(v["mc"]["text"].as_str().unwrap().starts_with("# spec_hash "));
}

#[test]
fn simulate_contradiction_exits_3() {
    // Lognormal Z with σ = 5: the sample mean sits far below 1 and the test
    // rejects, against a martingale verdict.
    let d = tempfile::tempdir().unwrap();
    let p = write(
        d.path(),
        "heavy.json",
        r#"{"interval": {"left": "-inf", "right": "+inf"}, "x0": 0, "mu": "0", "sigma": "1", "b": "5"}"#,
    );
    let o = gsexp(&["simulate", s(&p), "--check", "--paths", "2000", "--dt", "1e-2"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("contradiction"));
}

#[test]
fn simulate_rejects_bad_flags() {
    let d = tempfile::tempdir().unwrap();
    let p = corpus_problem(d.path(), "example_i");
    assert_eq!(code(&gsexp(&["simulate", s(&p), "--dt", "0"])), 1);
    assert_eq!(code(&gsexp(&["simulate", s(&p), "--paths", "many"])), 1);
    assert_eq!(code(&gsexp(&["simulate", s(&p), "--times", "2", "--horizon", "1"])), 1);
    assert_eq!(code(&gsexp(&["simulate", s(&p), "--no-such-flag"])), 1);
    assert_eq!(code(&gsexp(&["--eps-cls", "0", "classify", s(&p)])), 1);
}

#[test]
fn simulate_is_independent_of_threads() {
    let d = tempfile::tempdir().unwrap();
    let p = corpus_problem(d.path(), "not_local");
    let (r1, r4) = (d.path().join("r1.json"), d.path().join("r4.json"));
    for (r, t) in [(&r1, "1"), (&r4, "4")] {
        let o = gsexp(&[
            "simulate",
            s(&p),
            "--paths",
            "3000",
            "--times",
            "0.5,1",
            "--threads",
            t,
            "--report",
            s(r),
        ]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(without_wall_time(&r1), without_wall_time(&r4));
}

#[test]
fn file_settings_yield_to_flags() {
    let d = tempfile::tempdir().unwrap();
    let p = write(
        d.path(),
        "p.json",
        r#"{"interval": {"left": "-inf", "right": "+inf"}, "x0": 0, "mu": "0", "sigma": "1", "b": "1",
            "simulation": {"paths": 50, "dt": 0.01, "horizon": 2, "seed": 3}}"#,
    );
    let r = d.path().join("r.json");
    assert_eq!(
        code(&gsexp(&[
            "simulate",
            s(&p),
            "--paths",
            "70",
            "--report",
            s(&r),
            "--quiet"
        ])),
        0
    );
    let v = without_wall_time(&r);
    assert_eq!(v["simulation"]["paths"], 70);
    assert_eq!(v["simulation"]["horizon"], 2.0);
    assert_eq!(v["simulation"]["seed"], 3);
    assert_eq!(v["simulation"]["times"], serde_json::json!([2.0]));
}

#[test]
fn selftest_passes() {
    let o = gsexp(&["selftest"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let table = stdout(&o);
    assert_eq!(table.lines().count(), 8);
    assert!(table.lines().skip(1).all(|l| l.ends_with("pass")));
}

#[test]
fn selftest_negative_control_and_empty_corpus() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&gsexp(&["selftest", "--corpus", s(d.path())])), 1);
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/example_i.json")).unwrap();
    write(
        d.path(),
        "flipped.json",
        &text.replace(
            "\"expected\": \"martingale\"",
            "\"expected\": \"strict_local_martingale\"",
        ),
    );
    let o = gsexp(&["selftest", "--corpus", s(d.path()), "--paths", "2000"]);
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("FAIL"));
}
