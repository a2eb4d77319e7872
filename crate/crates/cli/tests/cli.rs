use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cbst::bench::{read_csv, read_json, CSV_HEADER};
use cbst::model::{read_comparison_csv, COMPARISON_HEADER};
use cbst::Variant;

fn cbst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbst")).args(args).output().expect("run cbst")
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

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn model_eval_perfect_scaling() {
    let o = cbst(&["model", "--eval", "--P", "32", "--c", "0", "--alpha", "1", "--ws-ratio", "0", "--wc-ratio", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 32.0);
}

#[test]
fn model_eval_with_overheads() {
    let o = cbst(&["model", "--eval", "--P", "16", "--c", "0.5", "--alpha", "0.5", "--ws-ratio", "0.25", "--wc-ratio", "0.25"]);
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 8.0 / 3.0).abs() < 1e-12);
}

#[test]
fn model_rejects_contention_out_of_range() {
    let o = cbst(&["model", "--eval", "--P", "4", "--c", "1.5", "--alpha", "1"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("c out of range"), "{}", stderr(&o));
}

#[test]
fn model_alpha_curve() {
    let o = cbst(&["model", "--curve-alpha", "--h", "2", "--asymptote", "0.8", "--t-max", "10", "--step", "1"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "t,alpha");
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[1], "0,0");
    let (t, a) = lines[2].split_once(',').unwrap();
    assert_eq!(t, "1");
    assert!((a.parse::<f64>().unwrap() - 0.4).abs() < 1e-15);
}

#[test]
fn model_validate_lists_violations() {
    let ok = cbst(&["model", "--validate", "--P", "8", "--c", "0.1", "--alpha", "0.2", "--beta", "0.5", "--w-snapshot", "4", "--w-control", "1"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let bad = cbst(&["model", "--validate", "--c", "-0.5", "--beta", "1", "--w-snapshot", "0.5"]);
    assert_eq!(code(&bad), 1);
    let err = stderr(&bad);
    assert!(err.contains("c out of range") && err.contains("beta below floor"), "{err}");
}

#[test]
fn model_needs_an_action() {
    assert_eq!(code(&cbst(&["model", "--P", "4"])), 2);
}

#[test]
fn bench_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = cbst(&[
        "bench", "--variant", "fem", "--threads", "1,2,4", "--duration-ms", "40", "--warmup-ms", "0", "--key-range", "1000", "--mix",
        "9,1,90", "--seed", "42", "--repeats", "2", "--format", "csv", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let recs = read_csv(text.as_bytes()).unwrap();
    assert_eq!(recs.len(), 6);
    assert_eq!(recs.iter().map(|r| r.threads).collect::<Vec<_>>(), [1, 1, 2, 2, 4, 4]);
    assert!(recs.iter().all(|r| r.variant == Variant::FlagEdgeMark && r.key_range == 1000 && r.ops_completed > 0));
    assert!(recs.iter().filter(|r| r.threads == 1).all(|r| r.retries == 0));
    // human summary goes to stdout when the data goes to a file
    assert!(stdout(&o).contains("median ops/s"));
}

#[test]
fn bench_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = cbst(&["bench", "--variant", "coarse,tn", "--duration-ms", "30", "--warmup-ms", "0", "--key-range", "100", "--repeats", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let recs = read_json(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(recs.iter().map(|r| r.variant).collect::<Vec<_>>(), [Variant::Coarse, Variant::TicketNode]);
}

#[test]
fn bench_seq_multi_thread_is_usage_error() {
    let o = cbst(&["bench", "--variant", "seq", "--threads", "4", "--duration-ms", "10"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("single-threaded"));
}

#[test]
fn bench_bad_flags_are_usage_errors() {
    assert_eq!(code(&cbst(&["bench", "--variant", "avl"])), 2);
    assert_eq!(code(&cbst(&["bench", "--mix", "10,10,10"])), 2);
    assert_eq!(code(&cbst(&["bench", "--threads", "0", "--duration-ms", "10"])), 2);
    assert_eq!(code(&cbst(&["bench", "--format", "xml"])), 2);
}

#[test]
fn bench_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let recs = dir.path().join("r.csv");
    let table = dir.path().join("cmp.csv");
    let o = cbst(&["bench", "--variant", "fem", "--threads", "1,2", "--duration-ms", "30", "--warmup-ms", "0", "--key-range", "1000", "--repeats", "1", "--out", s(&recs)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = cbst(&["model", "--compare", "--records", s(&recs), "--out", s(&table)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&table).unwrap();
    assert_eq!(text.lines().next().unwrap(), COMPARISON_HEADER);
    let rows = read_comparison_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].measured_speedup, 1.0);
    assert_eq!(rows[1].predicted_speedup, 2.0 * (1.0 - rows[1].c_fitted));
}

#[test]
fn compare_without_baseline_fails() {
    let dir = tempfile::tempdir().unwrap();
    let recs = dir.path().join("r.csv");
    let o = cbst(&["bench", "--variant", "fe", "--threads", "2", "--duration-ms", "20", "--warmup-ms", "0", "--repeats", "1", "--out", s(&recs)]);
    assert_eq!(code(&o), 0);
    let o = cbst(&["model", "--compare", "--records", s(&recs)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("baseline"), "{}", stderr(&o));
}

#[test]
fn check_linearizability_passes() {
    let o = cbst(&["check", "--mode", "linearizability", "--variant", "fem", "--threads", "3", "--ops", "5", "--iterations", "200", "--key-range", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn check_linearizability_histories_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = cbst(&["check", "--mode", "linearizability", "--variant", "tn", "--threads", "1", "--ops", "12", "--iterations", "20", "--clock", "logical", "--seed", "5", "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read_to_string(out).unwrap()
    };
    let a = run("a.hist");
    assert_eq!(a, run("b.hist"));
    assert_eq!(a.lines().filter(|l| l.contains("INVOKE")).count(), 240);
}

#[test]
fn check_oversized_linearizability_is_usage_error() {
    assert_eq!(code(&cbst(&["check", "--mode", "linearizability", "--threads", "5", "--ops", "5"])), 2);
}

#[test]
fn check_invariants_short_stress() {
    let o = cbst(&["check", "--mode", "invariants", "--variant", "fem", "--threads", "8", "--duration-ms", "300", "--mix", "20,10,70"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("order=true shape=true sentinels=true balance=true"));
}

#[test]
fn replay_fixtures() {
    let bad = cbst(&["check", "--mode", "replay", "--history", s(&fixture("non_linearizable.hist"))]);
    assert_eq!(code(&bad), 1);
    assert!(stderr(&bad).contains("not linearizable"));
    let good = cbst(&["check", "--mode", "replay", "--history", s(&fixture("linearizable.hist"))]);
    assert_eq!(code(&good), 0, "{}", stderr(&good));
}

#[test]
fn replay_oversized_or_malformed_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big.hist");
    let text: String = (0..21).map(|i| format!("0 {i} INVOKE SEARCH 1 {}\n0 {i} RESPOND SEARCH 1 false {}\n", 2 * i, 2 * i + 1)).collect();
    std::fs::write(&big, text).unwrap();
    assert_eq!(code(&cbst(&["check", "--mode", "replay", "--history", s(&big)])), 2);
    assert_eq!(code(&cbst(&["check", "--mode", "replay", "--history", s(&big), "--bound", "30"])), 0);

    let junk = dir.path().join("junk.hist");
    std::fs::write(&junk, "0 0 INVOKE FROB 1 0\n").unwrap();
    assert_eq!(code(&cbst(&["check", "--mode", "replay", "--history", s(&junk)])), 2);
    assert_eq!(code(&cbst(&["check", "--mode", "replay"])), 2);
}
