use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coordfree"))
}

fn root(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn run(args: &[&str]) -> (i32, String) {
    let Output { status, stdout, .. } = bin().args(args).output().expect("spawn");
    (status.code().unwrap(), String::from_utf8(stdout).unwrap())
}

fn scenario(name: &str) -> String {
    root("scenarios").join(name).to_string_lossy().into_owned()
}

#[test]
fn classify_tc_all_hold() {
    let tc = root("corpus/tc.dl");
    let (code, out) = run(&["classify", tc.to_str().unwrap(), "--bounds", "2,2,1"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("program_class=positive"));
    assert_eq!(out.matches("result=holds").count(), 4);
}

#[test]
fn classify_one_edge_query_with_expect_refuted() {
    let (code, out) = run(&["classify", "--builtin", "remark33", "--expect-refuted"]);
    assert_eq!(code, 0);
    assert!(out.contains("program_class=stratified"));
    assert!(out.contains("class=adom-monotone result=refuted"));
    let (code, _) = run(&["classify", "--builtin", "remark33"]);
    assert_eq!(code, 1);
}

#[test]
fn classify_asym() {
    let (code, out) = run(&["classify", "--builtin", "asym", "--bounds", "3,3,1"]);
    assert_eq!(code, 1);
    assert!(out.contains("program_class=semi-positive"));
    assert!(out.contains("class=monotone result=refuted"));
    assert!(out.contains("class=adom-monotone result=holds"));
}

#[test]
fn parse_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.dl");
    std::fs::write(&p, "t(X) :- e(X,Y)\n").unwrap();
    let out = bin()
        .args(["classify", p.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2:1: expected `.`"));
    let (code, _) = run(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn eval_builtin() {
    let (code, out) = run(&[
        "eval",
        "--builtin",
        "winmove",
        "--facts",
        "move(a,b). move(b,c).",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, "won(b).\n");
}

#[test]
fn run_winmove_scenario_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    let (code, out) = run(&[
        "run",
        &scenario("winmove_compatible.json"),
        "--trace-out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("output:\n  won(b)\n"));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("step=1 node="));
    assert!(text
        .lines()
        .last()
        .unwrap()
        .starts_with("result converged=true steps="));

    // another seed: same output, different trace
    let trace2 = dir.path().join("trace2.txt");
    let (code, out2) = run(&[
        "run",
        &scenario("winmove_compatible.json"),
        "--seed",
        "11",
        "--trace-out",
        trace2.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out2.contains("output:\n  won(b)\n"));
    assert_ne!(text, std::fs::read_to_string(&trace2).unwrap());
}

#[test]
fn run_heartbeat_only_scenario() {
    let (code, out) = run(&["run", &scenario("winmove_heartbeat.json")]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("won(b)"));
    assert!(out.contains("deliveries=0"));
}

#[test]
fn run_file_references() {
    let (code, out) = run(&["run", &scenario("tc_hash.json")]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("t(a,d)"));
    let (code, _) = run(&["run", &scenario("asym_oracle.json")]);
    assert_eq!(code, 0);
}

#[test]
fn exploring_an_unsound_pairing_finds_divergence() {
    let (code, out) = run(&["run", &scenario("path_query_explore.json")]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("agree=false"));
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.json");
    let text = std::fs::read_to_string(scenario("winmove_compatible.json"))
        .unwrap()
        .replace(r#""model": "N2""#, r#""model": "N1""#);
    std::fs::write(&p, text).unwrap();
    let out = bin().args(["run", p.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_indist() {
    let (code, out) = run(&[
        "experiment",
        "indist",
        "--protocol",
        "t_adom",
        "--query",
        "remark33",
        "--facts",
        "e(a,b).",
        "--fact",
        "e(b,c)",
        "--expect-refuted",
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("states_equal=true"));
    assert!(out.contains("spurious_output=answer()"));
    let (code, out) = run(&[
        "experiment",
        "indist",
        "--protocol",
        "t_repl",
        "--query",
        "remark33",
        "--facts",
        "e(a,b).",
        "--fact",
        "e(c,c)",
        "--expect-refuted",
    ]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn experiment_cf_check_and_explore() {
    let (code, out) = run(&[
        "experiment",
        "cf-check",
        "--protocol",
        "t_repl",
        "--query",
        "winmove",
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("witnessed=true"));
    let (code, out) = run(&[
        "experiment",
        "explore",
        "--protocol",
        "t_mono",
        "--query",
        "tc",
        "--depth",
        "4",
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("agree=true"));
}
