use std::path::{Path, PathBuf};
use std::process::Command;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(rel)
}

fn pforge(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pforge"))
        .args(args)
        .env_remove("PF_DAFNY_PATH")
        .env("PATH", "")
        .output()
        .expect("binary runs")
}

fn code(out: &std::process::Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn missing_input_is_a_usage_error() {
    let out = pforge(&["verify", "/nonexistent/prog.dfy"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&pforge(&["verify", "--frobnicate"])), 2);
}

#[test]
fn absent_dafny_is_an_environment_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.dfy");
    std::fs::copy(data("corpus/trivial/program.dfy"), &input).unwrap();
    let out = pforge(&["verify", input.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_corpus_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&pforge(&["bench", dir.path().to_str().unwrap()])), 2);
}

#[test]
fn strip_writes_the_stripped_program() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("s.dfy");
    let out = pforge(&["strip", data("maxsub/annotated.dfy").to_str().unwrap(), "-o", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let got = std::fs::read_to_string(out_path).unwrap();
    assert_eq!(got, std::fs::read_to_string(data("maxsub/stripped.dfy")).unwrap());
}

#[test]
fn bench_replay_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let report = dir.path().join(name);
        let out = pforge(&[
            "bench",
            data("corpus").to_str().unwrap(),
            "--scripted-verifier",
            "--jobs",
            "2",
            "--report",
            report.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        (String::from_utf8(out.stdout).unwrap(), std::fs::read_to_string(report).unwrap())
    };
    let (stdout, first) = run("a.json");
    let (_, second) = run("b.json");
    assert_eq!(first, second);
    assert!(stdout.contains("100% (2/2)"), "{stdout}");
    let report: serde_json::Value = serde_json::from_str(&first).unwrap();
    let tasks = report["tasks"].as_array().unwrap();
    assert_eq!(tasks[0]["id"], "maxsub");
    assert_eq!(tasks[0]["restored"], true);
    assert_eq!(tasks[1]["id"], "trivial");
    assert_eq!(tasks[1]["llm_calls"], 0);
}
