//! Authors the replay fixture for the maximum-subarray task: a cassette of
//! model answers and a verifier script, recorded while the real engine
//! runs against scripted stand-ins.
//!
//! The answers are the known proof pieces: the outer-loop invariants, the
//! running-sum invariant `curr == seqSum(slice[..end])`, the slice-equality
//! assertion and the `lemmaSeqSumExtend` lemma. The verifier stand-in
//! accepts exactly the programs that carry them.
//!
//! cargo run --example record_maxsub_fixture -- [task dir]

use std::path::PathBuf;
use std::sync::Arc;

use pforge::engine::{code, run_task, VirtualClock};
use pforge::llm::{
    CassetteBackend, LlmGateway, ScriptedLlm, AUGMENT, CONSISTENCY, DECOMPOSE, GATE, GENERATE, MERGE,
};
use pforge::model::{Diagnostic, DiagnosticKind, Strategy, VerificationTask, VerifierReport};
use pforge::verifier::{FnVerifier, RecordingVerifier};

const STRIPPED: &str = include_str!("../tests/data/maxsub/stripped.dfy");
const DECOMPOSED: &str = include_str!("../tests/data/maxsub/decomposed_decoupled.dfy");
const VERIFIED: &str = include_str!("../tests/data/maxsub/verified_decoupled.dfy");
const ANNOTATED: &str = include_str!("../tests/data/maxsub/annotated.dfy");

const OUTLINE: &str = "\
Fix a start index. The inner loop keeps `curr` equal to the sum of the slice
read so far and `best` at least every prefix sum from `start`. Extending a
slice by one element adds that element to its sum, which follows from
unfolding `seqSum` once on the shorter slice. The outer loop keeps `maxSum`
equal to the sum of some subarray and at least every sum starting before
`start`.
";

fn fenced(code: &str) -> String {
    format!("```dafny\n{}\n```", code.trim_end())
}

fn decl(program: &str, name: &str) -> String {
    code::decl_text(program, name).unwrap_or_else(|| panic!("fixture lacks {name}"))
}

fn line_of(program: &str, needle: &str) -> Option<u32> {
    program.lines().position(|l| l.contains(needle)).map(|i| i as u32 + 1)
}

/// Accepts a program once the outer method is annotated and the inner loop
/// has its invariants backed by the extension lemma.
fn judge(program: &str) -> VerifierReport {
    let mut report = if !program.contains("invariant") {
        VerifierReport::failed(vec![Diagnostic::new(
            DiagnosticKind::PostconditionFailure,
            line_of(program, "ensures IsMaxSubSum"),
            "a postcondition could not be proved on this return path",
        )])
    } else if program.contains("invariant curr == seqSum(slice[..end])") && !program.contains("lemmaSeqSumExtend(slice") {
        VerifierReport::failed(vec![Diagnostic::new(
            DiagnosticKind::InvariantMaintenance,
            line_of(program, "invariant curr == seqSum(slice[..end])"),
            "this invariant could not be proved to be maintained by the loop",
        )])
    } else {
        VerifierReport::verified()
    };
    report.wall_time_seconds = 1.0 + (program.len() / 100) as f64 / 10.0;
    report
}

fn main() {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "tests/data/corpus/maxsub".into());
    std::fs::create_dir_all(&dir).expect("create task dir");
    let cassette = dir.join("cassette.json");
    let _ = std::fs::remove_file(&cassette);

    let outer = decl(VERIFIED, "MaxSubImpl");
    let inner = format!("{}\n\n{}", decl(VERIFIED, "lemmaSeqSumExtend"), decl(VERIFIED, "MaxSubImpl_loop1"));
    let lemma = decl(VERIFIED, "lemmaSeqSumExtend");
    let restored = decl(ANNOTATED, "MaxSubImpl");
    let model = ScriptedLlm::from_fn(move |r| {
        let s = r.substitutions;
        let text = match r.template_id {
            DECOMPOSE => format!("The inner loop becomes its own method.\n\n{}", fenced(DECOMPOSED)),
            CONSISTENCY => "Yes. The outer loop calls the lifted method once per start index and keeps the maximum, \
                            which is what the original inner loop computed."
                .to_string(),
            GATE => "Yes".to_string(),
            AUGMENT if s["body"].starts_with("method MaxSubImpl(") => fenced(&outer),
            AUGMENT => fenced(&inner),
            GENERATE => fenced(&lemma),
            MERGE => fenced(&restored),
            other => panic!("no scripted answer for {other}"),
        };
        Ok(text)
    });
    let llm = LlmGateway::new(CassetteBackend::record(&cassette, Box::new(model)).expect("open cassette"));
    let verifier = RecordingVerifier::new(FnVerifier::new(judge));

    let mut task = VerificationTask::new("maxsub", STRIPPED);
    task.outline = Some(OUTLINE.to_string());
    task.strategy = Some(Strategy::Decoupled);
    let clock = Arc::new(VirtualClock::default());
    let outcome = run_task(&task, &llm, &verifier, clock.as_ref()).expect("scripted run");
    let success = outcome.success().expect("the scripted run verifies");

    verifier.script().save(&dir.join("verifier.json")).expect("write verifier script");
    std::fs::write(dir.join("program.dfy"), STRIPPED).expect("write program");
    std::fs::write(dir.join("outline.md"), OUTLINE).expect("write outline");
    std::fs::write(dir.join("expected"), "verifiable\n").expect("write marker");
    println!(
        "{}: {} model calls, {} verifier runs, restored: {}",
        dir.display(),
        success.transcript.totals.llm_calls,
        success.transcript.totals.verifier_runs,
        success.restoration.as_ref().is_some_and(|r| r.complete()),
    );
}
