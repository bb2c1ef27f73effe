//! Runs the proof search on a small lemma with a scripted model and a
//! rule-based verifier. The first candidate carries an assertion the
//! verifier rejects, which spawns a sub-lemma; the sub-lemma is proved and
//! the parent goes through.
//!
//! cargo run --example proof_search

use pforge::engine::{run_task, VirtualClock};
use pforge::llm::{LlmGateway, ScriptedLlm, ASSERTION_GATE, GATE, GENERATE, REPAIR, SUBLEMMA_ASSERTION};
use pforge::model::{Diagnostic, DiagnosticKind, VerificationTask, VerifierReport};
use pforge::verifier::FnVerifier;

const TASK: &str = "\
function Sum(n: nat): nat {
  if n == 0 then 0 else n + Sum(n - 1)
}

lemma SumFormula(n: nat)
  ensures 2 * Sum(n) == n * (n + 1)
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let llm = LlmGateway::new(ScriptedLlm::from_fn(|r| {
        let for_helper = r.substitutions.get("signature").is_some_and(|s| s.contains("SumUnfold"));
        Ok(match r.template_id {
            GENERATE if for_helper => {
                "```dafny\nlemma SumUnfold(n: nat)\n  requires n > 0\n  ensures Sum(n) == n + Sum(n - 1)\n{\n}\n```".into()
            }
            GENERATE | REPAIR => "```dafny\nlemma SumFormula(n: nat)\n  ensures 2 * Sum(n) == n * (n + 1)\n\
                                  {\n  if n > 0 {\n    SumFormula(n - 1);\n    assert Sum(n) == n + Sum(n - 1);\n  }\n}\n```"
                .into(),
            ASSERTION_GATE | GATE => "Yes".into(),
            SUBLEMMA_ASSERTION => "```dafny\nlemma SumUnfold(n: nat)\n  requires n > 0\n  ensures Sum(n) == n + Sum(n - 1)\n```\n\
                                   ```dafny\nSumUnfold(n);\n```"
                .into(),
            _ => "I do not know.".into(),
        })
    }));
    // The bare assertion fails; once it is backed by the helper call the
    // program goes through.
    let verifier = FnVerifier::new(|p| {
        let bare = p.lines().position(|l| l.contains("assert Sum(n)") && !l.contains(" by "));
        let mut report = match bare {
            Some(i) => VerifierReport::failed(vec![Diagnostic::new(
                DiagnosticKind::AssertionFailure,
                Some(i as u32 + 1),
                "assertion might not hold",
            )]),
            None if p.contains("SumFormula(n - 1)") => VerifierReport::verified(),
            None => VerifierReport::failed(vec![Diagnostic::new(
                DiagnosticKind::PostconditionFailure,
                None,
                "a postcondition could not be proved",
            )]),
        };
        report.wall_time_seconds = 0.8;
        report
    });

    let mut task = VerificationTask::new("sum-formula", TASK);
    task.config.verify_at_k = 1;
    let clock = VirtualClock::default();
    let outcome = run_task(&task, &llm, &verifier, &clock)?;
    let attempt = &outcome.attempts[0];
    for e in &attempt.transcript.events {
        println!("{:>7} ms  {:?}", e.at_ms, e.event);
    }
    println!("\nstatus: {:?}, nodes: {}", attempt.status, attempt.tree.len());
    if let Some(program) = &attempt.program {
        println!("\n{program}");
    }
    Ok(())
}
