use super::*;
use crate::llm::{LlmRequest, ScriptedLlm};
use crate::model::{Diagnostic, DiagnosticKind, Temperature};
use crate::verifier::FnVerifier;

const TASK: &str = "function f(n: nat): nat { n }\n\nlemma Goal(n: nat)\n  ensures f(n) >= 0\n";

const PROOF: &str = "```dafny\nlemma Goal(n: nat)\n  ensures f(n) >= 0\n{\n  assert f(n) == n;\n}\n```";

const HELPER: &str = "```dafny\nlemma Helper(n: nat)\n  ensures f(n) == n\n```\n```dafny\nHelper(n);\n```";

fn line_of(program: &str, needle: &str) -> Option<u32> {
    program.lines().position(|l| l.contains(needle)).map(|i| i as u32 + 1)
}

/// Goal needs its assertion, and the assertion needs `Helper`.
fn judge(program: &str) -> VerifierReport {
    if !program.contains("assert f(n) == n") {
        return VerifierReport::failed(vec![Diagnostic::new(
            DiagnosticKind::PostconditionFailure,
            line_of(program, "lemma Goal"),
            "a postcondition could not be proved on this return path",
        )]);
    }
    if !program.contains("by { Helper(n); }") {
        return VerifierReport::failed(vec![Diagnostic::new(
            DiagnosticKind::AssertionFailure,
            line_of(program, "assert f(n) == n"),
            "assertion might not hold",
        )]);
    }
    VerifierReport::verified()
}

fn responder(gate_child: bool) -> impl Fn(&LlmRequest<'_>) -> Result<String, LlmError> + Send + Sync {
    move |r| {
        Ok(match r.template_id {
            GENERATE if r.substitutions["signature"].contains("Goal") => PROOF.to_string(),
            GENERATE => "```dafny\nlemma Helper(n: nat)\n  ensures f(n) == n\n{\n}\n```".to_string(),
            GATE => if gate_child { "Yes" } else { "No, this is false." }.to_string(),
            ASSERTION_GATE => "Yes".to_string(),
            SUBLEMMA_ASSERTION => HELPER.to_string(),
            other => panic!("unexpected template {other}"),
        })
    }
}

fn task() -> VerificationTask {
    let mut t = VerificationTask::new("goal", TASK);
    t.config.verify_at_k = 1;
    t
}

#[test]
fn single_node_success() {
    let llm = LlmGateway::new(ScriptedLlm::from_fn(|_| Ok(PROOF.to_string())));
    let verifier = FnVerifier::new(|p| {
        if p.contains("assert f(n) == n") { VerifierReport::verified() } else { judge(p) }
    });
    let clock = VirtualClock::default();
    let out = run_task(&task(), &llm, &verifier, &clock).unwrap();
    let a = out.success().expect("verified");
    assert_eq!(a.tree.len(), 1);
    assert_eq!(a.transcript.totals.llm_calls, 1);
    assert!(a.program.as_deref().unwrap().contains("assert f(n) == n;"));
    a.transcript.check_well_formed().unwrap();
}

#[test]
fn failing_assertion_grows_one_child() {
    let llm = LlmGateway::new(ScriptedLlm::from_fn(responder(true)));
    let verifier = FnVerifier::new(judge);
    let clock = VirtualClock::default();
    let out = run_task(&task(), &llm, &verifier, &clock).unwrap();
    let a = out.success().expect("verified");
    assert_eq!(a.tree.len(), 2);
    let root = a.tree.root().unwrap();
    assert_eq!(a.tree.get(root).children.len(), 1);
    let child = a.tree.get(a.tree.get(root).children[0]);
    assert_eq!(child.signature.name, "Helper");
    assert_eq!(child.status, NodeStatus::Verified);
    let program = a.program.as_deref().unwrap();
    assert!(program.contains("assert f(n) == n by { Helper(n); }"), "{program}");
    assert!(program.contains("lemma Helper(n: nat)\n  ensures f(n) == n\n{\n}"), "{program}");
    assert_eq!(out.new_lemma_count(TASK), 1);
    let kinds: Vec<_> = a
        .transcript
        .events
        .iter()
        .filter_map(|e| match &e.event {
            Event::RepairApplied { kind, .. } => Some(*kind),
            _ => None,
        })
        .collect();
    assert_eq!(kinds, [RepairKind::AssertionSubLemma]);
    a.transcript.check_well_formed().unwrap();
}

#[test]
fn rejected_child_rolls_back_with_lower_temperature() {
    let backend = ScriptedLlm::from_fn(responder(false));
    let llm = LlmGateway::new(backend);
    let verifier = FnVerifier::new(judge);
    let clock = VirtualClock::default();
    let out = run_task(&task(), &llm, &verifier, &clock).unwrap();
    assert!(!out.verified());
    let a = &out.attempts[0];
    assert_eq!(a.status, FinalStatus::Failed);
    let generate_temps: Vec<Temperature> = llm
        .backend()
        .requests()
        .into_iter()
        .filter(|(t, s, _)| t == GENERATE && s["signature"].contains("Goal"))
        .map(|(_, _, t)| t)
        .collect();
    assert_eq!(generate_temps, [Temperature::from_millis(500), Temperature::from_millis(200)]);
    let rollbacks: Vec<_> = a
        .transcript
        .events
        .iter()
        .filter_map(|e| match &e.event {
            Event::Rollback { temperature, .. } => Some(*temperature),
            _ => None,
        })
        .collect();
    assert_eq!(rollbacks, [Temperature::from_millis(200)]);
    assert!(matches!(a.transcript.events.last().unwrap().event, Event::FinalResult { status: FinalStatus::Failed }));
    let root = a.tree.root().unwrap();
    assert_eq!(a.tree.get(root).status, NodeStatus::Exhausted);
}

#[test]
fn global_timeout_aborts() {
    let llm = LlmGateway::new(ScriptedLlm::from_fn(responder(true)));
    let clock = std::sync::Arc::new(VirtualClock::default());
    let c = clock.clone();
    // Every verifier run takes 200 simulated seconds.
    let verifier = FnVerifier::new(move |p| {
        c.advance_ms(200_000);
        judge(p)
    });
    let out = run_task(&task(), &llm, &verifier, clock.as_ref()).unwrap();
    let a = &out.attempts[0];
    assert_eq!(a.status, FinalStatus::Aborted);
    let n = a.transcript.events.len();
    assert!(matches!(a.transcript.events[n - 2].event, Event::GlobalTimeout));
    a.transcript.check_well_formed().unwrap();
}
