//! Model-driven loop-level decomposition and its consistency gate.

use crate::dafny::{rename_idents, Program};
use crate::llm::{extract_code_block, parse_verdict, subs, verdict_reason, LlmBackend, LlmError, LlmGateway, CONSISTENCY, DECOMPOSE};
use crate::model::{DecompositionPlan, LlmExchange, Strategy};
use crate::verifier::Verifier;

use super::plan::plan_from_decomposed;
use super::{LlmSettings, RefactorError};

/// The first method with more than one loop, if any.
pub fn find_target_method(program: &str) -> Result<Option<String>, RefactorError> {
    let p = Program::parse(program)?;
    for d in &p.decls {
        if d.kind != crate::model::DeclKind::Method {
            continue;
        }
        if p.body(d)?.is_some_and(|b| b.loop_count() > 1) {
            return Ok(Some(d.name.clone()));
        }
    }
    Ok(None)
}

/// Renames auxiliary methods that do not follow `<method>_loop<k>`.
fn conventional_names(original: &str, decomposed: &str, method: &str) -> Result<String, String> {
    let op = Program::parse(original).map_err(|e| e.to_string())?;
    let dp = Program::parse(decomposed).map_err(|e| format!("the decomposed program does not parse: {e}"))?;
    let follows = |n: &str| {
        n.strip_prefix(method)
            .and_then(|r| r.strip_prefix("_loop"))
            .is_some_and(|k| !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit()))
    };
    let mut taken: Vec<String> = dp.decls.iter().map(|d| d.name.clone()).chain(dp.other_names.iter().cloned()).collect();
    let mut renames = Vec::new();
    for d in &dp.decls {
        if op.has_name(&d.name) || follows(&d.name) {
            continue;
        }
        let k = (1..).find(|k| !taken.contains(&format!("{method}_loop{k}"))).expect("unbounded");
        let fresh = format!("{method}_loop{k}");
        taken.push(fresh.clone());
        renames.push((d.name.clone(), fresh));
    }
    if renames.is_empty() {
        return Ok(decomposed.to_string());
    }
    rename_idents(decomposed, &|t| renames.iter().find(|(a, _)| a == t).map(|(_, b)| b.clone())).map_err(|e| e.to_string())
}

/// Outcome of the consistency gate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Consistency {
    Accept,
    Reject(String),
}

fn feedback_text(reason: Option<&str>) -> String {
    match reason {
        Some(r) => format!("Your previous answer was rejected: {r}\nFix this problem.\n"),
        None => String::new(),
    }
}

fn propose<B: LlmBackend>(
    program: &str,
    method: &str,
    strategy: Strategy,
    gw: &LlmGateway<B>,
    settings: &LlmSettings,
    feedback: Option<&str>,
    log: &mut Vec<LlmExchange>,
) -> Result<Result<DecompositionPlan, String>, RefactorError> {
    let s = subs([
        ("method", method.to_string()),
        ("strategy_description", strategy.describe().to_string()),
        ("program", program.to_string()),
        ("feedback", feedback_text(feedback)),
    ]);
    let ex = gw.complete(DECOMPOSE, &s, settings.temperature, settings.max_tokens)?;
    let text = ex.response_text.clone();
    let truncated = ex.truncated;
    log.push(ex);
    if truncated {
        return Ok(Err("the answer was cut off; reply with the complete program".into()));
    }
    let code = match extract_code_block(&text) {
        Ok(c) => format!("{}\n", c.code.trim_end()),
        Err(LlmError::EmptyResponse) => return Ok(Err("the answer was empty".into())),
        Err(e) => return Err(e.into()),
    };
    Ok(conventional_names(program, &code, method).and_then(|code| plan_from_decomposed(program, &code, method, strategy)))
}

/// Asks the model for a decomposition of `method` and validates it,
/// retrying with the rejection reason up to `settings.attempts` times.
pub fn decompose_code<B: LlmBackend>(
    program: &str,
    method: &str,
    strategy: Strategy,
    gw: &LlmGateway<B>,
    settings: &LlmSettings,
    log: &mut Vec<LlmExchange>,
) -> Result<DecompositionPlan, RefactorError> {
    check_method(program, method)?;
    let mut reason: Option<String> = None;
    for _ in 0..settings.attempts {
        match propose(program, method, strategy, gw, settings, reason.as_deref(), log)? {
            Ok(plan) => return Ok(plan),
            Err(r) => reason = Some(r),
        }
    }
    Err(RefactorError::DecompositionFailed { attempts: settings.attempts, last_reason: reason.unwrap_or_default() })
}

fn check_method(program: &str, method: &str) -> Result<(), RefactorError> {
    let p = Program::parse(program)?;
    match p.decl(method) {
        Some(d) if d.kind == crate::model::DeclKind::Method => Ok(()),
        _ => Err(RefactorError::UnknownMethod(method.to_string())),
    }
}

/// Resolution first, then the contract-strength rule, then the model's
/// judgement. Identity plans are accepted without any check.
pub fn check_decomposition_consistency<B: LlmBackend>(
    original: &str,
    plan: &DecompositionPlan,
    gw: &LlmGateway<B>,
    verifier: &dyn Verifier,
    settings: &LlmSettings,
    log: &mut Vec<LlmExchange>,
) -> Result<Consistency, RefactorError> {
    if plan.is_identity() {
        return Ok(Consistency::Accept);
    }
    let resolved = verifier.resolve(&plan.program)?;
    if !resolved.is_verified() {
        return Ok(Consistency::Reject(format!("the refactored program does not resolve:\n{}", resolved.feedback())));
    }
    for m in &plan.lifted_methods {
        let sig = &m.definition.signature;
        let vacuous = sig.ensures_clauses.iter().all(|e| e.trim() == "true");
        if !sig.returns.is_empty() && vacuous {
            return Ok(Consistency::Reject(format!(
                "`{}` has no meaningful postcondition (ensures true), so its contract cannot support the proof of `{}`",
                sig.name, plan.outer_method.signature.name
            )));
        }
    }
    let s = subs([
        ("method", plan.outer_method.signature.name.clone()),
        ("original", original.to_string()),
        ("decomposed", plan.program.clone()),
    ]);
    let ex = gw.complete(CONSISTENCY, &s, settings.temperature, settings.max_tokens)?;
    let text = ex.response_text.clone();
    log.push(ex);
    Ok(match parse_verdict(&text) {
        Ok(true) => Consistency::Accept,
        Ok(false) => {
            let why = verdict_reason(&text);
            Consistency::Reject(if why.is_empty() { "the consistency check answered no".into() } else { why })
        }
        Err(_) => Consistency::Reject("the consistency check gave no yes/no answer".into()),
    })
}

/// Decomposition with the consistency gate: every validation failure or
/// rejection feeds the next proposal, for at most `settings.attempts` rounds.
pub fn decompose_checked<B: LlmBackend>(
    program: &str,
    method: &str,
    strategy: Strategy,
    gw: &LlmGateway<B>,
    verifier: &dyn Verifier,
    settings: &LlmSettings,
    log: &mut Vec<LlmExchange>,
) -> Result<DecompositionPlan, RefactorError> {
    check_method(program, method)?;
    let mut reason: Option<String> = None;
    let mut rejected_by_gate = false;
    for _ in 0..settings.attempts {
        match propose(program, method, strategy, gw, settings, reason.as_deref(), log)? {
            Err(r) => {
                reason = Some(r);
                rejected_by_gate = false;
            }
            Ok(plan) => match check_decomposition_consistency(program, &plan, gw, verifier, settings, log)? {
                Consistency::Accept => return Ok(plan),
                Consistency::Reject(r) => {
                    reason = Some(r);
                    rejected_by_gate = true;
                }
            },
        }
    }
    let last_reason = reason.unwrap_or_default();
    Err(if rejected_by_gate {
        RefactorError::DecompositionAbandoned { attempts: settings.attempts, last_reason }
    } else {
        RefactorError::DecompositionFailed { attempts: settings.attempts, last_reason }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedLlm;
    use crate::model::{Temperature, VerifierReport};
    use crate::verifier::VerifierError;

    const STRIPPED: &str = include_str!("../../tests/data/maxsub/stripped.dfy");
    const DEC: &str = include_str!("../../tests/data/maxsub/decomposed_decoupled.dfy");
    const FDEC: &str = include_str!("../../tests/data/maxsub/decomposed_fully_decoupled.dfy");

    struct Resolves(bool);
    impl Verifier for Resolves {
        fn name(&self) -> &str {
            "resolves"
        }
        fn verify(&self, _: &str, _: u64) -> Result<VerifierReport, VerifierError> {
            unreachable!("only resolution is used here")
        }
        fn resolve(&self, _: &str) -> Result<VerifierReport, VerifierError> {
            Ok(if self.0 {
                VerifierReport::verified()
            } else {
                VerifierReport::failed(vec![crate::model::Diagnostic::new(
                    crate::model::DiagnosticKind::ResolutionError,
                    Some(3),
                    "unresolved identifier: best",
                )])
            })
        }
    }

    fn settings() -> LlmSettings {
        LlmSettings { attempts: 3, temperature: Temperature::from_millis(500), max_tokens: 4028, verifier_timeout_seconds: 20 }
    }

    fn fenced(code: &str) -> String {
        format!("```dafny\n{code}```\n")
    }

    #[test]
    fn target_is_the_first_nested_method() {
        assert_eq!(find_target_method(STRIPPED).unwrap().as_deref(), Some("MaxSubImpl"));
        assert_eq!(find_target_method(DEC).unwrap(), None);
    }

    #[test]
    fn invalid_plans_are_retried_with_the_reason() {
        let llm = ScriptedLlm::queued([(DECOMPOSE, vec![fenced(STRIPPED), "```dafny\nmethod {```".into(), fenced(DEC)])]);
        let gw = LlmGateway::new(llm);
        let mut log = Vec::new();
        let plan = decompose_code(STRIPPED, "MaxSubImpl", Strategy::Decoupled, &gw, &settings(), &mut log).unwrap();
        assert_eq!(plan.call_sites[0].arguments, ["ints", "start"]);
        assert_eq!(log.len(), 3);
        assert!(log[1].substitutions["feedback"].contains("2 loops"));
        assert_eq!(log[0].substitutions["feedback"], "");
    }

    #[test]
    fn exhausting_attempts_is_a_decomposition_failure() {
        let llm = ScriptedLlm::queued([(DECOMPOSE, vec![fenced(FDEC); 3])]);
        let gw = LlmGateway::new(llm);
        let err = decompose_code(STRIPPED, "MaxSubImpl", Strategy::FullSharing, &gw, &settings(), &mut Vec::new()).unwrap_err();
        assert!(matches!(err, RefactorError::DecompositionFailed { attempts: 3, .. }), "{err}");
    }

    #[test]
    fn unconventional_names_are_normalized() {
        let odd = DEC.replace("MaxSubImpl_loop1", "innerLoop");
        let llm = ScriptedLlm::queued([(DECOMPOSE, vec![fenced(&odd)])]);
        let gw = LlmGateway::new(llm);
        let plan = decompose_code(STRIPPED, "MaxSubImpl", Strategy::Decoupled, &gw, &settings(), &mut Vec::new()).unwrap();
        assert_eq!(plan.program, DEC);
    }

    #[test]
    fn consistency_gate_order() {
        let plan = plan_from_decomposed(STRIPPED, DEC, "MaxSubImpl", Strategy::Decoupled).unwrap();
        let mut log = Vec::new();
        // Resolution failure: no model call at all.
        let gw = LlmGateway::new(ScriptedLlm::queued(Vec::<(&str, Vec<String>)>::new()));
        let r = check_decomposition_consistency(STRIPPED, &plan, &gw, &Resolves(false), &settings(), &mut log).unwrap();
        assert!(matches!(r, Consistency::Reject(ref why) if why.contains("resolve")));
        assert!(log.is_empty());

        let weak_src = DEC
            .replace("  ensures exists e :: start <= e <= |ints| && seqSum(ints[start..e]) == best\n", "")
            .replace("  ensures forall e :: start < e <= |ints| ==> seqSum(ints[start..e]) <= best\n", "  ensures true\n");
        let weak = plan_from_decomposed(STRIPPED, &weak_src, "MaxSubImpl", Strategy::Decoupled).unwrap();
        let r = check_decomposition_consistency(STRIPPED, &weak, &gw, &Resolves(true), &settings(), &mut log).unwrap();
        assert!(matches!(r, Consistency::Reject(ref why) if why.contains("ensures true")));
        assert!(log.is_empty());

        let gw = LlmGateway::new(ScriptedLlm::queued([(CONSISTENCY, vec!["Yes\nThe inner contract bounds every sum.".into()])]));
        let r = check_decomposition_consistency(STRIPPED, &plan, &gw, &Resolves(true), &settings(), &mut log).unwrap();
        assert_eq!(r, Consistency::Accept);
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn gate_rejections_regenerate_then_abandon() {
        let llm = ScriptedLlm::queued([
            (DECOMPOSE, vec![fenced(DEC), fenced(DEC)]),
            (CONSISTENCY, vec!["No\nThe outer invariant is not implied.".into(), "no".into()]),
        ]);
        let gw = LlmGateway::new(llm);
        let mut s = settings();
        s.attempts = 2;
        let mut log = Vec::new();
        let err = decompose_checked(STRIPPED, "MaxSubImpl", Strategy::Decoupled, &gw, &Resolves(true), &s, &mut log).unwrap_err();
        assert!(matches!(err, RefactorError::DecompositionAbandoned { attempts: 2, .. }), "{err}");
        assert!(log[2].substitutions["feedback"].contains("outer invariant is not implied"));
    }
}
