//! Putting verified lifted methods back into the original method.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dafny::{apply_edits, expand_to_lines, indent_at, rename_idents, tokenize, Program, StmtKind, TextEdit, TokKind};
use crate::llm::{extract_code_block, subs, LlmBackend, LlmError, LlmGateway, MERGE};
use crate::model::{DecompositionPlan, LlmExchange, SourceSpan, Strategy};
use crate::verifier::{run_verifier, Verifier};

use super::lift::reindent;
use super::plan::{call_arguments, calls_in};
use super::strip::decl_removal_range;
use super::{same_executable_code, LlmSettings, RefactorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestoreMethod {
    /// Nothing was decomposed.
    Identity,
    /// Call sites were replaced by the lifted bodies without a model.
    Mechanical,
    /// The model merged the methods and the result passed the checks.
    Llm,
    /// Restoration did not succeed; the modular program is returned.
    Incomplete,
}

/// One lifted method and where it came from, for manual completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub lifted_method: String,
    pub original_span: SourceSpan,
    pub call_site_span: Option<SourceSpan>,
    pub renamings: Vec<(String, String)>,
}

/// Written next to the program when restoration is incomplete (and kept
/// for completed ones too, it costs nothing).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingReport {
    pub original_method: String,
    pub strategy: Strategy,
    pub complete: bool,
    pub entries: Vec<MappingEntry>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Restoration {
    pub program: String,
    pub method: RestoreMethod,
    pub report: MappingReport,
}

impl Restoration {
    pub fn complete(&self) -> bool {
        self.method != RestoreMethod::Incomplete
    }
}

fn mapping_report(plan: &DecompositionPlan) -> MappingReport {
    let entries = plan
        .lifted_methods
        .iter()
        .map(|m| {
            let sig = &m.definition.signature;
            let site = plan.call_sites.iter().find(|c| c.callee == sig.name);
            let renamings = site
                .map(|c| {
                    sig.parameters
                        .iter()
                        .zip(&c.arguments)
                        .filter(|(p, a)| p.name != a.trim())
                        .map(|(p, a)| (p.name.clone(), a.trim().to_string()))
                        .collect()
                })
                .unwrap_or_default();
            MappingEntry {
                lifted_method: sig.name.clone(),
                original_span: m.original_span.clone(),
                call_site_span: site.map(|c| c.span.clone()),
                renamings,
            }
        })
        .collect();
    MappingReport {
        original_method: plan.outer_method.signature.name.clone(),
        strategy: plan.strategy,
        complete: false,
        entries,
        notes: Vec::new(),
    }
}

/// Parenthesizes `arg` unless substituting it for an identifier is safe as is.
fn substitutable(arg: &str) -> String {
    let arg = arg.trim();
    let Ok(toks) = tokenize(arg) else { return format!("({arg})") };
    let mut depth = 0i32;
    let atomic = toks.iter().all(|t| {
        let s = t.text(arg);
        match s {
            "(" | "[" | "{" => {
                depth += 1;
                true
            }
            ")" | "]" | "}" => {
                depth -= 1;
                true
            }
            _ if depth > 0 => true,
            "." => true,
            _ => t.kind != TokKind::Punct && !matches!(s, "if" | "then" | "else" | "forall" | "exists" | "var" | "match"),
        }
    });
    if atomic {
        arg.to_string()
    } else {
        format!("({arg})")
    }
}

/// Replaces every call to a lifted method in `outer` by the lifted body,
/// with its requires and ensures turned into assertions around it.
pub(crate) fn inline_lifted(verified: &str, outer: &str, lifted: &[&str]) -> Result<String, String> {
    let targets: HashSet<String> = lifted.iter().map(|s| s.to_string()).collect();
    let mut src = verified.to_string();
    for _ in 0..64 {
        let p = Program::parse(&src).map_err(|e| e.to_string())?;
        let od = p.decl(outer).ok_or_else(|| format!("no `{outer}` in the verified program"))?;
        let body = p.body(od).map_err(|e| e.to_string())?.ok_or("the outer method has no body")?;
        let calls = calls_in(&p, &body, &targets);
        let Some(&(stmt, ref callee, tok)) = calls.first() else {
            // Done: drop the lifted declarations.
            let edits = p
                .decls
                .iter()
                .filter(|d| targets.contains(&d.name))
                .map(|d| TextEdit::delete(decl_removal_range(&p.src, p.decl_range(d))))
                .collect();
            return Ok(apply_edits(&p.src, edits));
        };
        let call_targets: Vec<String> = match &stmt.kind {
            StmtKind::Assign { targets, .. } => targets.clone(),
            StmtKind::Call { .. } => Vec::new(),
            _ => return Err(format!("the call to `{callee}` declares a variable and cannot be inlined")),
        };
        let ld = p.decl(callee).ok_or_else(|| format!("`{callee}` is not in the verified program"))?;
        let sig = &ld.signature;
        let args = call_arguments(&p, tok);
        if args.len() != sig.parameters.len() || call_targets.len() != sig.returns.len() {
            return Err(format!("the call to `{callee}` does not match its signature"));
        }
        let lbody = p.body(ld).map_err(|e| e.to_string())?.ok_or_else(|| format!("`{callee}` has no body"))?;
        if lbody.walk().iter().any(|s| matches!(s.kind, StmtKind::Return)) {
            return Err(format!("`{callee}` returns early"));
        }

        // A parameter that receives the old value of a variable the call
        // overwrites keeps its name as a ghost snapshot.
        let snapshot: Vec<(String, String)> = sig
            .parameters
            .iter()
            .zip(&args)
            .filter(|(_, a)| call_targets.iter().any(|t| t == a.trim()))
            .map(|(prm, a)| (prm.name.clone(), a.trim().to_string()))
            .collect();
        let is_copy_in = |s: &crate::dafny::Stmt| match &s.kind {
            StmtKind::Assign { targets, .. } if targets.len() == 1 => {
                sig.returns.iter().any(|r| r.name == targets[0])
                    && s.last == s.first + 3
                    && snapshot.iter().any(|(prm, _)| p.text(s.first + 2) == prm)
            }
            _ => false,
        };
        let kept: Vec<_> = lbody.stmts.iter().filter(|s| !is_copy_in(s)).collect();

        let mut rename: Vec<(String, String)> = Vec::new();
        for (prm, a) in sig.parameters.iter().zip(&args) {
            if !snapshot.iter().any(|(n, _)| n == &prm.name) {
                rename.push((prm.name.clone(), substitutable(a)));
            }
        }
        for (r, t) in sig.returns.iter().zip(&call_targets) {
            rename.push((r.name.clone(), t.clone()));
        }
        let renamed = |text: &str| {
            rename_idents(text, &|id| rename.iter().find(|(a, _)| a == id).map(|(_, b)| b.clone())).map_err(|e| e.to_string())
        };

        let indent = indent_at(&p.src, p.tokens[stmt.first].start).to_string();
        let mut lines: Vec<String> = Vec::new();
        let lifted_text = p.decl_text(ld);
        for (prm, arg) in &snapshot {
            let used = tokenize(lifted_text)
                .map(|ts| ts.iter().filter(|t| t.text(lifted_text) == prm).count() > 2)
                .unwrap_or(true);
            if used {
                lines.push(format!("{indent}ghost var {prm} := {arg};"));
            }
        }
        for r in &sig.requires_clauses {
            lines.push(format!("{indent}assert {};", renamed(r)?));
        }
        if let (Some(first), Some(last)) = (kept.first(), kept.last()) {
            let range = expand_to_lines(&p.src, p.tokens[first.first].start..p.tokens[last.last].end);
            let text = p.src[range].trim_end_matches('\n');
            lines.push(reindent(&renamed(text)?, &indent));
        }
        for e in sig.ensures_clauses.iter().filter(|e| !e.contains("old(")) {
            lines.push(format!("{indent}assert {};", renamed(e)?));
        }
        let replacement = lines.join("\n");
        let range = expand_to_lines(&p.src, p.byte_range(stmt.first, stmt.last));
        let replacement = if p.src[range.clone()].ends_with('\n') { replacement + "\n" } else { replacement };
        src = apply_edits(&p.src, vec![TextEdit::replace(range, replacement)]);
    }
    Err("lifted methods call each other too deeply".into())
}

/// Splices the outer method of a merge answer into `base`, adding any new
/// helper declarations right before it.
fn splice_merge(base: &str, answer: &str, outer: &str, lifted: &[&str]) -> Result<String, String> {
    let bp = Program::parse(base).map_err(|e| e.to_string())?;
    let ap = Program::parse(answer).map_err(|e| format!("the merged program does not parse: {e}"))?;
    let new_outer = ap.decl(outer).ok_or_else(|| format!("the merged program has no `{outer}`"))?;
    let bd = bp.decl(outer).ok_or("internal: base lost the outer method")?;
    let mut insert = String::new();
    for d in &ap.decls {
        if d.name != outer && !lifted.contains(&d.name.as_str()) && !bp.has_name(&d.name) {
            insert.push_str(ap.decl_text(d));
            insert.push_str("\n\n");
        }
    }
    let range = bp.decl_range(bd);
    Ok(apply_edits(&bp.src, vec![TextEdit::replace(range, format!("{insert}{}", ap.decl_text(new_outer)))]))
}

/// Restores the original method structure from a verified modular program.
///
/// Mechanical inlining is tried first; the model-driven merge is the
/// fallback, with executable statements compared token by token and the
/// verifier as the judge. When both fail the modular program comes back
/// with [`RestoreMethod::Incomplete`].
#[allow(clippy::too_many_arguments)]
pub fn restore_code<B: LlmBackend>(
    original: &str,
    plan: &DecompositionPlan,
    verified: &str,
    gw: &LlmGateway<B>,
    verifier: &dyn Verifier,
    settings: &LlmSettings,
    log: &mut Vec<LlmExchange>,
) -> Result<Restoration, RefactorError> {
    let mut report = mapping_report(plan);
    if plan.is_identity() {
        report.complete = true;
        return Ok(Restoration { program: verified.to_string(), method: RestoreMethod::Identity, report });
    }
    let outer = plan.outer_method.signature.name.as_str();
    let lifted = plan.lifted_names();

    match inline_lifted(verified, outer, &lifted) {
        Ok(candidate) if same_executable_code(original, &candidate)? => {
            let r = run_verifier(&candidate, verifier, settings.verifier_timeout_seconds)?;
            if r.is_verified() {
                report.complete = true;
                report.notes.push("restored by inlining the lifted methods".into());
                return Ok(Restoration { program: candidate, method: RestoreMethod::Mechanical, report });
            }
            report.notes.push(format!("inlined program did not verify: {}", first_line(&r.feedback())));
        }
        Ok(_) => report.notes.push("inlining changes executable statements (the decomposition rewrote them)".into()),
        Err(why) => report.notes.push(format!("inlining not applicable: {why}")),
    }

    let base = {
        let p = Program::parse(verified)?;
        let edits = p
            .decls
            .iter()
            .filter(|d| lifted.contains(&d.name.as_str()))
            .map(|d| TextEdit::delete(decl_removal_range(&p.src, p.decl_range(d))))
            .collect();
        apply_edits(&p.src, edits)
    };
    let mut feedback = String::new();
    for _ in 0..settings.attempts {
        let s = subs([("verified", verified.to_string()), ("original", original.to_string()), ("feedback", feedback.clone())]);
        let ex = gw.complete(MERGE, &s, settings.temperature, settings.max_tokens)?;
        let text = ex.response_text.clone();
        log.push(ex);
        let code = match extract_code_block(&text) {
            Ok(c) => c.code,
            Err(LlmError::EmptyResponse) => {
                feedback = "Your previous answer was empty.\n".into();
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let candidate = match splice_merge(&base, &code, outer, &lifted) {
            Ok(c) => c,
            Err(why) => {
                feedback = format!("Your previous answer was rejected: {why}\n");
                continue;
            }
        };
        match same_executable_code(original, &candidate) {
            Ok(true) => {}
            Ok(false) => {
                feedback = "Your previous answer changed executable statements of the original program. Only \
                            annotations may differ from the original.\n"
                    .into();
                continue;
            }
            Err(e) => {
                feedback = format!("Your previous answer does not parse: {e}\n");
                continue;
            }
        }
        let r = run_verifier(&candidate, verifier, settings.verifier_timeout_seconds)?;
        if r.is_verified() {
            report.complete = true;
            report.notes.push("restored by model merge".into());
            return Ok(Restoration { program: candidate, method: RestoreMethod::Llm, report });
        }
        feedback = format!("The verifier rejected your previous answer:\n{}\n", r.feedback());
    }
    report.notes.push(format!(
        "no merge candidate verified after {} attempts; the verified modular program is returned",
        settings.attempts
    ));
    Ok(Restoration { program: verified.to_string(), method: RestoreMethod::Incomplete, report })
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or("")
}
