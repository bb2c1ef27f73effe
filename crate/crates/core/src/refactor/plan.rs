//! Turning a decomposed program into a validated [`DecompositionPlan`].

use std::collections::HashSet;

use crate::dafny::{normalize_ws, Block, Program, Stmt, StmtKind, TokKind};
use crate::model::{CallSite, DeclKind, DecompositionPlan, LiftedMethod, MethodDefinition, MethodSignature, SourceSpan, Strategy};

pub(crate) fn span_of(p: &Program, first: usize, last: usize) -> SourceSpan {
    let a = &p.tokens[first];
    let b = &p.tokens[last];
    let text = p.slice(first, last).to_string();
    let last_text = b.text(&p.src);
    let (end_line, end_column) = match last_text.rfind('\n') {
        Some(i) => (p.last_line_of(last), last_text[i + 1..].chars().count() as u32 + 1),
        None => (b.line, b.col + last_text.chars().count() as u32),
    };
    SourceSpan { start_line: a.line, start_column: a.col, end_line, end_column, text }
}

fn same_external_contract(a: &MethodSignature, b: &MethodSignature) -> bool {
    let norm = |v: &[String]| v.iter().map(|s| normalize_ws(s)).collect::<Vec<_>>();
    let params = |v: &[crate::model::Param]| v.iter().map(|p| (p.name.clone(), normalize_ws(&p.ty))).collect::<Vec<_>>();
    a.name == b.name
        && a.kind == b.kind
        && params(&a.parameters) == params(&b.parameters)
        && params(&a.returns) == params(&b.returns)
        && norm(&a.requires_clauses) == norm(&b.requires_clauses)
        && norm(&a.ensures_clauses) == norm(&b.ensures_clauses)
}

/// Calls in `block` to any of `targets`: (statement, callee, callee token).
pub(crate) fn calls_in<'a>(p: &Program, block: &'a Block, targets: &HashSet<String>) -> Vec<(&'a Stmt, String, usize)> {
    let mut out = Vec::new();
    for s in block.walk() {
        let callee = match &s.kind {
            StmtKind::Call { callee } => Some(callee),
            StmtKind::Assign { rhs_call: Some(c), .. } | StmtKind::VarDecl { rhs_call: Some(c), .. } => Some(c),
            _ => None,
        };
        let Some(callee) = callee.filter(|c| targets.contains(*c)) else { continue };
        if let Some(tok) = (s.first..s.last).find(|&i| p.text(i) == callee && p.text(i + 1) == "(") {
            out.push((s, callee.clone(), tok));
        }
    }
    out
}

pub(crate) fn call_arguments(p: &Program, callee_tok: usize) -> Vec<String> {
    let open = callee_tok + 1;
    let Ok(close) = p.matching(open) else { return Vec::new() };
    if close == open + 1 {
        return Vec::new();
    }
    let mut args = Vec::new();
    let mut start = open + 1;
    let mut j = open + 1;
    while j < close {
        match p.text(j) {
            "(" | "[" | "{" => j = p.matching(j).unwrap_or(j) + 1,
            "," => {
                args.push(p.slice(start, j - 1).to_string());
                start = j + 1;
                j += 1;
            }
            _ => j += 1,
        }
    }
    args.push(p.slice(start, close - 1).to_string());
    args
}

/// Variables a loop carries from one iteration to the next: assigned in
/// the loop body but declared outside it. Also returns every loop index.
fn loop_state(body: &Block) -> (HashSet<String>, HashSet<String>) {
    let mut accumulators = HashSet::new();
    let mut indices = HashSet::new();
    for s in body.walk() {
        let StmtKind::Loop(l) = &s.kind else { continue };
        indices.extend(l.index_var.iter().cloned());
        let inner = l.body.walk();
        let declared: HashSet<&String> = inner
            .iter()
            .flat_map(|s| match &s.kind {
                StmtKind::VarDecl { names, .. } => names.iter().collect::<Vec<_>>(),
                StmtKind::Loop(l) => l.index_var.iter().collect(),
                _ => Vec::new(),
            })
            .collect();
        for st in inner {
            if let StmtKind::Assign { targets, .. } = &st.kind {
                for t in targets {
                    if !declared.contains(t) && t.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '\'') {
                        accumulators.insert(t.clone());
                    }
                }
            }
        }
    }
    (accumulators, indices)
}

fn identifiers(expr: &str) -> Vec<String> {
    crate::dafny::tokenize(expr)
        .map(|toks| toks.iter().filter(|t| t.kind == TokKind::Ident).map(|t| t.text(expr).to_string()).collect())
        .unwrap_or_default()
}

/// Checks the argument flow of `call_sites` against `strategy`.
pub(crate) fn check_strategy(
    strategy: Strategy,
    call_sites: &[CallSite],
    accumulators: &HashSet<String>,
    indices: &HashSet<String>,
) -> Result<(), String> {
    let mentions_acc = |a: &str| identifiers(a).into_iter().find(|i| accumulators.contains(i));
    match strategy {
        Strategy::FullSharing => {
            if !accumulators.is_empty()
                && !call_sites.iter().any(|c| c.arguments.iter().any(|a| accumulators.contains(a.trim())))
            {
                let mut acc: Vec<_> = accumulators.iter().cloned().collect();
                acc.sort();
                return Err(format!(
                    "full-sharing must pass the loop-carried state ({}) into the lifted method",
                    acc.join(", ")
                ));
            }
        }
        Strategy::Decoupled | Strategy::FullyDecoupled => {
            for c in call_sites {
                for a in &c.arguments {
                    if let Some(v) = mentions_acc(a) {
                        return Err(format!(
                            "{} must not pass the intermediate result `{v}` to `{}`",
                            strategy.cli_name(),
                            c.callee
                        ));
                    }
                    if strategy == Strategy::FullyDecoupled && indices.contains(a.trim()) {
                        return Err(format!(
                            "fully-decoupled passes only derived slices of the inputs, not the loop index `{}` to `{}`",
                            a.trim(),
                            c.callee
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Validates `decomposed` as a loop-level decomposition of `method` in
/// `original` and builds the plan. `Err` carries a reason suitable as
/// feedback for another attempt.
pub fn plan_from_decomposed(original: &str, decomposed: &str, method: &str, strategy: Strategy) -> Result<DecompositionPlan, String> {
    let op = Program::parse(original).map_err(|e| format!("the original program does not parse: {e}"))?;
    let dp = Program::parse(decomposed).map_err(|e| format!("the decomposed program does not parse: {e}"))?;
    let od = op.decl(method).ok_or_else(|| format!("no method `{method}` in the original program"))?;
    let nd = dp.decl(method).ok_or_else(|| format!("the decomposed program lost the method `{method}`"))?;
    if !same_external_contract(&od.signature, &nd.signature) {
        return Err(format!("`{method}` must keep its signature and requires/ensures clauses verbatim"));
    }
    for d in &op.decls {
        if d.name == method {
            continue;
        }
        match dp.decl(&d.name) {
            Some(n) if normalize_ws(dp.decl_text(n)) == normalize_ws(op.decl_text(d)) => {}
            Some(_) => return Err(format!("`{}` must not be changed", d.name)),
            None => return Err(format!("`{}` is missing from the decomposed program", d.name)),
        }
    }
    for n in &op.other_names {
        if !dp.other_names.contains(n) {
            return Err(format!("`{n}` is missing from the decomposed program"));
        }
    }
    let new: Vec<_> = dp.decls.iter().filter(|d| op.decl(&d.name).is_none() && !op.other_names.contains(&d.name)).collect();
    for d in &new {
        if d.kind != DeclKind::Method || d.body.is_none() {
            return Err(format!("`{}`: only lifted methods with bodies may be added", d.name));
        }
    }
    let new_names: HashSet<String> = new.iter().map(|d| d.name.clone()).collect();
    let outer_body = dp.body(nd).map_err(|e| e.to_string())?.ok_or("the outer method lost its body")?;
    if outer_body.loop_count() > 1 {
        return Err(format!("`{method}` still contains {} loops; each method may contain at most one", outer_body.loop_count()));
    }
    let mut bodies = vec![(method.to_string(), outer_body)];
    for d in &new {
        let b = dp.body(d).map_err(|e| e.to_string())?.expect("checked above");
        if b.loop_count() > 1 {
            return Err(format!("lifted method `{}` contains {} loops; at most one is allowed", d.name, b.loop_count()));
        }
        bodies.push((d.name.clone(), b));
    }

    let mut call_sites = Vec::new();
    for (_, b) in &bodies {
        for (s, callee, tok) in calls_in(&dp, b, &new_names) {
            call_sites.push(CallSite { span: span_of(&dp, s.first, s.last), callee, arguments: call_arguments(&dp, tok) });
        }
    }
    for n in &new_names {
        if !call_sites.iter().any(|c| &c.callee == n) {
            return Err(format!("lifted method `{n}` is never called"));
        }
    }

    let orig_body = op.body(od).map_err(|e| e.to_string())?.ok_or("the original method has no body")?;
    let (accumulators, indices) = loop_state(&orig_body);
    check_strategy(strategy, &call_sites, &accumulators, &indices)?;

    // Map each lifted method to the original loop it stands for.
    let orig_loops: Vec<&Stmt> = orig_body.walk().into_iter().filter(|s| matches!(s.kind, StmtKind::Loop(_))).collect();
    let header = |p: &Program, s: &Stmt| match &s.kind {
        StmtKind::Loop(l) => normalize_ws(p.slice(s.first, l.header.1)),
        _ => String::new(),
    };
    let mut used = vec![false; orig_loops.len()];
    let mut lifted = Vec::new();
    let mut renamings = Vec::new();
    for d in &new {
        let b = &bodies.iter().find(|(n, _)| n == &d.name).expect("collected").1;
        let lifted_loop = b.walk().into_iter().find(|s| matches!(s.kind, StmtKind::Loop(_)));
        let idx = lifted_loop
            .and_then(|l| {
                let h = header(&dp, l);
                (0..orig_loops.len()).find(|&i| !used[i] && header(&op, orig_loops[i]) == h)
            })
            .or_else(|| (0..orig_loops.len()).rev().find(|&i| !used[i]))
            .ok_or_else(|| format!("cannot relate `{}` to a loop of the original method", d.name))?;
        used[idx] = true;
        let s = orig_loops[idx];
        lifted.push(LiftedMethod {
            definition: MethodDefinition { signature: d.signature.clone(), text: dp.decl_text(d).to_string() },
            original_span: span_of(&op, s.first, s.last),
        });
        for c in call_sites.iter().filter(|c| c.callee == d.name) {
            for (prm, arg) in d.signature.parameters.iter().zip(&c.arguments) {
                let pair = (prm.name.clone(), arg.trim().to_string());
                if pair.0 != pair.1 && !renamings.contains(&pair) {
                    renamings.push(pair);
                }
            }
        }
    }
    Ok(DecompositionPlan {
        strategy,
        outer_method: MethodDefinition { signature: nd.signature.clone(), text: dp.decl_text(nd).to_string() },
        lifted_methods: lifted,
        call_sites,
        program: decomposed.to_string(),
        renamings,
    })
}

/// The plan for a method that needs no decomposition.
pub fn identity_plan(program: &str, method: &str, strategy: Strategy) -> Result<DecompositionPlan, String> {
    let p = Program::parse(program).map_err(|e| e.to_string())?;
    let d = p.decl(method).ok_or_else(|| format!("no method `{method}`"))?;
    Ok(DecompositionPlan {
        strategy,
        outer_method: MethodDefinition { signature: d.signature.clone(), text: p.decl_text(d).to_string() },
        lifted_methods: Vec::new(),
        call_sites: Vec::new(),
        program: program.to_string(),
        renamings: Vec::new(),
    })
}

/// Re-checks the structural rules on an existing plan: every method at
/// most one loop, spans disjoint, the outer contract intact.
pub fn check_plan_invariants(original: &str, plan: &DecompositionPlan) -> Result<(), String> {
    let dp = Program::parse(&plan.program).map_err(|e| e.to_string())?;
    let mut names = vec![plan.outer_method.signature.name.clone()];
    names.extend(plan.lifted_names().iter().map(|s| s.to_string()));
    for n in &names {
        let d = dp.decl(n).ok_or_else(|| format!("`{n}` missing from the plan program"))?;
        let loops = dp.body(d).map_err(|e| e.to_string())?.map_or(0, |b| b.loop_count());
        if loops > 1 {
            return Err(format!("`{n}` contains {loops} loops"));
        }
    }
    for (i, a) in plan.lifted_methods.iter().enumerate() {
        for b in &plan.lifted_methods[i + 1..] {
            if a.original_span.overlaps(&b.original_span) && a.original_span != b.original_span {
                // Nested lifts (a chain) legitimately cover nested loops.
                let inside = |x: &SourceSpan, y: &SourceSpan| x.text.contains(y.text.as_str());
                if !inside(&a.original_span, &b.original_span) && !inside(&b.original_span, &a.original_span) {
                    return Err("lifted spans overlap".into());
                }
            }
        }
    }
    let op = Program::parse(original).map_err(|e| e.to_string())?;
    let od = op.decl(&plan.outer_method.signature.name).ok_or("outer method missing from the original")?;
    if !same_external_contract(&od.signature, &plan.outer_method.signature) {
        return Err("outer contract changed".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const STRIPPED: &str = include_str!("../../tests/data/maxsub/stripped.dfy");
    const FULL: &str = include_str!("../../tests/data/maxsub/decomposed_full_sharing.dfy");
    const DEC: &str = include_str!("../../tests/data/maxsub/decomposed_decoupled.dfy");
    const FDEC: &str = include_str!("../../tests/data/maxsub/decomposed_fully_decoupled.dfy");

    fn args(plan: &DecompositionPlan) -> Vec<String> {
        plan.call_sites[0].arguments.clone()
    }

    #[test]
    fn the_three_strategies_pass_what_they_should() {
        let full = plan_from_decomposed(STRIPPED, FULL, "MaxSubImpl", Strategy::FullSharing).unwrap();
        assert_eq!(args(&full), ["ints", "start", "maxSum"]);
        let dec = plan_from_decomposed(STRIPPED, DEC, "MaxSubImpl", Strategy::Decoupled).unwrap();
        assert_eq!(args(&dec), ["ints", "start"]);
        let fdec = plan_from_decomposed(STRIPPED, FDEC, "MaxSubImpl", Strategy::FullyDecoupled).unwrap();
        assert_eq!(args(&fdec), ["ints[start..]"]);
        for plan in [&full, &dec, &fdec] {
            assert_eq!(plan.lifted_names(), ["MaxSubImpl_loop1"]);
            assert!(plan.lifted_methods[0].original_span.text.starts_with("for end := 0 to |slice|"));
            assert_eq!(plan.lifted_methods[0].original_span.start_line, 19);
            check_plan_invariants(STRIPPED, plan).unwrap();
        }
        assert_eq!(fdec.renamings, [("slice".to_string(), "ints[start..]".to_string())]);
    }

    #[test]
    fn strategy_violations_are_reported() {
        let err = plan_from_decomposed(STRIPPED, FULL, "MaxSubImpl", Strategy::Decoupled).unwrap_err();
        assert!(err.contains("maxSum"), "{err}");
        let err = plan_from_decomposed(STRIPPED, DEC, "MaxSubImpl", Strategy::FullyDecoupled).unwrap_err();
        assert!(err.contains("start"), "{err}");
        let err = plan_from_decomposed(STRIPPED, DEC, "MaxSubImpl", Strategy::FullSharing).unwrap_err();
        assert!(err.contains("loop-carried"), "{err}");
    }

    #[test]
    fn loop_rule_and_contract_are_enforced() {
        let err = plan_from_decomposed(STRIPPED, STRIPPED, "MaxSubImpl", Strategy::Decoupled).unwrap_err();
        assert!(err.contains("2 loops"), "{err}");
        let weakened = DEC.replace("  ensures IsMaxSubSum(ints, maxSum)\n", "");
        let err = plan_from_decomposed(STRIPPED, &weakened, "MaxSubImpl", Strategy::Decoupled).unwrap_err();
        assert!(err.contains("verbatim"), "{err}");
        let changed = DEC.replace("ints[0] + seqSum", "seqSum");
        assert!(plan_from_decomposed(STRIPPED, &changed, "MaxSubImpl", Strategy::Decoupled).unwrap_err().contains("seqSum"));
    }
}
