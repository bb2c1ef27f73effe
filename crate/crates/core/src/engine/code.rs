//! Edits on whole-program snapshots used by the search.

use crate::dafny::{apply_edits, indent_at, Program, Stmt, StmtKind, SyntaxError, TextEdit};
use crate::model::{DeclKind, MethodSignature};
use crate::refactor::decl_removal_range;

/// Text of the declaration `name`, if present.
pub fn decl_text(program: &str, name: &str) -> Option<String> {
    let p = Program::parse(program).ok()?;
    p.decl(name).map(|d| p.decl_text(d).to_string())
}

/// Replaces the declaration `name` with `text`.
pub fn replace_decl(program: &str, name: &str, text: &str) -> Result<String, String> {
    let p = Program::parse(program).map_err(|e| e.to_string())?;
    let d = p.decl(name).ok_or_else(|| format!("no declaration `{name}`"))?;
    Ok(apply_edits(&p.src, vec![TextEdit::replace(p.decl_range(d), text)]))
}

/// Gives a bodiless declaration the body `seed_body` (a `{ ... }` block).
pub fn with_body(program: &str, sig: &MethodSignature, seed_body: &str) -> Result<String, String> {
    replace_decl(program, &sig.name, &format!("{}\n{}", sig.render_header(false), seed_body))
}

/// Body block text of `name`, if it has one.
pub fn body_text(program: &str, name: &str) -> Option<String> {
    let p = Program::parse(program).ok()?;
    let d = p.decl(name)?;
    d.body.map(|(o, c)| p.slice(o, c).to_string())
}

/// Whether `name` has a body in `program`.
pub fn has_body(program: &str, name: &str) -> bool {
    body_text(program, name).is_some()
}

/// Callees of call statements (including `x := f(...)` forms) in the body of `name`.
pub fn callees(program: &str, name: &str) -> Vec<String> {
    let Ok(p) = Program::parse(program) else { return Vec::new() };
    let Some(d) = p.decl(name) else { return Vec::new() };
    let Ok(Some(b)) = p.body(d) else { return Vec::new() };
    let mut out: Vec<String> = Vec::new();
    for s in b.walk() {
        let c = match &s.kind {
            StmtKind::Call { callee } => Some(callee),
            StmtKind::Assign { rhs_call: Some(c), .. } | StmtKind::VarDecl { rhs_call: Some(c), .. } => Some(c),
            _ => None,
        };
        if let Some(c) = c.filter(|c| !out.contains(c)) {
            out.push(c.clone());
        }
    }
    out
}

fn all_stmts(p: &Program) -> Result<Vec<Stmt>, SyntaxError> {
    stmts_except(p, None)
}

fn stmts_except(p: &Program, skip: Option<&str>) -> Result<Vec<Stmt>, SyntaxError> {
    let mut out = Vec::new();
    let stmt_bodies = |d: &&crate::dafny::Decl| matches!(d.kind, DeclKind::Method | DeclKind::Lemma);
    for d in p.decls.iter().filter(stmt_bodies).filter(|d| Some(d.name.as_str()) != skip) {
        if let Some(b) = p.body(d)? {
            out.extend(b.walk().into_iter().cloned());
        }
    }
    Ok(out)
}

fn find_assert(p: &Program, line: u32) -> Result<Option<Stmt>, SyntaxError> {
    Ok(all_stmts(p)?
        .into_iter()
        .filter(|s| matches!(s.kind, StmtKind::Assert { .. }))
        .find(|s| p.line_of(s.first) <= line && line <= p.last_line_of(s.last)))
}

/// The assertion statement covering `line`.
pub fn assertion_at(program: &str, line: u32) -> Option<String> {
    let p = Program::parse(program).ok()?;
    let s = find_assert(&p, line).ok()??;
    Some(p.slice(s.first, s.last).to_string())
}

/// Turns the assertion at `line` into `assert E by { call }`, or adds the
/// call to an existing `by` block.
pub fn add_assert_by(program: &str, line: u32, call: &str) -> Result<String, String> {
    let p = Program::parse(program).map_err(|e| e.to_string())?;
    let s = find_assert(&p, line).map_err(|e| e.to_string())?.ok_or_else(|| format!("no assertion on line {line}"))?;
    let StmtKind::Assert { expr, by } = &s.kind else { unreachable!("filtered") };
    let edit = match by {
        None => TextEdit::replace(p.tokens[expr.1].end..p.tokens[s.last].end, format!(" by {{ {call} }}")),
        Some(b) => TextEdit::insert(p.tokens[b.close].start, format!("{call} ")),
    };
    Ok(apply_edits(&p.src, vec![edit]))
}

/// Deletes the assertion at `line`.
pub fn remove_assertion(program: &str, line: u32) -> Result<String, String> {
    let p = Program::parse(program).map_err(|e| e.to_string())?;
    let s = find_assert(&p, line).map_err(|e| e.to_string())?.ok_or_else(|| format!("no assertion on line {line}"))?;
    let from = if s.first > 0 { p.tokens[s.first - 1].end } else { 0 };
    Ok(apply_edits(&p.src, vec![TextEdit::delete(from..p.tokens[s.last].end)]))
}

/// The loop with an invariant clause covering `line`: (loop statement, clause index).
fn find_invariant(p: &Program, line: u32) -> Result<Option<(Stmt, usize)>, SyntaxError> {
    for s in all_stmts(p)? {
        if let StmtKind::Loop(l) = &s.kind {
            for (i, c) in l.clauses.iter().enumerate() {
                if p.text(c.keyword) == "invariant" && p.line_of(c.keyword) <= line && line <= p.last_line_of(c.last) {
                    return Ok(Some((s.clone(), i)));
                }
            }
        }
    }
    Ok(None)
}

/// (invariant clause text, loop header and clauses) for the invariant at `line`.
pub fn invariant_at(program: &str, line: u32) -> Option<(String, String)> {
    let p = Program::parse(program).ok()?;
    let (s, i) = find_invariant(&p, line).ok()??;
    let StmtKind::Loop(l) = &s.kind else { return None };
    let c = l.clauses[i];
    Some((p.slice(c.keyword, c.last).to_string(), p.slice(s.first, s.last).to_string()))
}

/// Places `call` for the invariant at `line`: at the end of the loop body
/// for a maintenance failure, right before the loop for an entry failure.
pub fn insert_invariant_call(program: &str, line: u32, call: &str, on_entry: bool) -> Result<String, String> {
    let p = Program::parse(program).map_err(|e| e.to_string())?;
    let (s, _) = find_invariant(&p, line).map_err(|e| e.to_string())?.ok_or_else(|| format!("no invariant on line {line}"))?;
    let StmtKind::Loop(l) = &s.kind else { unreachable!("found a loop") };
    let loop_start = p.tokens[s.first].start;
    let loop_indent = indent_at(&p.src, loop_start).to_string();
    let edit = if on_entry {
        TextEdit::insert(loop_start, format!("{call}\n{loop_indent}"))
    } else {
        let inner = match l.body.stmts.first() {
            Some(f) => indent_at(&p.src, p.tokens[f.first].start).to_string(),
            None => format!("{loop_indent}  "),
        };
        let at = match l.body.stmts.last() {
            Some(last) => p.tokens[last.last].end,
            None => p.tokens[l.body.open].end,
        };
        TextEdit::insert(at, format!("\n{inner}{call}"))
    };
    Ok(apply_edits(&p.src, vec![edit]))
}

/// Deletes the invariant clause at `line`.
pub fn remove_invariant(program: &str, line: u32) -> Result<String, String> {
    let p = Program::parse(program).map_err(|e| e.to_string())?;
    let (s, i) = find_invariant(&p, line).map_err(|e| e.to_string())?.ok_or_else(|| format!("no invariant on line {line}"))?;
    let StmtKind::Loop(l) = &s.kind else { unreachable!("found a loop") };
    let c = l.clauses[i];
    Ok(apply_edits(&p.src, vec![TextEdit::delete(p.tokens[c.keyword - 1].end..p.tokens[c.last].end)]))
}

/// Removes the lemma `name` and every use of it: call statements are
/// deleted and `assert E by { name(..); }` loses its `by` block.
pub fn remove_lemma(program: &str, name: &str) -> Result<String, String> {
    let p = Program::parse(program).map_err(|e| e.to_string())?;
    let mut edits = Vec::new();
    if let Some(d) = p.decl(name) {
        edits.push(TextEdit::delete(decl_removal_range(&p.src, p.decl_range(d))));
    }
    let stmts = stmts_except(&p, Some(name)).map_err(|e| e.to_string())?;
    let is_call = |s: &Stmt| matches!(&s.kind, StmtKind::Call { callee } if callee == name);
    let mut covered: Vec<std::ops::Range<usize>> = Vec::new();
    for s in &stmts {
        let range = p.byte_range(s.first, s.last);
        if covered.iter().any(|r| r.start <= range.start && range.end <= r.end) {
            continue;
        }
        match &s.kind {
            StmtKind::Assert { expr, by: Some(b) } if !b.stmts.is_empty() && b.stmts.iter().all(is_call) => {
                edits.push(TextEdit::replace(p.tokens[expr.1].end..p.tokens[b.close].end, ";"));
                covered.push(range);
            }
            StmtKind::Assert { by: Some(b), .. } => {
                for c in b.stmts.iter().filter(|c| is_call(c)) {
                    edits.push(TextEdit::delete(p.tokens[c.first - 1].end..p.tokens[c.last].end));
                    covered.push(p.byte_range(c.first, c.last));
                }
            }
            _ if is_call(s) => {
                edits.push(TextEdit::delete(p.tokens[s.first - 1].end..p.tokens[s.last].end));
                covered.push(range);
            }
            StmtKind::If { blocks, .. }
                if blocks.iter().all(|b| !b.stmts.is_empty() && b.stmts.iter().all(is_call)) =>
            {
                edits.push(TextEdit::delete(p.tokens[s.first - 1].end..p.tokens[s.last].end));
                covered.push(range);
            }
            _ => {}
        }
    }
    Ok(apply_edits(&p.src, edits))
}

/// Every identifier-like word of `text`.
pub fn mentions(text: &str, name: &str) -> bool {
    crate::dafny::tokenize(text).is_ok_and(|ts| ts.iter().any(|t| t.text(text) == name))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ANNOTATED: &str = include_str!("../../tests/data/maxsub/annotated.dfy");

    #[test]
    fn assert_by_round_trip() {
        let p = "method M(s: seq<int>)\n  requires |s| > 2\n{\n  assert s[..2][..1] == s[..1];\n}\n";
        let q = add_assert_by(p, 4, "L(s);").unwrap();
        assert!(q.contains("  assert s[..2][..1] == s[..1] by { L(s); }\n"), "{q}");
        let r = add_assert_by(&q, 4, "K(s);").unwrap();
        assert!(r.contains("by { L(s); K(s); }"), "{r}");
        let back = remove_lemma(&remove_lemma(&r, "L").unwrap(), "K").unwrap();
        assert_eq!(back, p);
        assert_eq!(remove_assertion(p, 4).unwrap(), "method M(s: seq<int>)\n  requires |s| > 2\n{\n}\n");
    }

    #[test]
    fn lemma_removal_takes_guarded_calls_too() {
        let out = remove_lemma(ANNOTATED, "lemmaSeqSumExtend").unwrap();
        assert!(!out.contains("lemmaSeqSumExtend"));
        assert!(!out.contains("if end > 0"));
        assert!(Program::parse(&out).is_ok());
    }

    #[test]
    fn invariant_edits() {
        let (inv, lp) = invariant_at(ANNOTATED, 34).unwrap();
        assert_eq!(inv, "invariant curr == seqSum(slice[..end])");
        assert!(lp.starts_with("for end"));
        let q = insert_invariant_call(ANNOTATED, 34, "Keep(curr);", false).unwrap();
        assert!(q.contains("      assert seqSum(ints[start..start+end+1]) <= maxSum;\n      Keep(curr);\n    }"), "{q}");
        let q = insert_invariant_call(ANNOTATED, 34, "Init();", true).unwrap();
        assert!(q.contains("    Init();\n    for end"), "{q}");
        let q = remove_invariant(ANNOTATED, 34).unwrap();
        assert!(!q.contains("curr == seqSum"));
        assert!(Program::parse(&q).is_ok());
    }

    #[test]
    fn callee_listing() {
        let d = include_str!("../../tests/data/maxsub/decomposed_decoupled.dfy");
        assert_eq!(callees(d, "MaxSubImpl"), ["MaxSubImpl_loop1"]);
    }
}
