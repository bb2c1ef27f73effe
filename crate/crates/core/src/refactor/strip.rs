use std::collections::HashSet;
use std::ops::Range;

use super::RefactorError;
use crate::dafny::{expand_to_lines, Block, LoopStmt, Program, Stmt, StmtKind, TextEdit};
use crate::model::DeclKind;

/// Removes proof-only code: loop invariants, assertions, calc and forall
/// proof statements, reveals, ghost locals, lemma declarations and their
/// calls, and `decreases` hints on methods and loops. Contracts
/// (requires/ensures), functions and predicates are kept as written.
pub fn strip_annotations(program_text: &str) -> Result<String, RefactorError> {
    let mut current = program_text.to_string();
    // Removing a lemma call can leave an `if` whose branches are now empty
    // of code, so iterate to a fixpoint. Two passes suffice in practice.
    for _ in 0..8 {
        let next = strip_once(&current)?;
        if next == current {
            break;
        }
        current = next;
    }
    Program::parse(&current).map_err(|e| RefactorError::Internal(format!("stripping produced unparsable code: {e}")))?;
    Ok(current)
}

/// Token texts of the executable part of a program: what is left after
/// stripping, so two programs that differ only in annotations compare equal.
pub fn executable_tokens(program_text: &str) -> Result<Vec<String>, RefactorError> {
    let stripped = strip_annotations(program_text)?;
    let p = Program::parse(&stripped)?;
    Ok((0..p.tokens.len()).map(|i| p.text(i).to_string()).collect())
}

/// Whether `candidate` keeps every executable token of `original`, in order,
/// and adds none.
pub fn same_executable_code(original: &str, candidate: &str) -> Result<bool, RefactorError> {
    Ok(executable_tokens(original)? == executable_tokens(candidate)?)
}

fn strip_once(src: &str) -> Result<String, RefactorError> {
    let p = Program::parse(src)?;
    let lemmas: HashSet<&str> = p.decls.iter().filter(|d| d.kind == DeclKind::Lemma).map(|d| d.name.as_str()).collect();
    let mut edits = Vec::new();
    for d in &p.decls {
        if d.kind == DeclKind::Lemma {
            edits.push(TextEdit::delete(decl_removal_range(src, p.decl_range(d))));
            continue;
        }
        if d.kind != DeclKind::Method {
            continue;
        }
        for &(kw, last) in &d.clauses {
            if is_proof_clause(&p, kw, last) {
                edits.push(TextEdit::delete(expand_to_lines(src, p.byte_range(kw, last))));
            }
        }
        if let Some(body) = p.body(d)? {
            let ghosts: HashSet<String> = body
                .walk()
                .iter()
                .filter_map(|s| match &s.kind {
                    StmtKind::VarDecl { names, ghost: true, .. } => Some(names.clone()),
                    _ => None,
                })
                .flatten()
                .collect();
            let ctx = Ctx { p: &p, lemmas: &lemmas, ghosts: &ghosts };
            ctx.strip_block(&body, &mut edits);
        }
    }
    Ok(crate::dafny::apply_edits(src, edits))
}

/// `invariant ...` and `decreases ...`, except `decreases *`, which changes
/// what the method is allowed to do rather than helping a proof.
fn is_proof_clause(p: &Program, kw: usize, last: usize) -> bool {
    match p.text(kw) {
        "invariant" => true,
        "decreases" => !(last == kw + 1 && p.text(last) == "*"),
        _ => false,
    }
}

/// The declaration's lines plus one adjacent blank line, so removing a
/// lemma leaves the surrounding spacing as it was before it was added.
pub(crate) fn decl_removal_range(src: &str, range: Range<usize>) -> Range<usize> {
    let mut r = expand_to_lines(src, range);
    let next_line_end = src[r.end..].find('\n').map(|i| r.end + i + 1);
    if let Some(end) = next_line_end.filter(|&e| src[r.end..e].trim().is_empty()) {
        r.end = end;
    } else if r.start > 0 {
        let prev_start = src[..r.start - 1].rfind('\n').map_or(0, |i| i + 1);
        if src[prev_start..r.start].trim().is_empty() {
            r.start = prev_start;
        }
    }
    r
}

struct Ctx<'a> {
    p: &'a Program,
    lemmas: &'a HashSet<&'a str>,
    ghosts: &'a HashSet<String>,
}

impl Ctx<'_> {
    fn removable(&self, s: &Stmt) -> bool {
        match &s.kind {
            StmtKind::Assert { .. } | StmtKind::Calc | StmtKind::Forall { .. } | StmtKind::Reveal => true,
            StmtKind::Call { callee } => self.lemmas.contains(callee.as_str()),
            StmtKind::VarDecl { ghost, .. } => *ghost,
            StmtKind::Assign { targets, .. } => !targets.is_empty() && targets.iter().all(|t| self.ghosts.contains(t)),
            StmtKind::If { blocks, .. } => self.only_annotations(blocks.iter()),
            StmtKind::Block(b) => self.only_annotations(std::iter::once(b)),
            _ => false,
        }
    }

    /// Non-empty blocks holding nothing but removable statements.
    fn only_annotations<'b>(&self, blocks: impl Iterator<Item = &'b Block>) -> bool {
        let mut any = false;
        for b in blocks {
            for s in &b.stmts {
                if !self.removable(s) {
                    return false;
                }
                any = true;
            }
        }
        any
    }

    fn strip_block(&self, block: &Block, edits: &mut Vec<TextEdit>) {
        let src = &self.p.src;
        for s in &block.stmts {
            if self.removable(s) {
                edits.push(TextEdit::delete(expand_to_lines(src, self.p.byte_range(s.first, s.last))));
                continue;
            }
            if let StmtKind::Loop(l) = &s.kind {
                self.strip_loop_clauses(l, edits);
            }
            for b in s.child_blocks() {
                self.strip_block(b, edits);
            }
        }
    }

    fn strip_loop_clauses(&self, l: &LoopStmt, edits: &mut Vec<TextEdit>) {
        let p = self.p;
        let proof: Vec<bool> = l.clauses.iter().map(|c| is_proof_clause(p, c.keyword, c.last)).collect();
        if proof.is_empty() || !proof.iter().any(|&b| b) {
            return;
        }
        if proof.iter().all(|&b| b) {
            // Pull the body brace back onto the header line.
            let from = p.tokens[l.header.1].end;
            let to = p.tokens[l.body.open].start;
            edits.push(TextEdit::replace(from..to, " "));
            return;
        }
        for (c, is_proof) in l.clauses.iter().zip(proof) {
            if is_proof {
                edits.push(TextEdit::delete(expand_to_lines(&p.src, p.byte_range(c.keyword, c.last))));
            }
        }
    }
}
