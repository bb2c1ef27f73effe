//! Mechanical loop lifting with full state sharing.
//!
//! Loops are lifted innermost first until every method holds at most one
//! loop. A lifted method receives every outer variable its statements use;
//! variables it assigns come back as results under their original names,
//! with the incoming value in a fresh `<name>0` parameter. Nothing here
//! invents a contract: the lifted methods come out with none.

use std::collections::HashSet;

use super::types::infer_type;
use super::RefactorError;
use crate::dafny::{expand_to_lines, indent_at, Block, Program, Stmt, StmtKind, TextEdit, TokKind};
use crate::model::DeclKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftOutput {
    pub program: String,
    /// Names of the lifted methods, in creation order.
    pub lifted: Vec<String>,
}

/// Lifts loops out of `method` until it and every method lifted from it
/// contain at most one loop. A method with at most one loop is returned unchanged.
pub fn lift_loops(program_text: &str, method: &str) -> Result<LiftOutput, RefactorError> {
    let mut src = program_text.to_string();
    let mut lifted: Vec<String> = Vec::new();
    for _ in 0..64 {
        let p = Program::parse(&src)?;
        if p.decl(method).is_none() {
            return Err(RefactorError::UnknownMethod(method.to_string()));
        }
        let mut target = None;
        for name in std::iter::once(method).chain(lifted.iter().map(String::as_str)) {
            let d = p.decl(name).expect("lifted methods exist");
            if let Some(body) = p.body(d)? {
                if body.loop_count() > 1 {
                    target = Some(name.to_string());
                    break;
                }
            }
        }
        let Some(target) = target else {
            return Ok(LiftOutput { program: src, lifted });
        };
        let (next, name) = lift_one(&p, &target, method)?;
        src = next;
        lifted.push(name);
    }
    Err(RefactorError::NotLiftable("loop nesting too deep".into()))
}

/// A run of statements `stmts[start..=end]` inside `block`.
struct Unit<'a> {
    block: &'a Block,
    start: usize,
    end: usize,
}

/// Innermost-first choice of what to lift next.
fn find_unit(body: &Block) -> Option<Unit<'_>> {
    fn nested(b: &Block) -> Option<Unit<'_>> {
        for s in &b.stmts {
            for child in s.child_blocks() {
                if let Some(u) = nested(child) {
                    return Some(u);
                }
            }
            if let StmtKind::Loop(l) = &s.kind {
                match l.body.loop_count() {
                    0 => {}
                    1 => return Some(Unit { block: &l.body, start: 0, end: l.body.stmts.len() - 1 }),
                    _ => return first_loop(&l.body, 0),
                }
            }
        }
        None
    }
    if let Some(u) = nested(body) {
        return Some(u);
    }
    // Only sequential loops left: keep the first, lift the next.
    if body.loop_count() > 1 {
        return first_loop(body, 1);
    }
    None
}

/// The `skip`-th loop statement in pre-order together with its block.
fn first_loop(b: &Block, skip: usize) -> Option<Unit<'_>> {
    fn go<'a>(b: &'a Block, seen: &mut usize, skip: usize) -> Option<Unit<'a>> {
        for (i, s) in b.stmts.iter().enumerate() {
            if matches!(s.kind, StmtKind::Loop(_)) {
                if *seen == skip {
                    return Some(Unit { block: b, start: i, end: i });
                }
                *seen += 1;
                continue;
            }
            for c in s.child_blocks() {
                if let Some(u) = go(c, seen, skip) {
                    return Some(u);
                }
            }
        }
        None
    }
    go(b, &mut 0, skip)
}

#[derive(Debug, Clone)]
struct Var {
    name: String,
    ty: Option<String>,
}

struct Scope<'a> {
    p: &'a Program,
    vars: Vec<Var>,
}

impl Scope<'_> {
    fn lookup(&self, name: &str) -> Option<String> {
        self.vars.iter().rev().find(|v| v.name == name).and_then(|v| v.ty.clone())
    }

    fn infer(&self, expr: &str) -> Option<String> {
        let p = self.p;
        let functions = |f: &str| {
            p.decl(f).and_then(|d| match d.kind {
                DeclKind::Predicate => Some("bool".to_string()),
                DeclKind::Function | DeclKind::Method => d.signature.returns.first().map(|r| r.ty.clone()),
                DeclKind::Lemma => None,
            })
        };
        infer_type(expr, &|v| self.lookup(v), &functions)
    }

    fn add_var_decl(&mut self, s: &Stmt) {
        let StmtKind::VarDecl { names, .. } = &s.kind else { return };
        let p = self.p;
        let mut j = s.first;
        while p.text(j) != "var" {
            j += 1;
        }
        let text = p.slice(j + 1, s.last).trim_end_matches(';');
        let (lhs, rhs) = match text.split_once(":=") {
            Some((l, r)) => (l, Some(r)),
            None => (text, None),
        };
        let rhs_parts: Vec<&str> = rhs.map(split_top_commas).unwrap_or_default();
        let lhs_parts = split_top_commas(lhs);
        for (i, name) in names.iter().enumerate() {
            let declared = lhs_parts.get(i).and_then(|part| part.split_once(':')).map(|(_, t)| t.trim().to_string());
            let ty = declared.or_else(|| {
                if rhs_parts.len() == names.len() {
                    self.infer(rhs_parts[i])
                } else {
                    None
                }
            });
            self.vars.push(Var { name: name.clone(), ty });
        }
    }

    /// Pushes the declarations visible at `target` by walking down from `b`.
    fn enter(&mut self, b: &Block, target: &Block, upto: usize) -> bool {
        if std::ptr::eq(b, target) {
            for s in &b.stmts[..upto] {
                self.add_var_decl(s);
            }
            return true;
        }
        for s in &b.stmts {
            let mark = self.vars.len();
            if let StmtKind::Loop(l) = &s.kind {
                if let Some(v) = &l.index_var {
                    let from = loop_start_expr(self.p, l.header);
                    let ty = from.and_then(|e| self.infer(&e)).unwrap_or_else(|| "int".to_string());
                    self.vars.push(Var { name: v.clone(), ty: Some(ty) });
                }
            }
            for c in s.child_blocks() {
                if self.enter(c, target, upto) {
                    return true;
                }
            }
            self.vars.truncate(mark);
            self.add_var_decl(s);
        }
        false
    }
}

/// `a` in `i := a to b` / `i := a downto b`.
fn loop_start_expr(p: &Program, header: (usize, usize)) -> Option<String> {
    let (lo, hi) = header;
    let assign = (lo..=hi).find(|&j| p.text(j) == ":=")?;
    let stop = (assign + 1..=hi).find(|&j| matches!(p.text(j), "to" | "downto"))?;
    (assign < stop - 1 || assign + 1 < stop).then(|| p.slice(assign + 1, stop - 1).to_string())
}

fn split_top_commas(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' | '{' | '<' => depth += 1,
            ')' | ']' | '}' | '>' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

fn lift_one(p: &Program, method: &str, root: &str) -> Result<(String, String), RefactorError> {
    let src = &p.src;
    let d = p.decl(method).ok_or_else(|| RefactorError::UnknownMethod(method.to_string()))?;
    let body = p.body(d)?.ok_or_else(|| RefactorError::NotLiftable(format!("`{method}` has no body")))?;
    let unit = find_unit(&body).ok_or_else(|| RefactorError::NotLiftable("no loop to lift".into()))?;
    let stmts = &unit.block.stmts[unit.start..=unit.end];
    let (first, last) = (stmts[0].first, stmts[stmts.len() - 1].last);

    let mut scope = Scope { p, vars: Vec::new() };
    for prm in d.signature.parameters.iter().chain(&d.signature.returns) {
        scope.vars.push(Var { name: prm.name.clone(), ty: Some(prm.ty.clone()) });
    }
    if !scope.enter(&body, unit.block, unit.start) {
        return Err(RefactorError::Internal("lifting unit not found in its method".into()));
    }

    let mut inside: HashSet<String> = HashSet::new();
    let mut written: Vec<String> = Vec::new();
    let mut modifies: Vec<String> = Vec::new();
    let visible = |n: &str| scope.vars.iter().any(|v| v.name == n);
    for s in stmts.iter().flat_map(|s| std::iter::once(s).chain(s.child_blocks().into_iter().flat_map(|b| b.walk()))) {
        match &s.kind {
            StmtKind::Return => return Err(RefactorError::NotLiftable("the loop contains a return statement".into())),
            StmtKind::VarDecl { names, .. } => inside.extend(names.iter().cloned()),
            StmtKind::Loop(l) => inside.extend(l.index_var.iter().cloned()),
            StmtKind::Assign { targets, .. } => {
                for t in targets {
                    if visible(t) {
                        if !written.contains(t) {
                            written.push(t.clone());
                        }
                    } else if let Some(base) = t.split(['[', '.']).next().map(str::trim) {
                        let ty = scope.lookup(base).unwrap_or_default();
                        if ty.starts_with("array") {
                            if !modifies.contains(&base.to_string()) {
                                modifies.push(base.to_string());
                            }
                        } else if visible(base) {
                            return Err(RefactorError::NotLiftable(format!("cannot lift an update of `{t}`")));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    if has_escaping_jump(p, stmts) {
        return Err(RefactorError::NotLiftable("the lifted statements break out of an enclosing loop".into()));
    }
    let mut used: Vec<String> = Vec::new();
    for i in first..=last {
        let t = p.text(i);
        if p.tokens[i].kind == TokKind::Ident && (i == 0 || p.text(i - 1) != ".") && !inside.contains(t) && visible(t) && !used.iter().any(|u| u == t) {
            used.push(t.to_string());
        }
    }
    written.retain(|w| !inside.contains(w));
    // Parameters in declaration order, accumulators last.
    let order = |n: &String| scope.vars.iter().position(|v| &v.name == n).unwrap_or(usize::MAX);
    let mut reads: Vec<String> = used.iter().filter(|u| !written.contains(u)).cloned().collect();
    reads.sort_by_key(order);
    written.sort_by_key(order);

    let taken: HashSet<&str> = (0..p.tokens.len()).filter(|&i| p.tokens[i].kind == TokKind::Ident).map(|i| p.text(i)).collect();
    let name = (1..).map(|k| format!("{root}_loop{k}")).find(|n| !taken.contains(n.as_str())).expect("unbounded");
    let ty_of = |v: &str| scope.lookup(v).ok_or_else(|| RefactorError::NotLiftable(format!("cannot infer the type of `{v}`")));

    let mut params = Vec::new();
    let mut args = Vec::new();
    for r in &reads {
        params.push(format!("{r}: {}", ty_of(r)?));
        args.push(r.clone());
    }
    let mut copies = Vec::new();
    for w in &written {
        let mut incoming = format!("{w}0");
        while taken.contains(incoming.as_str()) || visible(&incoming) {
            incoming.push('0');
        }
        params.push(format!("{incoming}: {}", ty_of(w)?));
        args.push(w.clone());
        copies.push(format!("  {w} := {incoming};\n"));
    }
    let returns: Vec<String> = written.iter().map(|w| ty_of(w).map(|t| format!("{w}: {t}"))).collect::<Result<_, _>>()?;

    let mut text = format!("method {name}({})", params.join(", "));
    if !returns.is_empty() {
        text.push_str(&format!(" returns ({})", returns.join(", ")));
    }
    text.push('\n');
    for m in &modifies {
        text.push_str(&format!("  modifies {m}\n"));
    }
    text.push_str("{\n");
    for c in &copies {
        text.push_str(c);
    }
    let unit_lines = expand_to_lines(src, p.byte_range(first, last));
    text.push_str(&reindent(&src[unit_lines.clone()], "  "));
    if !text.ends_with('\n') {
        text.push('\n');
    }
    text.push('}');

    let indent = indent_at(src, p.tokens[first].start).to_string();
    let call = if written.is_empty() {
        format!("{indent}{name}({});\n", args.join(", "))
    } else {
        format!("{indent}{} := {name}({});\n", written.join(", "), args.join(", "))
    };
    let decl_end = p.decl_range(d).end;
    let edits = vec![TextEdit::replace(unit_lines, call), TextEdit::insert(decl_end, format!("\n\n{text}"))];
    Ok((crate::dafny::apply_edits(src, edits), name))
}

/// `break`/`continue` in the lifted statements that is not inside a loop
/// of those statements.
fn has_escaping_jump(p: &Program, stmts: &[Stmt]) -> bool {
    fn go(p: &Program, s: &Stmt) -> bool {
        match &s.kind {
            StmtKind::Loop(_) => false,
            StmtKind::Other { blocks } if blocks.is_empty() => matches!(p.text(s.first), "break" | "continue"),
            _ => s.child_blocks().iter().any(|b| b.stmts.iter().any(|c| go(p, c))),
        }
    }
    stmts.iter().any(|s| go(p, s))
}

/// Re-indents whole lines so the first line starts with `base`.
pub(crate) fn reindent(text: &str, base: &str) -> String {
    let first_indent = text.lines().find(|l| !l.trim().is_empty()).map_or(0, |l| l.len() - l.trim_start().len());
    let mut out = String::new();
    for line in text.split_inclusive('\n') {
        let content = line.trim_end_matches('\n');
        if content.trim().is_empty() {
            out.push_str(if line.ends_with('\n') { "\n" } else { "" });
            continue;
        }
        let lead = content.len() - content.trim_start().len();
        let cut = lead.min(first_indent);
        out.push_str(base);
        out.push_str(&content[cut..]);
        if line.ends_with('\n') {
            out.push('\n');
        }
    }
    out
}
