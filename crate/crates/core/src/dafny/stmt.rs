use super::{brace_continues_expression, Program, SyntaxError, TokKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub open: usize,
    pub close: usize,
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub first: usize,
    pub last: usize,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopKind {
    While,
    For,
}

/// A loop specification clause: keyword token and last expression token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clause {
    pub keyword: usize,
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopStmt {
    pub kind: LoopKind,
    /// Tokens between the keyword and the first clause or body (inclusive),
    /// e.g. `i < n` or `end := 0 to |slice|`.
    pub header: (usize, usize),
    pub clauses: Vec<Clause>,
    pub body: Block,
    /// Index variable of a `for` loop.
    pub index_var: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Loop(LoopStmt),
    If { guard: Option<(usize, usize)>, blocks: Vec<Block> },
    /// `assert E;` or `assert E by { ... }`. `expr` excludes attributes.
    Assert { expr: (usize, usize), by: Option<Block> },
    Assume,
    Calc,
    /// `forall x | P ensures Q { ... }` proof statement.
    Forall { body: Option<Block> },
    Block(Block),
    VarDecl { names: Vec<String>, ghost: bool, rhs_call: Option<String> },
    Assign { targets: Vec<String>, rhs_call: Option<String> },
    Call { callee: String },
    Return,
    Reveal,
    Other { blocks: Vec<Block> },
}

impl Stmt {
    /// Loops directly inside this statement, including those in nested blocks.
    pub fn loops(&self) -> Vec<&LoopStmt> {
        let mut out = Vec::new();
        collect_loops(self, &mut out);
        out
    }

    pub fn child_blocks(&self) -> Vec<&Block> {
        match &self.kind {
            StmtKind::Loop(l) => vec![&l.body],
            StmtKind::If { blocks, .. } | StmtKind::Other { blocks } => blocks.iter().collect(),
            StmtKind::Assert { by: Some(b), .. } | StmtKind::Forall { body: Some(b) } | StmtKind::Block(b) => vec![b],
            _ => Vec::new(),
        }
    }
}

fn collect_loops<'a>(s: &'a Stmt, out: &mut Vec<&'a LoopStmt>) {
    if let StmtKind::Loop(l) = &s.kind {
        out.push(l);
    }
    for b in s.child_blocks() {
        for st in &b.stmts {
            collect_loops(st, out);
        }
    }
}

impl Block {
    /// Every statement in this block and nested blocks, pre-order.
    pub fn walk(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        fn go<'a>(b: &'a Block, out: &mut Vec<&'a Stmt>) {
            for s in &b.stmts {
                out.push(s);
                for c in s.child_blocks() {
                    go(c, out);
                }
            }
        }
        go(self, &mut out);
        out
    }

    pub fn loop_count(&self) -> usize {
        self.walk().iter().filter(|s| matches!(s.kind, StmtKind::Loop(_))).count()
    }
}

const LOOP_CLAUSES: &[&str] = &["invariant", "decreases", "modifies"];

pub(super) fn parse_block(p: &Program, open: usize) -> Result<Block, SyntaxError> {
    let close = p.matching(open)?;
    let mut stmts = Vec::new();
    let mut i = open + 1;
    while i < close {
        let s = parse_stmt(p, i, close)?;
        i = s.last + 1;
        stmts.push(s);
    }
    Ok(Block { open, close, stmts })
}

fn is_attr(p: &Program, i: usize) -> bool {
    i + 1 < p.tokens.len() && p.text(i) == "{" && p.text(i + 1) == ":"
}

fn skip_attrs(p: &Program, mut i: usize, hi: usize) -> Result<usize, SyntaxError> {
    while i < hi && is_attr(p, i) {
        i = p.matching(i)? + 1;
    }
    Ok(i)
}

/// Last token of a simple statement: the `;` at depth zero, or the token
/// before `hi` when the statement is unterminated.
fn to_semicolon(p: &Program, i: usize, hi: usize) -> Result<usize, SyntaxError> {
    let mut j = i;
    while j < hi {
        match p.text(j) {
            ";" => return Ok(j),
            "(" | "[" | "{" => j = p.matching(j)? + 1,
            _ => j += 1,
        }
    }
    Ok(hi - 1)
}

/// Scans a guard or header expression up to the `{` opening its block.
/// Returns the index of that brace.
fn to_block_brace(p: &Program, start: usize, hi: usize, stops: &[&str]) -> Result<usize, SyntaxError> {
    let mut j = start;
    while j < hi {
        let t = p.text(j);
        if p.tokens[j].kind == TokKind::Ident && stops.contains(&t) {
            return Ok(j);
        }
        match t {
            "(" | "[" => j = p.matching(j)? + 1,
            "{" if is_attr(p, j) => j = p.matching(j)? + 1,
            "{" => {
                if j == start || !brace_continues_expression(p.text(j - 1)) {
                    return Ok(j);
                }
                j = p.matching(j)? + 1;
            }
            _ => j += 1,
        }
    }
    Err(p.error_at(start, "expected `{`"))
}

fn parse_stmt(p: &Program, i: usize, hi: usize) -> Result<Stmt, SyntaxError> {
    let t = p.text(i);
    let simple = |kind: StmtKind| -> Result<Stmt, SyntaxError> { Ok(Stmt { first: i, last: to_semicolon(p, i, hi)?, kind }) };
    match t {
        ";" => Ok(Stmt { first: i, last: i, kind: StmtKind::Other { blocks: vec![] } }),
        "{" => {
            let b = parse_block(p, i)?;
            Ok(Stmt { first: i, last: b.close, kind: StmtKind::Block(b) })
        }
        "label" if i + 2 < hi && p.text(i + 2) == ":" => {
            let inner = parse_stmt(p, i + 3, hi)?;
            Ok(Stmt { first: i, ..inner })
        }
        "ghost" if i + 1 < hi && p.text(i + 1) == "var" => {
            let s = parse_var(p, i + 1, hi, true)?;
            Ok(Stmt { first: i, ..s })
        }
        "var" => parse_var(p, i, hi, false),
        "if" => parse_if(p, i, hi),
        "while" | "for" => parse_loop(p, i, hi),
        "assert" => {
            let e0 = skip_attrs(p, i + 1, hi)?;
            let mut j = e0;
            while j < hi {
                match p.text(j) {
                    ";" => break,
                    "by" if p.tokens[j].kind == TokKind::Ident => break,
                    "(" | "[" | "{" => j = p.matching(j)? + 1,
                    _ => j += 1,
                }
            }
            if j < hi && p.text(j) == "by" {
                let b = parse_block(p, j + 1)?;
                let mut last = b.close;
                if last + 1 < hi && p.text(last + 1) == ";" {
                    last += 1;
                }
                Ok(Stmt { first: i, last, kind: StmtKind::Assert { expr: (e0, j - 1), by: Some(b) } })
            } else {
                let last = j.min(hi - 1);
                Ok(Stmt { first: i, last, kind: StmtKind::Assert { expr: (e0, last - 1), by: None } })
            }
        }
        "assume" => simple(StmtKind::Assume),
        "reveal" => simple(StmtKind::Reveal),
        "return" => simple(StmtKind::Return),
        "calc" => {
            let mut j = i + 1;
            while j < hi && p.text(j) != "{" || is_attr(p, j) {
                j = if is_attr(p, j) { p.matching(j)? + 1 } else { j + 1 };
            }
            let close = p.matching(j)?;
            let last = if close + 1 < hi && p.text(close + 1) == ";" { close + 1 } else { close };
            Ok(Stmt { first: i, last, kind: StmtKind::Calc })
        }
        "forall" => {
            let mut j = i + 1;
            let mut body = None;
            let mut last = hi - 1;
            while j < hi {
                match p.text(j) {
                    ";" => {
                        last = j;
                        break;
                    }
                    "(" | "[" => j = p.matching(j)? + 1,
                    "{" if is_attr(p, j) || brace_continues_expression(p.text(j - 1)) => j = p.matching(j)? + 1,
                    "{" => {
                        let b = parse_block(p, j)?;
                        last = b.close;
                        body = Some(b);
                        break;
                    }
                    _ => j += 1,
                }
            }
            Ok(Stmt { first: i, last, kind: StmtKind::Forall { body } })
        }
        "match" => {
            let brace = to_block_brace(p, i + 1, hi, &[])?;
            let close = p.matching(brace)?;
            let blocks = case_blocks(p, brace, close)?;
            Ok(Stmt { first: i, last: close, kind: StmtKind::Other { blocks } })
        }
        _ => {
            let last = to_semicolon(p, i, hi)?;
            Ok(Stmt { first: i, last, kind: classify_simple(p, i, last) })
        }
    }
}

/// Case arms of a `match`/`if case` block, each as a pseudo-block so nested
/// statements stay reachable. Arms are parsed leniently.
fn case_blocks(p: &Program, open: usize, close: usize) -> Result<Vec<Block>, SyntaxError> {
    let mut out = Vec::new();
    let mut j = open + 1;
    while j < close {
        if p.text(j) == "=>" {
            let start = j;
            let mut stmts = Vec::new();
            let mut k = j + 1;
            while k < close && p.text(k) != "case" {
                let s = parse_stmt(p, k, close)?;
                k = s.last + 1;
                stmts.push(s);
            }
            out.push(Block { open: start, close: k, stmts });
            j = k;
        } else {
            j = match p.text(j) {
                "(" | "[" | "{" => p.matching(j)? + 1,
                _ => j + 1,
            };
        }
    }
    Ok(out)
}

fn parse_var(p: &Program, i: usize, hi: usize, ghost: bool) -> Result<Stmt, SyntaxError> {
    let last = to_semicolon(p, i, hi)?;
    let mut names = Vec::new();
    let mut j = i + 1;
    let mut expect_name = true;
    let mut depth = 0i32;
    let mut rhs = None;
    while j <= last {
        let t = p.text(j);
        match t {
            ":=" | ":|" if depth == 0 => {
                rhs = Some(j + 1);
                break;
            }
            "(" | "[" | "<" => depth += 1,
            ")" | "]" | ">" => depth -= 1,
            "," if depth == 0 => expect_name = true,
            _ if expect_name && p.tokens[j].kind == TokKind::Ident => {
                names.push(t.to_string());
                expect_name = false;
            }
            _ => {}
        }
        j += 1;
    }
    let rhs_call = rhs.and_then(|r| call_name(p, r, last));
    Ok(Stmt { first: i, last, kind: StmtKind::VarDecl { names, ghost, rhs_call } })
}

/// `Name(args)` or `Name<T>(args)` filling the whole range (ignoring a
/// trailing `;`).
fn call_name(p: &Program, first: usize, last: usize) -> Option<String> {
    let end = if p.text(last) == ";" { last.checked_sub(1)? } else { last };
    if first > end || p.tokens[first].kind != TokKind::Ident || super::is_reserved(p.text(first)) {
        return None;
    }
    let mut j = first + 1;
    while j <= end && p.text(j) == "." && j < end && p.tokens[j + 1].kind == TokKind::Ident {
        j += 2;
    }
    if j <= end && p.text(j) == "(" && p.matching(j).ok()? == end {
        Some(p.slice(first, j - 1).to_string())
    } else {
        None
    }
}

fn classify_simple(p: &Program, first: usize, last: usize) -> StmtKind {
    let mut j = first;
    let mut depth = 0i32;
    while j <= last {
        match p.text(j) {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            ":=" | ":|" if depth == 0 => {
                let targets = p
                    .slice(first, j - 1)
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                return StmtKind::Assign { targets, rhs_call: call_name(p, j + 1, last) };
            }
            _ => {}
        }
        j += 1;
    }
    match call_name(p, first, last) {
        Some(callee) => StmtKind::Call { callee },
        None => StmtKind::Other { blocks: vec![] },
    }
}

fn parse_if(p: &Program, i: usize, hi: usize) -> Result<Stmt, SyntaxError> {
    if p.text(i + 1) == "{" && !is_attr(p, i + 1) {
        // Alternative form: `if { case g => ... }`.
        let close = p.matching(i + 1)?;
        let blocks = case_blocks(p, i + 1, close)?;
        return Ok(Stmt { first: i, last: close, kind: StmtKind::If { guard: None, blocks } });
    }
    let brace = to_block_brace(p, i + 1, hi, &[])?;
    let mut blocks = vec![parse_block(p, brace)?];
    let guard = Some((i + 1, brace - 1));
    let mut last = blocks[0].close;
    if last + 1 < hi && p.text(last + 1) == "else" {
        let e = last + 1;
        if p.text(e + 1) == "if" {
            let nested = parse_if(p, e + 1, hi)?;
            last = nested.last;
            blocks.push(Block { open: e + 1, close: nested.last, stmts: vec![nested] });
        } else {
            let b = parse_block(p, e + 1)?;
            last = b.close;
            blocks.push(b);
        }
    }
    Ok(Stmt { first: i, last, kind: StmtKind::If { guard, blocks } })
}

fn parse_loop(p: &Program, i: usize, hi: usize) -> Result<Stmt, SyntaxError> {
    let kind = if p.text(i) == "for" { LoopKind::For } else { LoopKind::While };
    let index_var = (kind == LoopKind::For).then(|| p.text(i + 1).to_string());
    let stop = to_block_brace(p, i + 1, hi, LOOP_CLAUSES)?;
    let header = (i + 1, stop - 1);
    let mut clauses = Vec::new();
    let mut j = stop;
    while j < hi && LOOP_CLAUSES.contains(&p.text(j)) {
        let end = if p.text(j) == "decreases" && j + 1 < hi && p.text(j + 1) == "*" {
            j + 2
        } else {
            to_block_brace(p, j + 1, hi, LOOP_CLAUSES)?
        };
        clauses.push(Clause { keyword: j, last: end - 1 });
        j = end;
    }
    if p.text(j) != "{" {
        return Err(p.error_at(j, "expected loop body"));
    }
    let body = parse_block(p, j)?;
    Ok(Stmt { first: i, last: body.close, kind: StmtKind::Loop(LoopStmt { kind, header, clauses, body, index_var }) })
}
