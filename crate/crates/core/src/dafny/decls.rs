use super::{brace_continues_expression, Program, SyntaxError, TokKind};
use crate::model::{DeclKind, MethodSignature, Param};

/// A callable found in the source, described by token indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub name: String,
    pub kind: DeclKind,
    /// First modifier or keyword token.
    pub first_tok: usize,
    pub keyword_tok: usize,
    pub name_tok: usize,
    /// Header clauses as (keyword token, last token) pairs.
    pub clauses: Vec<(usize, usize)>,
    /// `{` and `}` token indices of the body.
    pub body: Option<(usize, usize)>,
    pub last_tok: usize,
    pub signature: MethodSignature,
    pub ghost: bool,
    pub has_axiom_attr: bool,
    /// Enclosing module or class, innermost.
    pub container: Option<String>,
}

impl Decl {
    pub fn is_bodiless(&self) -> bool {
        self.body.is_none()
    }

    /// Last token of the header (before the body, or the whole decl).
    pub fn header_last(&self) -> usize {
        match self.body {
            Some((open, _)) => open - 1,
            None => self.last_tok,
        }
    }
}

const MODIFIERS: &[&str] =
    &["ghost", "static", "twostate", "least", "greatest", "inductive", "opaque", "abstract", "private", "export"];
const CALLABLES: &[&str] =
    &["method", "lemma", "function", "predicate", "constructor", "colemma", "copredicate"];
const CONTAINERS: &[&str] = &["module", "class", "trait"];
const OTHER_DECLS: &[&str] =
    &["datatype", "codatatype", "type", "newtype", "const", "var", "import", "include", "iterator"];
const HEADER_CLAUSES: &[&str] = &["requires", "ensures", "modifies", "reads", "decreases"];

fn starts_decl(p: &Program, i: usize) -> bool {
    let t = p.text(i);
    p.tokens[i].kind == TokKind::Ident
        && (MODIFIERS.contains(&t) || CALLABLES.contains(&t) || CONTAINERS.contains(&t) || OTHER_DECLS.contains(&t))
}

fn is_attr(p: &Program, i: usize) -> bool {
    i + 1 < p.tokens.len() && p.text(i) == "{" && p.text(i + 1) == ":"
}

pub(super) fn scan(p: &Program) -> Result<(Vec<Decl>, Vec<String>), SyntaxError> {
    let mut decls = Vec::new();
    let mut others = Vec::new();
    scan_range(p, 0, p.tokens.len(), None, &mut decls, &mut others)?;
    Ok((decls, others))
}

fn scan_range(
    p: &Program,
    lo: usize,
    hi: usize,
    container: Option<&str>,
    decls: &mut Vec<Decl>,
    others: &mut Vec<String>,
) -> Result<(), SyntaxError> {
    let mut i = lo;
    let mut pending: Option<usize> = None;
    while i < hi {
        let t = p.text(i);
        if p.tokens[i].kind == TokKind::Ident && MODIFIERS.contains(&t) {
            pending.get_or_insert(i);
            i += 1;
        } else if is_attr(p, i) {
            i = p.matching(i)? + 1;
        } else if p.tokens[i].kind == TokKind::Ident && CALLABLES.contains(&t) {
            let d = parse_callable(p, pending.take().unwrap_or(i), i, hi, container)?;
            i = d.last_tok + 1;
            decls.push(d);
        } else if p.tokens[i].kind == TokKind::Ident && CONTAINERS.contains(&t) {
            pending = None;
            let mut j = i + 1;
            while j < hi && is_attr(p, j) {
                j = p.matching(j)? + 1;
            }
            let name = if j < hi { p.text(j).to_string() } else { String::new() };
            others.push(name.clone());
            while j < hi && p.text(j) != "{" {
                j += 1;
            }
            if j >= hi {
                return Err(p.error_at(i, format!("`{t}` without a body")));
            }
            let close = p.matching(j)?;
            scan_range(p, j + 1, close, Some(&name), decls, others)?;
            i = close + 1;
        } else if p.tokens[i].kind == TokKind::Ident && OTHER_DECLS.contains(&t) {
            pending = None;
            let mut j = i + 1;
            while j < hi && (is_attr(p, j) || p.text(j) == "opened" || p.text(j) == "ghost") {
                j = if is_attr(p, j) { p.matching(j)? + 1 } else { j + 1 };
            }
            if j < hi && p.tokens[j].kind == TokKind::Ident {
                others.push(p.text(j).to_string());
            }
            // Skip to the next declaration start at this nesting level.
            while j < hi && !starts_decl(p, j) {
                j = match p.text(j) {
                    "(" | "[" | "{" => p.matching(j)? + 1,
                    _ => j + 1,
                };
            }
            i = j;
        } else {
            pending = None;
            i += 1;
        }
    }
    Ok(())
}

fn parse_callable(
    p: &Program,
    first: usize,
    kw: usize,
    hi: usize,
    container: Option<&str>,
) -> Result<Decl, SyntaxError> {
    let kw_text = p.text(kw);
    let kind = match kw_text {
        "method" | "constructor" => DeclKind::Method,
        "lemma" | "colemma" => DeclKind::Lemma,
        "function" => DeclKind::Function,
        _ => DeclKind::Predicate,
    };
    let ghost = p.slice(first, kw).split_whitespace().any(|w| w == "ghost") || kind == DeclKind::Lemma;
    let mut j = kw + 1;
    if matches!(kind, DeclKind::Function | DeclKind::Predicate) && j < hi && p.text(j) == "method" {
        j += 1;
    }
    let mut has_axiom_attr = false;
    while j < hi && is_attr(p, j) {
        let close = p.matching(j)?;
        if p.slice(j, close).contains("axiom") {
            has_axiom_attr = true;
        }
        j = close + 1;
    }
    let name_tok = j;
    let name = if j < hi && p.tokens[j].kind == TokKind::Ident && p.text(j) != "(" {
        p.text(j).to_string()
    } else if kw_text == "constructor" {
        String::from("constructor")
    } else {
        return Err(p.error_at(j, format!("expected a name after `{kw_text}`")));
    };
    if p.tokens[j].kind == TokKind::Ident {
        j += 1;
    }
    if j < hi && p.text(j) == "<" {
        j = skip_angle(p, j, hi)?;
    }
    if j >= hi || p.text(j) != "(" {
        return Err(p.error_at(j, format!("expected `(` after `{name}`")));
    }
    let close = p.matching(j)?;
    let parameters = parse_params(p, j + 1, close);
    j = close + 1;

    let mut returns = Vec::new();
    if j < hi && p.text(j) == "returns" {
        j += 1;
        if j >= hi || p.text(j) != "(" {
            return Err(p.error_at(j, "expected `(` after `returns`"));
        }
        let close = p.matching(j)?;
        returns = parse_params(p, j + 1, close);
        j = close + 1;
    } else if j < hi && p.text(j) == ":" && matches!(kind, DeclKind::Function | DeclKind::Predicate) {
        j += 1;
        if j < hi && p.text(j) == "(" && j + 2 < hi && p.text(j + 2) == ":" {
            let close = p.matching(j)?;
            returns = parse_params(p, j + 1, close);
            j = close + 1;
        } else {
            let start = j;
            let last = scan_expr(p, j, hi, HEADER_CLAUSES)?;
            if last >= start {
                returns.push(Param::new("", p.slice(start, last)));
            }
            j = last + 1;
        }
    }

    let mut clauses = Vec::new();
    let mut requires = Vec::new();
    let mut ensures = Vec::new();
    let mut other = Vec::new();
    while j < hi && HEADER_CLAUSES.contains(&p.text(j)) {
        let ckw = j;
        // `decreases *` followed by the body brace would otherwise read as `* {set}`.
        let last = if p.text(j) == "decreases" && j + 1 < hi && p.text(j + 1) == "*" {
            j + 1
        } else {
            scan_expr(p, j + 1, hi, HEADER_CLAUSES)?
        };
        if last <= ckw {
            return Err(p.error_at(ckw, format!("empty `{}` clause", p.text(ckw))));
        }
        clauses.push((ckw, last));
        let mut e = j + 1;
        // `requires {:attr} E` and labelled clauses keep only the expression.
        while e <= last && is_attr(p, e) {
            e = p.matching(e)? + 1;
        }
        if e < last && p.text(e + 1) == ":" && p.tokens[e].kind == TokKind::Ident && p.text(e) != "forall" {
            e += 2;
        }
        let text = if e <= last { p.slice(e, last).to_string() } else { String::new() };
        match p.text(ckw) {
            "requires" => requires.push(text),
            "ensures" => ensures.push(text),
            _ => other.push(p.slice(ckw, last).to_string()),
        }
        j = last + 1;
    }

    let (body, last_tok) = if j < hi && p.text(j) == "{" {
        let close = p.matching(j)?;
        (Some((j, close)), close)
    } else {
        (None, j - 1)
    };

    Ok(Decl {
        signature: MethodSignature {
            name: name.clone(),
            kind,
            parameters,
            returns,
            requires_clauses: requires,
            ensures_clauses: ensures,
            other_clauses: other,
        },
        name,
        kind,
        first_tok: first,
        keyword_tok: kw,
        name_tok,
        clauses,
        body,
        last_tok,
        ghost,
        has_axiom_attr,
        container: container.map(str::to_string),
    })
}

fn skip_angle(p: &Program, open: usize, hi: usize) -> Result<usize, SyntaxError> {
    let mut depth = 0i32;
    let mut j = open;
    while j < hi {
        match p.text(j) {
            "<" => depth += 1,
            ">" => {
                depth -= 1;
                if depth == 0 {
                    return Ok(j + 1);
                }
            }
            "(" | "[" => j = p.matching(j)?,
            _ => {}
        }
        j += 1;
    }
    Err(p.error_at(open, "unclosed `<`"))
}

/// Scans one header expression starting at `start`; returns its last token
/// (or `start - 1` when empty). Stops at a clause keyword, a body brace or
/// the next declaration.
fn scan_expr(p: &Program, start: usize, hi: usize, stops: &[&str]) -> Result<usize, SyntaxError> {
    let mut j = start;
    while j < hi {
        let t = p.text(j);
        if p.tokens[j].kind == TokKind::Ident && (stops.contains(&t) || starts_decl(p, j)) {
            break;
        }
        match t {
            "(" | "[" => j = p.matching(j)? + 1,
            "{" if is_attr(p, j) => j = p.matching(j)? + 1,
            "{" => {
                let prev = if j > start { p.text(j - 1) } else { "requires" };
                if j == start || !brace_continues_expression(prev) {
                    break;
                }
                j = p.matching(j)? + 1;
            }
            "}" => break,
            _ => j += 1,
        }
    }
    Ok(j.saturating_sub(1).max(start.saturating_sub(1)))
}

fn parse_params(p: &Program, lo: usize, hi: usize) -> Vec<Param> {
    let mut out = Vec::new();
    let mut seg_start = lo;
    let mut depth = 0i32;
    let mut j = lo;
    while j <= hi {
        let at_end = j == hi;
        let t = if at_end { "," } else { p.text(j) };
        match t {
            "(" | "[" | "<" => depth += 1,
            ")" | "]" | ">" => depth -= 1,
            "," if depth == 0 => {
                if seg_start < j {
                    out.push(param_from(p, seg_start, j - 1));
                }
                seg_start = j + 1;
            }
            _ => {}
        }
        j += 1;
    }
    out
}

fn param_from(p: &Program, first: usize, last: usize) -> Param {
    let mut i = first;
    let mut ghost = false;
    while i <= last && matches!(p.text(i), "ghost" | "new" | "nameonly" | "older") {
        ghost |= p.text(i) == "ghost";
        i += 1;
    }
    if i < last && p.text(i + 1) == ":" {
        let ty = if i + 2 <= last { p.slice(i + 2, last) } else { "" };
        let ty = ty.split(":=").next().unwrap_or(ty).trim();
        Param { name: p.text(i).to_string(), ty: ty.to_string(), ghost }
    } else {
        Param { name: String::new(), ty: p.slice(i, last).to_string(), ghost }
    }
}
