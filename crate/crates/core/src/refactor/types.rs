//! Just enough expression typing to give lifted-method parameters their types.

use crate::dafny::{tokenize, TokKind};

/// Infers the Dafny type of `expr`. `env` maps variables to types and
/// `functions` maps function names to result types.
pub fn infer_type(expr: &str, env: &dyn Fn(&str) -> Option<String>, functions: &dyn Fn(&str) -> Option<String>) -> Option<String> {
    let toks = tokenize(expr).ok()?;
    let texts: Vec<(&str, TokKind)> = toks.iter().map(|t| (t.text(expr), t.kind)).collect();
    Infer { env, functions }.infer(&texts)
}

struct Infer<'a> {
    env: &'a dyn Fn(&str) -> Option<String>,
    functions: &'a dyn Fn(&str) -> Option<String>,
}

const BOOL_OPS: &[&str] = &["==", "!=", "<", "<=", ">", ">=", "&&", "||", "==>", "<==", "<==>", "!", "in", "!in", "!!"];
const ARITH_OPS: &[&str] = &["+", "-", "*", "/", "%"];

/// Indices of tokens at bracket depth zero. Cardinality bars toggle.
fn top_level(t: &[(&str, TokKind)]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut in_bars = false;
    for (i, (s, _)) in t.iter().enumerate() {
        match *s {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "|" if depth == 0 => {
                in_bars = !in_bars;
                continue;
            }
            _ => {}
        }
        if depth == 0 && !in_bars && !matches!(*s, ")" | "]" | "}") {
            out.push(i);
        }
    }
    out
}

fn closes_at_end(t: &[(&str, TokKind)], open: usize) -> bool {
    let mut depth = 0i32;
    for (i, (s, _)) in t.iter().enumerate().skip(open) {
        match *s {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => {
                depth -= 1;
                if depth == 0 {
                    return i == t.len() - 1;
                }
            }
            _ => {}
        }
    }
    false
}

fn element_of(ty: &str) -> Option<String> {
    let ty = ty.trim();
    if ty == "string" {
        return Some("char".into());
    }
    for prefix in ["seq<", "array<", "multiset<", "set<"] {
        if let Some(rest) = ty.strip_prefix(prefix) {
            return rest.strip_suffix('>').map(|s| s.trim().to_string());
        }
    }
    if let Some(rest) = ty.strip_prefix("map<") {
        let inner = rest.strip_suffix('>')?;
        let mut depth = 0;
        for (i, c) in inner.char_indices() {
            match c {
                '<' => depth += 1,
                '>' => depth -= 1,
                ',' if depth == 0 => return Some(inner[i + 1..].trim().to_string()),
                _ => {}
            }
        }
    }
    None
}

impl Infer<'_> {
    fn infer(&self, t: &[(&str, TokKind)]) -> Option<String> {
        if t.is_empty() {
            return None;
        }
        if t[0].0 == "(" && closes_at_end(t, 0) {
            return self.infer(&t[1..t.len() - 1]);
        }
        if t[0].0 == "if" {
            let top = top_level(t);
            let then = top.iter().copied().find(|&i| t[i].0 == "then")?;
            let els = top.iter().copied().find(|&i| t[i].0 == "else" && i > then)?;
            return self.infer(&t[then + 1..els]).or_else(|| self.infer(&t[els + 1..]));
        }
        let top = top_level(t);
        if top.iter().any(|&i| BOOL_OPS.contains(&t[i].0)) {
            return Some("bool".into());
        }
        if let Some(&i) = top.iter().find(|&&i| i > 0 && ARITH_OPS.contains(&t[i].0)) {
            return self.infer(&t[..i]).or_else(|| self.infer(&t[i + 1..]));
        }
        if t.len() == 1 {
            let (s, kind) = t[0];
            return match kind {
                TokKind::Number if s.contains('.') => Some("real".into()),
                TokKind::Number => Some("int".into()),
                TokKind::Str => Some("string".into()),
                TokKind::Char => Some("char".into()),
                TokKind::Ident if s == "true" || s == "false" => Some("bool".into()),
                TokKind::Ident => (self.env)(s),
                TokKind::Punct => None,
            };
        }
        if t[0].0 == "-" {
            return self.infer(&t[1..]);
        }
        if t[0].0 == "|" && t[t.len() - 1].0 == "|" {
            return Some("int".into());
        }
        if t[0].0 == "new" && t.len() > 2 {
            let bracket = t.iter().position(|(s, _)| *s == "[")?;
            let elem: Vec<&str> = t[1..bracket].iter().map(|(s, _)| *s).collect();
            return Some(format!("array<{}>", elem.concat()));
        }
        if t[0].0 == "[" && closes_at_end(t, 0) {
            let inner = &t[1..t.len() - 1];
            let first_comma = top_level(inner).into_iter().find(|&i| inner[i].0 == ",").unwrap_or(inner.len());
            return self.infer(&inner[..first_comma]).map(|e| format!("seq<{e}>"));
        }
        let last = t[t.len() - 1].0;
        if last == ")" && t[0].1 == TokKind::Ident && t[1].0 == "(" && closes_at_end(t, 1) {
            return (self.functions)(t[0].0);
        }
        if last == "]" {
            // Postfix index or slice: find the bracket that closes at the end.
            let open = (0..t.len()).rev().find(|&i| t[i].0 == "[" && closes_at_end(t, i))?;
            if open == 0 {
                return None;
            }
            let base = self.infer(&t[..open])?;
            let inner = &t[open + 1..t.len() - 1];
            if top_level(inner).iter().any(|&i| inner[i].0 == "..") {
                return if base == "string" { Some(base) } else { element_of(&base).map(|e| format!("seq<{e}>")) };
            }
            return element_of(&base);
        }
        if t.len() == 3 && t[1].0 == "." && t[2].0 == "Length" {
            return Some("int".into());
        }
        None
    }
}
