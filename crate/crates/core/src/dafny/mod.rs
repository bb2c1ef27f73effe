//! Structural scanning of Dafny source.
//!
//! This is not a Dafny parser. It finds declarations, contracts, statements
//! and loops as token ranges over the original text, which is all the
//! refactoring and merging steps need. Every edit is a splice of the
//! original source.

mod decls;
mod lexer;
mod stmt;

use std::ops::Range;

pub use decls::Decl;
pub use lexer::{tokenize, TokKind, Token};
pub use stmt::{Block, Clause, LoopKind, LoopStmt, Stmt, StmtKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: u32, column: u32, message: impl Into<String>) -> Self {
        SyntaxError { line, column, message: message.into() }
    }
}

const RESERVED: &[&str] = &[
    "abstract", "allocated", "as", "assert", "assume", "bool", "break", "by", "calc", "case", "char", "class",
    "codatatype", "const", "constructor", "continue", "datatype", "decreases", "else", "ensures", "exists",
    "expect", "export", "extends", "false", "for", "forall", "fresh", "function", "ghost", "if", "import",
    "in", "include", "int", "invariant", "is", "label", "lemma", "map", "match", "method", "modifies",
    "modify", "module", "nat", "new", "newtype", "null", "object", "old", "opened", "predicate", "print",
    "real", "reads", "refines", "requires", "return", "returns", "reveal", "seq", "set", "static", "string",
    "then", "this", "to", "downto", "trait", "true", "twostate", "type", "unchanged", "var", "while", "yield",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word)
}

/// Joins the token texts of `s` with single spaces; falls back to collapsing
/// whitespace when `s` does not tokenize.
pub fn normalize_ws(s: &str) -> String {
    match tokenize(s) {
        Ok(toks) => toks.iter().map(|t| t.text(s)).collect::<Vec<_>>().join(" "),
        Err(_) => s.split_whitespace().collect::<Vec<_>>().join(" "),
    }
}

/// A scanned program: source text, tokens and top-level callables.
#[derive(Debug, Clone)]
pub struct Program {
    pub src: String,
    pub tokens: Vec<Token>,
    pub decls: Vec<Decl>,
    /// Names of every other named declaration (datatypes, constants, classes...).
    pub other_names: Vec<String>,
}

impl Program {
    pub fn parse(src: &str) -> Result<Program, SyntaxError> {
        let tokens = tokenize(src)?;
        check_balanced(src, &tokens)?;
        let mut program = Program { src: src.to_string(), tokens, decls: Vec::new(), other_names: Vec::new() };
        let (decls, others) = decls::scan(&program)?;
        program.decls = decls;
        program.other_names = others;
        Ok(program)
    }

    pub fn text(&self, tok: usize) -> &str {
        self.tokens[tok].text(&self.src)
    }

    /// Text of an inclusive token range.
    pub fn slice(&self, first: usize, last: usize) -> &str {
        &self.src[self.tokens[first].start..self.tokens[last].end]
    }

    pub fn byte_range(&self, first: usize, last: usize) -> Range<usize> {
        self.tokens[first].start..self.tokens[last].end
    }

    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn has_name(&self, name: &str) -> bool {
        self.decl(name).is_some() || self.other_names.iter().any(|n| n == name)
    }

    pub fn decl_text(&self, d: &Decl) -> &str {
        self.slice(d.first_tok, d.last_tok)
    }

    pub fn decl_range(&self, d: &Decl) -> Range<usize> {
        self.byte_range(d.first_tok, d.last_tok)
    }

    /// Statements of a callable's body, if it has one.
    pub fn body(&self, d: &Decl) -> Result<Option<Block>, SyntaxError> {
        match d.body {
            Some((open, _)) => stmt::parse_block(self, open).map(Some),
            None => Ok(None),
        }
    }

    /// Index of the token matching the bracket at `open`.
    pub fn matching(&self, open: usize) -> Result<usize, SyntaxError> {
        matching(&self.src, &self.tokens, open)
    }

    pub fn line_of(&self, tok: usize) -> u32 {
        self.tokens[tok].line
    }

    pub fn last_line_of(&self, tok: usize) -> u32 {
        let t = &self.tokens[tok];
        t.line + self.src[t.start..t.end].matches('\n').count() as u32
    }

    /// The callable whose text covers `line`.
    pub fn decl_at_line(&self, line: u32) -> Option<&Decl> {
        self.decls.iter().find(|d| self.line_of(d.first_tok) <= line && line <= self.last_line_of(d.last_tok))
    }

    pub fn error_at(&self, tok: usize, message: impl Into<String>) -> SyntaxError {
        let t = self.tokens.get(tok).or(self.tokens.last());
        match t {
            Some(t) => SyntaxError::new(t.line, t.col, message),
            None => SyntaxError::new(1, 1, message),
        }
    }
}

fn check_balanced(src: &str, tokens: &[Token]) -> Result<(), SyntaxError> {
    let mut stack: Vec<(char, &Token)> = Vec::new();
    for t in tokens.iter().filter(|t| t.kind == TokKind::Punct) {
        match t.text(src) {
            "(" => stack.push((')', t)),
            "[" => stack.push((']', t)),
            "{" => stack.push(('}', t)),
            c @ (")" | "]" | "}") => match stack.pop() {
                Some((want, _)) if c.starts_with(want) => {}
                Some((want, _)) => {
                    return Err(SyntaxError::new(t.line, t.col, format!("expected `{want}`, found `{c}`")));
                }
                None => return Err(SyntaxError::new(t.line, t.col, format!("unbalanced `{c}`"))),
            },
            _ => {}
        }
    }
    match stack.pop() {
        Some((want, t)) => Err(SyntaxError::new(t.line, t.col, format!("unclosed bracket, expected `{want}`"))),
        None => Ok(()),
    }
}

pub(crate) fn matching(src: &str, tokens: &[Token], open: usize) -> Result<usize, SyntaxError> {
    let (o, c) = match tokens[open].text(src) {
        "(" => ("(", ")"),
        "[" => ("[", "]"),
        "{" => ("{", "}"),
        other => {
            let t = &tokens[open];
            return Err(SyntaxError::new(t.line, t.col, format!("`{other}` is not an opening bracket")));
        }
    };
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if t.kind != TokKind::Punct {
            continue;
        }
        let s = t.text(src);
        if s == o {
            depth += 1;
        } else if s == c {
            depth -= 1;
            if depth == 0 {
                return Ok(i);
            }
        }
    }
    let t = &tokens[open];
    Err(SyntaxError::new(t.line, t.col, format!("unclosed `{o}`")))
}

/// Tokens after which a `{` continues an expression (set display, lambda)
/// instead of opening a statement block or body.
pub(crate) fn brace_continues_expression(prev: &str) -> bool {
    matches!(
        prev,
        "(" | "[" | "," | ":" | ":=" | ":|" | "::" | "==" | "!=" | "<" | "<=" | ">=" | "&&" | "||" | "==>"
            | "<==" | "<==>" | "+" | "-" | "*" | "/" | "%" | "!" | "!!" | "=>" | "in" | "then" | "else"
            | "requires" | "ensures" | "reads" | "modifies" | "decreases" | "invariant" | "returns" | "return"
            | "var" | "assert" | "assume" | "expect" | "case" | "to" | "downto" | "..."
    )
}

/// One text replacement over a byte range of the original source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextEdit {
    pub range: Range<usize>,
    pub replacement: String,
}

impl TextEdit {
    pub fn delete(range: Range<usize>) -> Self {
        TextEdit { range, replacement: String::new() }
    }

    pub fn replace(range: Range<usize>, replacement: impl Into<String>) -> Self {
        TextEdit { range, replacement: replacement.into() }
    }

    pub fn insert(at: usize, text: impl Into<String>) -> Self {
        TextEdit { range: at..at, replacement: text.into() }
    }
}

/// Applies non-overlapping edits. Overlapping deletions are merged; any other
/// overlap is a caller bug and panics.
pub fn apply_edits(src: &str, mut edits: Vec<TextEdit>) -> String {
    edits.sort_by_key(|e| (e.range.start, e.range.end));
    let mut merged: Vec<TextEdit> = Vec::new();
    for e in edits {
        if let Some(last) = merged.last_mut() {
            if e.range.start < last.range.end {
                assert!(
                    e.replacement.is_empty() && last.replacement.is_empty(),
                    "overlapping non-delete edits at {:?} and {:?}",
                    last.range,
                    e.range
                );
                last.range.end = last.range.end.max(e.range.end);
                continue;
            }
        }
        merged.push(e);
    }
    let mut out = String::with_capacity(src.len());
    let mut pos = 0;
    for e in merged {
        out.push_str(&src[pos..e.range.start]);
        out.push_str(&e.replacement);
        pos = e.range.end;
    }
    out.push_str(&src[pos..]);
    out
}

/// Widens `range` to whole lines (indentation plus the trailing newline)
/// when nothing but whitespace shares those lines with it.
/// Renames identifier tokens per `map`, leaving member accesses (`x.name`) alone.
pub fn rename_idents(src: &str, map: &dyn Fn(&str) -> Option<String>) -> Result<String, SyntaxError> {
    let toks = tokenize(src)?;
    let mut edits = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokKind::Ident || (i > 0 && toks[i - 1].text(src) == ".") {
            continue;
        }
        if let Some(new) = map(t.text(src)) {
            edits.push(TextEdit::replace(t.start..t.end, new));
        }
    }
    Ok(apply_edits(src, edits))
}

pub fn expand_to_lines(src: &str, range: Range<usize>) -> Range<usize> {
    let line_start = src[..range.start].rfind('\n').map_or(0, |i| i + 1);
    let before_clean = src[line_start..range.start].trim().is_empty();
    let line_end = src[range.end..].find('\n').map_or(src.len(), |i| range.end + i);
    let after_clean = src[range.end..line_end].trim().is_empty();
    if before_clean && after_clean {
        let end = if line_end < src.len() { line_end + 1 } else { line_end };
        line_start..end
    } else {
        // Also eat one run of spaces before the removed text.
        let trimmed = src[..range.start].trim_end_matches([' ', '\t']).len();
        let start = if before_clean { range.start } else { trimmed };
        start..range.end
    }
}

/// Leading whitespace of the line containing byte `pos`.
pub fn indent_at(src: &str, pos: usize) -> &str {
    let line_start = src[..pos].rfind('\n').map_or(0, |i| i + 1);
    let rest = &src[line_start..];
    let n = rest.len() - rest.trim_start_matches([' ', '\t']).len();
    &rest[..n]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_brackets_are_checked() {
        assert!(Program::parse("method M() { if (x { } }").is_err());
        assert!(Program::parse("method M() { }}").is_err());
        assert!(Program::parse("method M() { var x := [1]; }").is_ok());
    }

    #[test]
    fn edits_apply_in_order() {
        let s = "abcdef";
        let out = apply_edits(s, vec![TextEdit::replace(4..5, "E"), TextEdit::delete(0..1), TextEdit::insert(2, "_")]);
        assert_eq!(out, "b_cdEf");
    }

    #[test]
    fn expand_whole_line() {
        let s = "a\n    assert x;\nb";
        let start = s.find("assert").unwrap();
        let r = expand_to_lines(s, start..start + 9);
        assert_eq!(apply_edits(s, vec![TextEdit::delete(r)]), "a\nb");
    }

    #[test]
    fn normalize_joins_tokens() {
        assert_eq!(normalize_ws("seq< int >"), "seq < int >");
        assert_eq!(normalize_ws("a   +\n b"), "a + b");
    }
}
