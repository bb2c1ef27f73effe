use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclKind {
    Method,
    Lemma,
    Function,
    Predicate,
}

impl DeclKind {
    pub fn keyword(self) -> &'static str {
        match self {
            DeclKind::Method => "method",
            DeclKind::Lemma => "lemma",
            DeclKind::Function => "function",
            DeclKind::Predicate => "predicate",
        }
    }

    pub fn is_ghost_proof(self) -> bool {
        self == DeclKind::Lemma
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ghost: bool,
}

impl Param {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        Param { name: name.into(), ty: ty.into(), ghost: false }
    }

    fn render(&self) -> String {
        let ghost = if self.ghost { "ghost " } else { "" };
        if self.name.is_empty() {
            format!("{ghost}{}", self.ty)
        } else {
            format!("{ghost}{}: {}", self.name, self.ty)
        }
    }
}

/// The externally visible part of a callable: name, parameters and contract.
///
/// Expressions are kept as source text. A function's unnamed result type is a
/// single `returns` entry with an empty name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodSignature {
    pub name: String,
    pub kind: DeclKind,
    #[serde(default)]
    pub parameters: Vec<Param>,
    #[serde(default)]
    pub returns: Vec<Param>,
    #[serde(default)]
    pub requires_clauses: Vec<String>,
    #[serde(default)]
    pub ensures_clauses: Vec<String>,
    /// `modifies`, `reads` and `decreases` clauses, verbatim with keyword.
    #[serde(default)]
    pub other_clauses: Vec<String>,
}

pub fn is_valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_' || c == '\'' || c == '?')
        && !crate::dafny::is_reserved(name)
}

impl MethodSignature {
    pub fn lemma(name: impl Into<String>) -> Self {
        MethodSignature {
            name: name.into(),
            kind: DeclKind::Lemma,
            parameters: Vec::new(),
            returns: Vec::new(),
            requires_clauses: Vec::new(),
            ensures_clauses: Vec::new(),
            other_clauses: Vec::new(),
        }
    }

    pub fn with_param(mut self, name: &str, ty: &str) -> Self {
        self.parameters.push(Param::new(name, ty));
        self
    }

    pub fn requires(mut self, e: &str) -> Self {
        self.requires_clauses.push(e.to_string());
        self
    }

    pub fn ensures(mut self, e: &str) -> Self {
        self.ensures_clauses.push(e.to_string());
        self
    }

    /// Header text without a body. With `axiom` set, the declaration carries
    /// `{:axiom}` so the verifier assumes it silently.
    pub fn render_header(&self, axiom: bool) -> String {
        let mut out = String::from(self.kind.keyword());
        if axiom {
            out.push_str(" {:axiom}");
        }
        out.push(' ');
        out.push_str(&self.name);
        out.push('(');
        out.push_str(&self.parameters.iter().map(Param::render).collect::<Vec<_>>().join(", "));
        out.push(')');
        match self.kind {
            DeclKind::Function | DeclKind::Predicate => match self.returns.as_slice() {
                [] => {}
                [r] if r.name.is_empty() => {
                    out.push_str(": ");
                    out.push_str(&r.ty);
                }
                [r] => {
                    out.push_str(&format!(": ({})", r.render()));
                }
                many => {
                    out.push_str(": ");
                    out.push_str(&many.iter().map(|p| p.ty.clone()).collect::<Vec<_>>().join(", "));
                }
            },
            DeclKind::Method | DeclKind::Lemma => {
                if !self.returns.is_empty() {
                    out.push_str(" returns (");
                    out.push_str(&self.returns.iter().map(Param::render).collect::<Vec<_>>().join(", "));
                    out.push(')');
                }
            }
        }
        for r in &self.requires_clauses {
            out.push_str("\n  requires ");
            out.push_str(r);
        }
        for e in &self.ensures_clauses {
            out.push_str("\n  ensures ");
            out.push_str(e);
        }
        for c in &self.other_clauses {
            out.push_str("\n  ");
            out.push_str(c);
        }
        out
    }

    /// A declaration the verifier treats as an assumption.
    pub fn render_bodiless(&self) -> String {
        self.render_header(true)
    }

    /// Canonical text of the goal this signature states, ignoring the name
    /// and whitespace. Two signatures with equal statements are duplicates.
    pub fn normalized_statement(&self) -> String {
        let squash = |s: &str| crate::dafny::normalize_ws(s);
        let params: Vec<String> =
            self.parameters.iter().map(|p| format!("{}:{}", p.name, squash(&p.ty))).collect();
        let rets: Vec<String> = self.returns.iter().map(|p| format!("{}:{}", p.name, squash(&p.ty))).collect();
        let req: Vec<String> = self.requires_clauses.iter().map(|s| squash(s)).collect();
        let ens: Vec<String> = self.ensures_clauses.iter().map(|s| squash(s)).collect();
        format!(
            "{}({})->({})|req[{}]|ens[{}]",
            self.kind.keyword(),
            params.join(","),
            rets.join(","),
            req.join(";"),
            ens.join(";")
        )
    }

    /// Parameters, results and requires/ensures match (whitespace-insensitive).
    pub fn same_contract(&self, other: &MethodSignature) -> bool {
        self.name == other.name && self.kind == other.kind && self.normalized_statement() == other.normalized_statement()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_lemma_header() {
        let sig = MethodSignature::lemma("lemmaSeqSumExtend")
            .with_param("ints", "seq<int>")
            .requires("|ints| > 1")
            .ensures("seqSum(ints) == seqSum(ints[..|ints|-1]) + ints[|ints|-1]");
        assert_eq!(
            sig.render_header(false),
            "lemma lemmaSeqSumExtend(ints: seq<int>)\n  requires |ints| > 1\n  ensures seqSum(ints) == seqSum(ints[..|ints|-1]) + ints[|ints|-1]"
        );
        assert!(sig.render_bodiless().starts_with("lemma {:axiom} lemmaSeqSumExtend("));
    }

    #[test]
    fn normalized_statement_ignores_name_and_spacing() {
        let a = MethodSignature::lemma("A").with_param("s", "seq<int>").ensures("f(s)  ==  g(s)");
        let b = MethodSignature::lemma("B").with_param("s", "seq< int >").ensures("f(s) == g(s)");
        assert_eq!(a.normalized_statement(), b.normalized_statement());
        assert!(!a.same_contract(&b));
    }

    #[test]
    fn identifiers() {
        assert!(is_valid_identifier("innerLoop"));
        assert!(is_valid_identifier("x'"));
        assert!(!is_valid_identifier("1x"));
        assert!(!is_valid_identifier("method"));
        assert!(!is_valid_identifier(""));
    }
}
