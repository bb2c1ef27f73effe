//! Verifier backends, diagnostic classification and bodiless declarations.

mod classify;
mod dafny_cli;
mod scripted;

use sha2::{Digest, Sha256};

pub use classify::{classify_diagnostics, summarize, Summary};
pub use dafny_cli::{locate_dafny, CliDialect, DafnyCli};
pub use scripted::{FnVerifier, RecordingVerifier, ScriptEntry, ScriptedVerifier, VerifierScript};

use crate::dafny::Program;
use crate::model::{Diagnostic, DiagnosticKind, MethodSignature, VerifierReport};

#[derive(Debug, thiserror::Error)]
pub enum VerifierError {
    /// The verifier cannot be started at all; distinct from a failed proof.
    #[error("verifier executable not available: {0}")]
    MissingExecutable(String),
    #[error("no scripted verdict for program digest {digest}")]
    UnknownProgram { digest: String },
    #[error("empty program")]
    EmptyProgram,
    #[error("`{name}` is already defined differently in the program")]
    Conflict { name: String },
    #[error("verifier script: {0}")]
    Script(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl VerifierError {
    pub fn is_environment(&self) -> bool {
        matches!(self, VerifierError::MissingExecutable(_) | VerifierError::Io(_))
    }
}

pub trait Verifier: Send + Sync {
    fn name(&self) -> &str;

    fn verify(&self, program: &str, timeout_seconds: u64) -> Result<VerifierReport, VerifierError>;

    /// Syntax and name-resolution check only. The default is the structural
    /// scanner, which catches malformed programs but not type errors.
    fn resolve(&self, program: &str) -> Result<VerifierReport, VerifierError> {
        Ok(structural_check(program))
    }

    /// The exact invocation, for the transcript.
    fn command_line(&self, _timeout_seconds: u64) -> Option<Vec<String>> {
        None
    }
}

impl<V: Verifier + ?Sized> Verifier for &V {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn verify(&self, program: &str, timeout_seconds: u64) -> Result<VerifierReport, VerifierError> {
        (**self).verify(program, timeout_seconds)
    }
    fn resolve(&self, program: &str) -> Result<VerifierReport, VerifierError> {
        (**self).resolve(program)
    }
    fn command_line(&self, timeout_seconds: u64) -> Option<Vec<String>> {
        (**self).command_line(timeout_seconds)
    }
}

impl<V: Verifier + ?Sized> Verifier for Box<V> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn verify(&self, program: &str, timeout_seconds: u64) -> Result<VerifierReport, VerifierError> {
        (**self).verify(program, timeout_seconds)
    }
    fn resolve(&self, program: &str) -> Result<VerifierReport, VerifierError> {
        (**self).resolve(program)
    }
    fn command_line(&self, timeout_seconds: u64) -> Option<Vec<String>> {
        (**self).command_line(timeout_seconds)
    }
}

pub fn program_digest(program: &str) -> String {
    hex::encode(Sha256::digest(program.as_bytes()))
}

/// Runs one verification with the per-run limit `timeout_seconds`.
pub fn run_verifier(program: &str, backend: &dyn Verifier, timeout_seconds: u64) -> Result<VerifierReport, VerifierError> {
    if program.trim().is_empty() {
        return Err(VerifierError::EmptyProgram);
    }
    backend.verify(program, timeout_seconds)
}

pub fn structural_check(program: &str) -> VerifierReport {
    match Program::parse(program) {
        Ok(_) => VerifierReport::verified(),
        Err(e) => {
            let mut d = Diagnostic::new(DiagnosticKind::SyntaxError, Some(e.line), e.message.clone());
            d.column = Some(e.column);
            VerifierReport { raw_output: e.to_string(), ..VerifierReport::failed(vec![d]) }
        }
    }
}

/// Appends each signature as an `{:axiom}` declaration without a body so
/// the verifier assumes it. Signatures already declared with the same
/// contract are skipped; a different definition of the same name is a
/// conflict.
pub fn declare_bodiless(program: &str, signatures: &[MethodSignature]) -> Result<String, VerifierError> {
    if signatures.is_empty() {
        return Ok(program.to_string());
    }
    let parsed = Program::parse(program).map_err(|e| VerifierError::Script(format!("cannot scan program: {e}")))?;
    let mut out = program.to_string();
    let mut added: Vec<&MethodSignature> = Vec::new();
    for sig in signatures {
        if added.iter().any(|a| a.name == sig.name) {
            if added.iter().any(|a| a.same_contract(sig)) {
                continue;
            }
            return Err(VerifierError::Conflict { name: sig.name.clone() });
        }
        if let Some(existing) = parsed.decl(&sig.name) {
            if existing.is_bodiless() && existing.signature.same_contract(sig) {
                continue;
            }
            return Err(VerifierError::Conflict { name: sig.name.clone() });
        }
        if parsed.other_names.iter().any(|n| n == &sig.name) {
            return Err(VerifierError::Conflict { name: sig.name.clone() });
        }
        if !out.ends_with('\n') {
            out.push('\n');
        }
        out.push('\n');
        out.push_str(&sig.render_bodiless());
        out.push('\n');
        added.push(sig);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extend_sig() -> MethodSignature {
        MethodSignature::lemma("lemmaSeqSumExtend")
            .with_param("ints", "seq<int>")
            .requires("|ints| > 1")
            .ensures("seqSum(ints) == seqSum(ints[..|ints|-1]) + ints[|ints|-1]")
    }

    #[test]
    fn declare_bodiless_is_idempotent() {
        let p = "function seqSum(s: seq<int>): int { if |s| == 0 then 0 else s[0] + seqSum(s[1..]) }\n";
        assert_eq!(declare_bodiless(p, &[]).unwrap(), p);
        let once = declare_bodiless(p, &[extend_sig()]).unwrap();
        assert!(once.contains("lemma {:axiom} lemmaSeqSumExtend(ints: seq<int>)"));
        let parsed = Program::parse(&once).unwrap();
        assert!(parsed.decl("lemmaSeqSumExtend").unwrap().is_bodiless());
        let twice = declare_bodiless(&once, &[extend_sig()]).unwrap();
        assert_eq!(once, twice);
        assert_eq!(declare_bodiless(p, &[extend_sig(), extend_sig()]).unwrap(), once);
    }

    #[test]
    fn declare_bodiless_rejects_collisions() {
        let p = "lemma lemmaSeqSumExtend(ints: seq<int>) { }\n";
        assert!(matches!(declare_bodiless(p, &[extend_sig()]), Err(VerifierError::Conflict { .. })));
        let p = "datatype lemmaSeqSumExtend = A\n";
        assert!(matches!(declare_bodiless(p, &[extend_sig()]), Err(VerifierError::Conflict { .. })));
    }

    #[test]
    fn empty_program_is_rejected() {
        let v = ScriptedVerifier::default();
        assert!(matches!(run_verifier("  \n", &v, 20), Err(VerifierError::EmptyProgram)));
    }
}
