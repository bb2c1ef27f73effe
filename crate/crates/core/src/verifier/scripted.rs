use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{program_digest, Verifier, VerifierError};
use crate::model::VerifierReport;

/// One scripted verdict. Entries name the program either by digest or by
/// its full text (the digest is computed on load).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub report: VerifierReport,
}

/// On-disk form of a verifier script: `{"entries": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifierScript {
    pub entries: Vec<ScriptEntry>,
}

impl VerifierScript {
    pub fn push(&mut self, program: &str, label: impl Into<String>, report: VerifierReport) {
        self.entries.push(ScriptEntry {
            digest: Some(program_digest(program)),
            program: None,
            label: Some(label.into()),
            report,
        });
    }

    pub fn load(path: &Path) -> Result<Self, VerifierError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| VerifierError::Script(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), VerifierError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| VerifierError::Script(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Mock verifier answering from a table keyed by the exact program digest.
/// An unknown program is an error, never an implicit success.
#[derive(Debug, Default)]
pub struct ScriptedVerifier {
    table: HashMap<String, (Option<String>, VerifierReport)>,
    calls: Mutex<Vec<String>>,
}

impl ScriptedVerifier {
    pub fn new(script: VerifierScript) -> Result<Self, VerifierError> {
        let mut table = HashMap::new();
        for e in script.entries {
            let digest = match (&e.digest, &e.program) {
                (_, Some(p)) => program_digest(p),
                (Some(d), None) => d.clone(),
                (None, None) => return Err(VerifierError::Script("entry without digest or program".into())),
            };
            if !e.report.is_well_formed() {
                return Err(VerifierError::Script(format!(
                    "entry {} has a report whose status contradicts its diagnostics",
                    e.label.as_deref().unwrap_or(&digest)
                )));
            }
            table.insert(digest, (e.label, e.report));
        }
        Ok(ScriptedVerifier { table, calls: Mutex::new(Vec::new()) })
    }

    pub fn from_file(path: &Path) -> Result<Self, VerifierError> {
        ScriptedVerifier::new(VerifierScript::load(path)?)
    }

    /// Digests of every program verified so far, in call order.
    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().expect("call log lock").clone()
    }

    pub fn label_of(&self, program: &str) -> Option<String> {
        self.table.get(&program_digest(program)).and_then(|(l, _)| l.clone())
    }
}

impl Verifier for ScriptedVerifier {
    fn name(&self) -> &str {
        "scripted"
    }

    fn verify(&self, program: &str, _timeout_seconds: u64) -> Result<VerifierReport, VerifierError> {
        let digest = program_digest(program);
        self.calls.lock().expect("call log lock").push(digest.clone());
        match self.table.get(&digest) {
            Some((_, report)) => Ok(report.clone()),
            None => Err(VerifierError::UnknownProgram { digest }),
        }
    }
}

/// Wraps a verifier and collects every verdict into a script, so a run
/// against real Dafny can later be replayed offline.
pub struct RecordingVerifier<V> {
    inner: V,
    script: Mutex<VerifierScript>,
}

impl<V: Verifier> RecordingVerifier<V> {
    pub fn new(inner: V) -> Self {
        RecordingVerifier { inner, script: Mutex::new(VerifierScript::default()) }
    }

    pub fn script(&self) -> VerifierScript {
        self.script.lock().expect("script lock").clone()
    }
}

impl<V: Verifier> Verifier for RecordingVerifier<V> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn verify(&self, program: &str, timeout_seconds: u64) -> Result<VerifierReport, VerifierError> {
        let report = self.inner.verify(program, timeout_seconds)?;
        let mut script = self.script.lock().expect("script lock");
        let digest = program_digest(program);
        if !script.entries.iter().any(|e| e.digest.as_deref() == Some(digest.as_str())) {
            let n = script.entries.len();
            script.push(program, format!("recorded-{n}"), report.clone());
        }
        Ok(report)
    }

    fn resolve(&self, program: &str) -> Result<VerifierReport, VerifierError> {
        self.inner.resolve(program)
    }

    fn command_line(&self, timeout_seconds: u64) -> Option<Vec<String>> {
        self.inner.command_line(timeout_seconds)
    }
}


type VerdictFn = dyn Fn(&str) -> VerifierReport + Send + Sync;

/// Mock verifier whose verdict is a function of the program text, for
/// scenarios where the exact programs are not known up front.
pub struct FnVerifier {
    verdict: Box<VerdictFn>,
    calls: Mutex<Vec<String>>,
}

impl FnVerifier {
    pub fn new(verdict: impl Fn(&str) -> VerifierReport + Send + Sync + 'static) -> Self {
        FnVerifier { verdict: Box::new(verdict), calls: Mutex::default() }
    }

    /// Every program verified so far, in call order.
    pub fn programs(&self) -> Vec<String> {
        self.calls.lock().expect("call log lock").clone()
    }
}

impl Verifier for FnVerifier {
    fn name(&self) -> &str {
        "function"
    }

    fn verify(&self, program: &str, _timeout_seconds: u64) -> Result<VerifierReport, VerifierError> {
        self.calls.lock().expect("call log lock").push(program.to_string());
        Ok((self.verdict)(program))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Diagnostic, DiagnosticKind, VerifierStatus};

    #[test]
    fn lookup_by_text_or_digest_and_miss_is_error() {
        let mut script = VerifierScript::default();
        script.push("method A() {}", "a", VerifierReport::verified());
        script.entries.push(ScriptEntry {
            digest: None,
            program: Some("method B() {}".into()),
            label: None,
            report: VerifierReport::failed(vec![Diagnostic::new(DiagnosticKind::AssertionFailure, Some(1), "x")]),
        });
        let v = ScriptedVerifier::new(script).unwrap();
        assert!(v.verify("method A() {}", 20).unwrap().is_verified());
        assert_eq!(v.verify("method B() {}", 20).unwrap().status, VerifierStatus::Failed);
        assert!(matches!(v.verify("method A() { }", 20), Err(VerifierError::UnknownProgram { .. })));
        assert_eq!(v.calls().len(), 3);
        assert_eq!(v.label_of("method A() {}").as_deref(), Some("a"));
    }

    #[test]
    fn malformed_entries_are_rejected() {
        let mut script = VerifierScript::default();
        script.push("x", "bad", VerifierReport::failed(vec![]));
        assert!(ScriptedVerifier::new(script).is_err());
    }
}
