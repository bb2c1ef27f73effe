use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticKind {
    SyntaxError,
    ResolutionError,
    AssertionFailure,
    InvariantOnEntry,
    InvariantMaintenance,
    PostconditionFailure,
    PreconditionCallFailure,
    Timeout,
    Unknown,
}

impl DiagnosticKind {
    pub fn is_invariant(self) -> bool {
        matches!(self, DiagnosticKind::InvariantOnEntry | DiagnosticKind::InvariantMaintenance)
    }

    /// Errors that make the program unusable before any proof obligation runs.
    pub fn is_static(self) -> bool {
        matches!(self, DiagnosticKind::SyntaxError | DiagnosticKind::ResolutionError)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    pub line: u32,
    pub column: u32,
}

/// One verifier complaint.
///
/// For postcondition failures `line`/`column` point at the `ensures` clause
/// (the verifier's related location) and `secondary` at the return path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    #[serde(default)]
    pub file: String,
    pub line: Option<u32>,
    pub column: Option<u32>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary: Option<Location>,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, line: Option<u32>, message: impl Into<String>) -> Self {
        Diagnostic { kind, file: String::new(), line, column: None, message: message.into(), secondary: None }
    }

    /// Every line this diagnostic refers to.
    pub fn lines(&self) -> impl Iterator<Item = u32> + '_ {
        self.line.into_iter().chain(self.secondary.as_ref().map(|l| l.line))
    }

    pub fn render(&self) -> String {
        match (self.line, self.column) {
            (Some(l), Some(c)) => format!("{}({l},{c}): {:?}: {}", self.file, self.kind, self.message),
            (Some(l), None) => format!("{}({l}): {:?}: {}", self.file, self.kind, self.message),
            _ => format!("{}: {:?}: {}", self.file, self.kind, self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerifierStatus {
    Verified,
    Failed,
    Timeout,
    CrashOrUnusable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierReport {
    pub status: VerifierStatus,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default)]
    pub wall_time_seconds: f64,
    #[serde(default)]
    pub raw_output: String,
}

impl VerifierReport {
    pub fn verified() -> Self {
        VerifierReport {
            status: VerifierStatus::Verified,
            diagnostics: Vec::new(),
            wall_time_seconds: 0.0,
            raw_output: String::new(),
        }
    }

    pub fn failed(diagnostics: Vec<Diagnostic>) -> Self {
        VerifierReport { status: VerifierStatus::Failed, diagnostics, wall_time_seconds: 0.0, raw_output: String::new() }
    }

    pub fn is_verified(&self) -> bool {
        self.status == VerifierStatus::Verified
    }

    /// Checks the status/diagnostics consistency rules.
    pub fn is_well_formed(&self) -> bool {
        match self.status {
            VerifierStatus::Verified => self.diagnostics.iter().all(|d| d.kind == DiagnosticKind::Unknown),
            VerifierStatus::Failed => !self.diagnostics.is_empty(),
            _ => true,
        }
    }

    /// Feedback text handed back to the model.
    pub fn feedback(&self) -> String {
        if self.diagnostics.is_empty() {
            return format!("verifier status: {:?}", self.status);
        }
        self.diagnostics.iter().map(Diagnostic::render).collect::<Vec<_>>().join("\n")
    }
}
