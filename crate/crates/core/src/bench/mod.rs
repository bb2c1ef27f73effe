//! Command surface, backend wiring, task corpora and benchmark reports.

mod backends;
mod commands;
mod corpus;
mod report;

pub use backends::{load_config, ClockedVerifier, Mode, VerifierChoice};
pub use commands::{
    cmd_bench, cmd_decompose, cmd_restore, cmd_strip, cmd_verify, BenchArgs, DecomposeArgs, RestoreArgs, RunArgs,
    TranscriptFile, VerifyArgs, VerifyOutcome,
};
pub use corpus::{load_corpus, CorpusSettings, Expected, TaskDescriptor};
pub use report::{BenchReport, TaskRecord};

/// Process exit status; every run outcome maps to exactly one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Verified = 0,
    Failed = 1,
    Usage = 2,
    Environment = 3,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Environment(String),
    #[error("{0}")]
    Failed(String),
}

impl BenchError {
    pub fn exit(&self) -> Exit {
        match self {
            BenchError::Usage(_) => Exit::Usage,
            BenchError::Environment(_) => Exit::Environment,
            BenchError::Failed(_) => Exit::Failed,
        }
    }
}

impl From<crate::engine::EngineError> for BenchError {
    fn from(e: crate::engine::EngineError) -> Self {
        if e.is_environment() {
            BenchError::Environment(e.to_string())
        } else {
            BenchError::Failed(e.to_string())
        }
    }
}

impl From<crate::refactor::RefactorError> for BenchError {
    fn from(e: crate::refactor::RefactorError) -> Self {
        if e.is_environment() {
            BenchError::Environment(e.to_string())
        } else {
            BenchError::Failed(e.to_string())
        }
    }
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|e| BenchError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<(), BenchError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::Environment(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| BenchError::Environment(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}
