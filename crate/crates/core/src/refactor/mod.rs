//! Code-shape transformations: stripping, loop lifting, consistency checks
//! and restoration.

mod decompose;
mod lift;
mod plan;
mod restore;
mod strip;
mod types;

pub use decompose::{check_decomposition_consistency, decompose_checked, decompose_code, find_target_method, Consistency};
pub use lift::{lift_loops, LiftOutput};
pub use plan::{check_plan_invariants, identity_plan, plan_from_decomposed};
pub(crate) use strip::decl_removal_range;
pub use restore::{restore_code, MappingEntry, MappingReport, Restoration, RestoreMethod};
pub use strip::{executable_tokens, same_executable_code, strip_annotations};

use crate::dafny::SyntaxError;
use crate::llm::LlmError;
use crate::model::{RunConfig, Temperature};
use crate::verifier::VerifierError;

/// Model-call knobs shared by the refactoring operations.
#[derive(Debug, Clone, Copy)]
pub struct LlmSettings {
    /// Attempts per operation (the `t` of the run configuration).
    pub attempts: u32,
    pub temperature: Temperature,
    pub max_tokens: u32,
    pub verifier_timeout_seconds: u64,
}

impl From<&RunConfig> for LlmSettings {
    fn from(c: &RunConfig) -> Self {
        LlmSettings {
            attempts: c.max_generation_attempts_t,
            temperature: c.initial_temperature,
            max_tokens: c.max_tokens,
            verifier_timeout_seconds: c.verifier_timeout_seconds,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RefactorError {
    #[error("syntax error: {0}")]
    Syntax(#[from] SyntaxError),
    #[error("no method named `{0}`")]
    UnknownMethod(String),
    #[error("decomposition failed after {attempts} attempts: {last_reason}")]
    DecompositionFailed { attempts: u32, last_reason: String },
    #[error("decomposition abandoned after {attempts} rejected plans: {last_reason}")]
    DecompositionAbandoned { attempts: u32, last_reason: String },
    #[error("cannot lift loop: {0}")]
    NotLiftable(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error("{0}")]
    Internal(String),
}

impl RefactorError {
    pub fn is_environment(&self) -> bool {
        match self {
            RefactorError::Llm(e) => e.is_environment(),
            RefactorError::Verifier(e) => e.is_environment(),
            _ => false,
        }
    }
}
