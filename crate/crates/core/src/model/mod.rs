//! Domain types shared by every stage of the pipeline. Pure values, no I/O.

mod config;
mod diagnostic;
mod exchange;
mod metrics;
mod plan;
mod signature;
mod transcript;
mod tree;

pub use config::{temperature_schedule, RunConfig, Temperature};
pub use diagnostic::{Diagnostic, DiagnosticKind, Location, VerifierReport, VerifierStatus};
pub use exchange::{request_digest, ExchangeSource, LlmExchange};
pub use metrics::{verify_at_k, verify_at_k_from_runs, SuccessRate};
pub use plan::{CallSite, DecompositionPlan, LiftedMethod, MethodDefinition, SourceSpan, Strategy};
pub use signature::{is_valid_identifier, DeclKind, MethodSignature, Param};
pub use transcript::{CallPurpose, Event, FinalStatus, RepairKind, RunTranscript, TimedEvent, Totals};
pub use tree::{Goal, NodeId, NodeStatus, ProofNode, ProofTree};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("retry index {retry_index} is outside the retry budget of {budget}")]
    OutOfBudget { retry_index: u32, budget: u32 },
    #[error("success rate is undefined for an empty task list")]
    UndefinedRate,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("proof tree: {0}")]
    Tree(String),
}

/// A task to verify: the program, optional proof outline and run settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VerificationTask {
    pub id: String,
    pub program: String,
    #[serde(default)]
    pub outline: Option<String>,
    #[serde(default)]
    pub config: RunConfig,
    /// Loop-lifting strategy; `None` verifies the program in its original shape.
    #[serde(default)]
    pub strategy: Option<Strategy>,
}

impl VerificationTask {
    pub fn new(id: impl Into<String>, program: impl Into<String>) -> Self {
        VerificationTask {
            id: id.into(),
            program: program.into(),
            outline: None,
            config: RunConfig::default(),
            strategy: None,
        }
    }
}
