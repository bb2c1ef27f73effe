//! Prompt templates, response parsing and model backends.

mod backend;
mod parse;
mod templates;

use std::collections::BTreeMap;

pub use backend::{
    CassetteBackend, CassetteEntry, CassetteMode, LiveBackend, LlmBackend, LlmReply, LlmRequest, ScriptedLlm,
};
pub use parse::{
    extract_code_block, extract_code_blocks, is_single_call, parse_declaration, parse_sublemma, parse_verdict,
    verdict_reason, CodeBlock, SubLemmaProposal,
};
pub use templates::{placeholders_in, render_prompt, PromptTemplate, RenderedPrompt, ResponseShape, TemplateLibrary};
pub use templates::{
    ASSERTION_GATE, AUGMENT, CONSISTENCY, DECOMPOSE, GATE, GENERATE, INVARIANT_GATE, MERGE, REPAIR, STRENGTHEN,
    SUBLEMMA_ASSERTION, SUBLEMMA_INVARIANT,
};

use crate::model::{request_digest, LlmExchange, Temperature};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("template {template_id} is missing substitutions for {missing:?}")]
    MissingPlaceholders { template_id: String, missing: Vec<String> },
    #[error("template {template_id} has no placeholders named {unexpected:?}")]
    UnexpectedPlaceholders { template_id: String, unexpected: Vec<String> },
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("no recorded response for request digest {digest}")]
    CassetteMiss { digest: String },
    #[error("model provider: {0}")]
    Provider(String),
    #[error("model configuration: {0}")]
    Config(String),
    #[error("cannot read a yes/no verdict from: {0:?}")]
    UnparseableVerdict(String),
    #[error("empty model response")]
    EmptyResponse,
    #[error("malformed model response: {0}")]
    Malformed(String),
    #[error("temperature {0} lies outside [0, 1]")]
    InvalidTemperature(Temperature),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LlmError {
    /// Failures of the surroundings rather than of a model answer.
    pub fn is_environment(&self) -> bool {
        matches!(self, LlmError::Provider(_) | LlmError::Config(_) | LlmError::Io(_) | LlmError::CassetteMiss { .. })
    }
}

/// Renders templates and sends them to a backend, returning a full exchange record.
pub struct LlmGateway<B> {
    backend: B,
}

impl<B: LlmBackend> LlmGateway<B> {
    pub fn new(backend: B) -> Self {
        LlmGateway { backend }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn complete(
        &self,
        template_id: &str,
        substitutions: &BTreeMap<String, String>,
        temperature: Temperature,
        max_tokens: u32,
    ) -> Result<LlmExchange, LlmError> {
        if temperature.millis() > 1000 {
            return Err(LlmError::InvalidTemperature(temperature));
        }
        let template = TemplateLibrary.get(template_id)?;
        let prompt = template.render(substitutions)?;
        let digest = request_digest(template_id, substitutions, temperature);
        let request = LlmRequest { template_id, digest: &digest, substitutions, prompt: &prompt, temperature, max_tokens };
        let reply = self.backend.complete(&request)?;
        Ok(LlmExchange {
            template_id: template_id.to_string(),
            substitutions: substitutions.clone(),
            temperature,
            max_tokens,
            response_text: reply.text,
            source: self.backend.source(),
            request_digest: digest,
            truncated: reply.truncated,
            transport_retries: reply.transport_retries,
            overwrote: reply.overwrote,
        })
    }
}

/// Builds a substitution map from `(key, value)` pairs.
pub fn subs<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

