use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Temperature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeSource {
    Live,
    Cassette,
    Scripted,
}

/// Stable hash of a model request. `max_tokens` is deliberately not part of it.
pub fn request_digest(template_id: &str, substitutions: &BTreeMap<String, String>, temperature: Temperature) -> String {
    let mut h = Sha256::new();
    h.update(b"pforge-request-v1\0");
    h.update(template_id.as_bytes());
    h.update([0u8]);
    for (k, v) in substitutions {
        h.update((k.len() as u64).to_le_bytes());
        h.update(k.as_bytes());
        h.update((v.len() as u64).to_le_bytes());
        h.update(v.as_bytes());
    }
    h.update(temperature.millis().to_le_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub template_id: String,
    pub substitutions: BTreeMap<String, String>,
    pub temperature: Temperature,
    pub max_tokens: u32,
    pub response_text: String,
    pub source: ExchangeSource,
    pub request_digest: String,
    #[serde(default)]
    pub truncated: bool,
    #[serde(default)]
    pub transport_retries: u32,
    /// A recording replaced an earlier response with the same digest.
    #[serde(default)]
    pub overwrote: bool,
}

impl LlmExchange {
    pub fn recompute_digest(&self) -> String {
        request_digest(&self.template_id, &self.substitutions, self.temperature)
    }
}
