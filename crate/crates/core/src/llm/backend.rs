use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{LlmError, RenderedPrompt};
use crate::model::{ExchangeSource, Temperature};

/// What a backend sees of one request.
#[derive(Debug, Clone, Copy)]
pub struct LlmRequest<'a> {
    pub template_id: &'a str,
    pub digest: &'a str,
    pub substitutions: &'a BTreeMap<String, String>,
    pub prompt: &'a RenderedPrompt,
    pub temperature: Temperature,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LlmReply {
    pub text: String,
    pub truncated: bool,
    pub transport_retries: u32,
    /// Recording replaced an earlier response with the same digest.
    pub overwrote: bool,
}

impl LlmReply {
    pub fn text(text: impl Into<String>) -> Self {
        LlmReply { text: text.into(), ..LlmReply::default() }
    }
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest<'_>) -> Result<LlmReply, LlmError>;
    fn source(&self) -> ExchangeSource;
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, request: &LlmRequest<'_>) -> Result<LlmReply, LlmError> {
        (**self).complete(request)
    }
    fn source(&self) -> ExchangeSource {
        (**self).source()
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn complete(&self, request: &LlmRequest<'_>) -> Result<LlmReply, LlmError> {
        (**self).complete(request)
    }
    fn source(&self) -> ExchangeSource {
        (**self).source()
    }
}

/// OpenAI-compatible chat-completions client.
#[derive(Debug, Clone)]
pub struct LiveBackend {
    url: String,
    model: String,
    api_key: Option<String>,
    max_retries: u32,
    backoff: Duration,
    agent: ureq::Agent,
}

impl LiveBackend {
    pub const REQUEST_TIMEOUT: Duration = Duration::from_secs(20);

    /// `endpoint` is either a base URL (`.../v1`) or the full completions URL.
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>) -> Result<Self, LlmError> {
        if endpoint.trim().is_empty() || model.trim().is_empty() {
            return Err(LlmError::Config("endpoint and model must be non-empty".into()));
        }
        let endpoint = endpoint.trim_end_matches('/');
        let url = if endpoint.ends_with("/chat/completions") {
            endpoint.to_string()
        } else {
            format!("{endpoint}/chat/completions")
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Self::REQUEST_TIMEOUT))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(LiveBackend {
            url,
            model: model.to_string(),
            api_key,
            max_retries: 3,
            backoff: Duration::from_secs(1),
            agent,
        })
    }

    /// Reads `PF_LLM_ENDPOINT`, `PF_LLM_MODEL` and the optional `PF_LLM_API_KEY`.
    pub fn from_env() -> Result<Self, LlmError> {
        let get = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        let endpoint = get("PF_LLM_ENDPOINT").ok_or_else(|| LlmError::Config("PF_LLM_ENDPOINT is not set".into()))?;
        let model = get("PF_LLM_MODEL").ok_or_else(|| LlmError::Config("PF_LLM_MODEL is not set".into()))?;
        LiveBackend::new(&endpoint, &model, get("PF_LLM_API_KEY"))
    }

    pub fn with_retry_policy(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<LlmReply, Attempt> {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}: {}", truncate(&text))));
        }
        if status >= 400 {
            return Err(Attempt::Fatal(LlmError::Provider(format!("HTTP {status}: {}", truncate(&text)))));
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Attempt::Fatal(LlmError::Provider(format!("bad JSON: {e}"))))?;
        let choice = &v["choices"][0];
        let content = choice["message"]["content"]
            .as_str()
            .ok_or_else(|| Attempt::Fatal(LlmError::Provider(format!("no message content in {}", truncate(&text)))))?;
        Ok(LlmReply {
            text: content.to_string(),
            truncated: choice["finish_reason"].as_str() == Some("length"),
            ..LlmReply::default()
        })
    }
}

enum Attempt {
    Retry(String),
    Fatal(LlmError),
}

fn truncate(s: &str) -> String {
    s.chars().take(300).collect()
}

impl LlmBackend for LiveBackend {
    fn complete(&self, request: &LlmRequest<'_>) -> Result<LlmReply, LlmError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.prompt.system},
                {"role": "user", "content": request.prompt.user},
            ],
            "temperature": request.temperature.as_f64(),
            "max_tokens": request.max_tokens,
        });
        let mut last = String::new();
        for retry in 0..=self.max_retries {
            if retry > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(retry - 1));
            }
            match self.attempt(&body) {
                Ok(mut reply) => {
                    reply.transport_retries = retry;
                    return Ok(reply);
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("model request failed (attempt {}): {msg}", retry + 1);
                    last = msg;
                }
            }
        }
        Err(LlmError::Provider(format!("gave up after {} retries: {last}", self.max_retries)))
    }

    fn source(&self) -> ExchangeSource {
        ExchangeSource::Live
    }
}

/// One recorded response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub digest: String,
    pub template_id: String,
    pub temperature: Temperature,
    pub response: String,
    #[serde(default)]
    pub truncated: bool,
    pub recorded_at: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CassetteMode {
    Record,
    Replay,
}

/// Record/replay store keyed by request digest. The file is a JSON array
/// of [`CassetteEntry`]; recording rewrites it after every call.
pub struct CassetteBackend {
    mode: CassetteMode,
    path: Option<PathBuf>,
    inner: Option<Box<dyn LlmBackend>>,
    entries: Mutex<Vec<CassetteEntry>>,
}

impl CassetteBackend {
    pub fn replay(path: &Path) -> Result<Self, LlmError> {
        let entries = Self::load(path)?;
        Ok(CassetteBackend { mode: CassetteMode::Replay, path: Some(path.to_path_buf()), inner: None, entries: Mutex::new(entries) })
    }

    pub fn replay_entries(entries: Vec<CassetteEntry>) -> Self {
        CassetteBackend { mode: CassetteMode::Replay, path: None, inner: None, entries: Mutex::new(entries) }
    }

    /// Records through `inner`. An existing file is loaded and extended.
    pub fn record(path: &Path, inner: Box<dyn LlmBackend>) -> Result<Self, LlmError> {
        let entries = if path.exists() { Self::load(path)? } else { Vec::new() };
        Ok(CassetteBackend { mode: CassetteMode::Record, path: Some(path.to_path_buf()), inner: Some(inner), entries: Mutex::new(entries) })
    }

    pub fn mode(&self) -> CassetteMode {
        self.mode
    }

    pub fn load(path: &Path) -> Result<Vec<CassetteEntry>, LlmError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn entries(&self) -> Vec<CassetteEntry> {
        self.entries.lock().expect("cassette lock").clone()
    }

    pub fn save_to(entries: &[CassetteEntry], path: &Path) -> Result<(), LlmError> {
        std::fs::write(path, serde_json::to_string_pretty(entries)? + "\n")?;
        Ok(())
    }
}

impl LlmBackend for CassetteBackend {
    fn complete(&self, request: &LlmRequest<'_>) -> Result<LlmReply, LlmError> {
        match self.mode {
            CassetteMode::Replay => {
                let entries = self.entries.lock().expect("cassette lock");
                entries
                    .iter()
                    .rev()
                    .find(|e| e.digest == request.digest)
                    .map(|e| LlmReply { text: e.response.clone(), truncated: e.truncated, ..LlmReply::default() })
                    .ok_or_else(|| LlmError::CassetteMiss { digest: request.digest.to_string() })
            }
            CassetteMode::Record => {
                let inner = self.inner.as_ref().expect("record mode has an inner backend");
                let mut reply = inner.complete(request)?;
                let entry = CassetteEntry {
                    digest: request.digest.to_string(),
                    template_id: request.template_id.to_string(),
                    temperature: request.temperature,
                    response: reply.text.clone(),
                    truncated: reply.truncated,
                    recorded_at: chrono::Utc::now().to_rfc3339(),
                };
                let mut entries = self.entries.lock().expect("cassette lock");
                if let Some(old) = entries.iter_mut().find(|e| e.digest == entry.digest) {
                    log::warn!("cassette: overwriting response for digest {}", entry.digest);
                    *old = entry;
                    reply.overwrote = true;
                } else {
                    entries.push(entry);
                }
                if let Some(path) = &self.path {
                    Self::save_to(&entries, path)?;
                }
                Ok(reply)
            }
        }
    }

    fn source(&self) -> ExchangeSource {
        match self.mode {
            CassetteMode::Replay => ExchangeSource::Cassette,
            CassetteMode::Record => self.inner.as_ref().map_or(ExchangeSource::Live, |b| b.source()),
        }
    }
}

/// `(template_id, substitutions, temperature)` of one request.
pub type RequestRecord = (String, BTreeMap<String, String>, Temperature);

type ResponderFn = dyn Fn(&LlmRequest<'_>) -> Result<String, LlmError> + Send + Sync;

/// In-process model for tests: either a function of the request or
/// per-template queues of canned responses.
pub struct ScriptedLlm {
    responder: Option<Box<ResponderFn>>,
    queues: Mutex<HashMap<String, VecDeque<String>>>,
    log: Mutex<Vec<RequestRecord>>,
}

impl ScriptedLlm {
    pub fn from_fn(f: impl Fn(&LlmRequest<'_>) -> Result<String, LlmError> + Send + Sync + 'static) -> Self {
        ScriptedLlm { responder: Some(Box::new(f)), queues: Mutex::default(), log: Mutex::default() }
    }

    pub fn queued<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<String>)>,
        S: Into<String>,
    {
        let queues = responses.into_iter().map(|(k, v)| (k.into(), v.into_iter().collect())).collect();
        ScriptedLlm { responder: None, queues: Mutex::new(queues), log: Mutex::default() }
    }

    /// `(template_id, substitutions, temperature)` of every request so far.
    pub fn requests(&self) -> Vec<RequestRecord> {
        self.log.lock().expect("log lock").clone()
    }
}

impl LlmBackend for ScriptedLlm {
    fn complete(&self, request: &LlmRequest<'_>) -> Result<LlmReply, LlmError> {
        self.log.lock().expect("log lock").push((
            request.template_id.to_string(),
            request.substitutions.clone(),
            request.temperature,
        ));
        if let Some(f) = &self.responder {
            return f(request).map(LlmReply::text);
        }
        let mut queues = self.queues.lock().expect("queue lock");
        queues
            .get_mut(request.template_id)
            .and_then(VecDeque::pop_front)
            .map(LlmReply::text)
            .ok_or_else(|| LlmError::Provider(format!("no scripted response left for {}", request.template_id)))
    }

    fn source(&self) -> ExchangeSource {
        ExchangeSource::Scripted
    }
}

#[cfg(test)]
mod tests {
    use super::super::{subs, LlmGateway, GATE};
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn gate_subs() -> BTreeMap<String, String> {
        subs([("signature", "lemma L()".to_string()), ("program", "".to_string()), ("textual_proof", "".to_string())])
    }

    /// Minimal one-shot HTTP server returning `responses` in order.
    fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (format!("http://{addr}/v1"), handle)
    }

    #[test]
    fn live_backend_sends_max_tokens_and_retries_server_errors() {
        let ok = r#"{"choices":[{"message":{"content":"yes"},"finish_reason":"length"}]}"#.to_string();
        let (url, server) = serve(vec![(503, "{}".into()), (200, ok)]);
        let live = LiveBackend::new(&url, "m", Some("k".into())).unwrap().with_retry_policy(3, Duration::from_millis(5));
        let gw = LlmGateway::new(live);
        let ex = gw.complete(GATE, &gate_subs(), Temperature::from_millis(500), 4028).unwrap();
        assert_eq!(ex.response_text, "yes");
        assert!(ex.truncated);
        assert_eq!(ex.transport_retries, 1);
        let bodies = server.join().unwrap();
        let sent: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
        assert_eq!(sent["max_tokens"], 4028);
        assert_eq!(sent["temperature"], 0.5);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, server) = serve(vec![(401, r#"{"error":"bad key"}"#.into())]);
        let live = LiveBackend::new(&url, "m", None).unwrap().with_retry_policy(3, Duration::from_millis(5));
        let err = LlmGateway::new(live).complete(GATE, &gate_subs(), Temperature::ZERO, 10).unwrap_err();
        assert!(matches!(err, LlmError::Provider(m) if m.contains("401")));
        assert_eq!(server.join().unwrap().len(), 1);
    }

    #[test]
    fn record_then_replay_round_trips_and_flags_overwrites() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let rec = CassetteBackend::record(&path, Box::new(ScriptedLlm::from_fn(|_| Ok("yes".into())))).unwrap();
        let gw = LlmGateway::new(rec);
        let t = Temperature::from_millis(500);
        let first = gw.complete(GATE, &gate_subs(), t, 4028).unwrap();
        assert_eq!(first.source, ExchangeSource::Scripted);
        let again = gw.backend().complete(&LlmRequest {
            template_id: GATE,
            digest: &first.request_digest,
            substitutions: &gate_subs(),
            prompt: &RenderedPrompt { system: String::new(), user: String::new() },
            temperature: t,
            max_tokens: 4028,
        });
        assert!(again.unwrap().overwrote);

        let gw = LlmGateway::new(CassetteBackend::replay(&path).unwrap());
        let replayed = gw.complete(GATE, &gate_subs(), t, 100).unwrap();
        assert_eq!(replayed.response_text, "yes");
        assert_eq!(replayed.request_digest, first.request_digest);
        assert_eq!(replayed.source, ExchangeSource::Cassette);
        let miss = gw.complete(GATE, &gate_subs(), Temperature::from_millis(200), 100);
        assert!(matches!(miss, Err(LlmError::CassetteMiss { .. })));
    }

    #[test]
    fn queued_script_runs_dry_with_an_error() {
        let llm = ScriptedLlm::queued([(GATE, vec!["no".to_string()])]);
        let gw = LlmGateway::new(&llm);
        assert_eq!(gw.complete(GATE, &gate_subs(), Temperature::ZERO, 1).unwrap().response_text, "no");
        assert!(gw.complete(GATE, &gate_subs(), Temperature::ZERO, 1).is_err());
        assert_eq!(llm.requests().len(), 2);
    }
}
