//! Chat-model backend over HTTP.
//!
//! [`ChatBackend`] turns each agent role into a templated prompt, sends it
//! through a [`ChatTransport`], and parses a JSON reply (one repair retry).
//! [`HttpTransport`] is the real transport: blocking `ureq`, a small
//! provider adapter for the request/response shape, an in-flight limiter
//! that queues callers, and one transcript file per call.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompts::{fill, PromptSet};
use super::{
    BackendError, Coach, CoachContext, CoachOutput, DedupRequest, DedupResponse, Deduplicator, Investigator,
    InvestigatorOutput, InvestigatorRequest, MatchVerdict, Validator,
};
use crate::benchgen::{QueryGroup, QueryJudge, QueryWriter};
use crate::model::{AssetRecord, Candidate};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: String,
    pub content: String,
}

/// Provider-agnostic request: a system text, a user text, and any earlier
/// turns of the same exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    /// Agent role label, used only for transcripts.
    pub label: String,
    pub system: String,
    pub user: String,
    #[serde(default)]
    pub transcript: Vec<Turn>,
}

pub trait ChatTransport: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    /// `/chat/completions` with bearer auth.
    OpenAi,
    /// `/v1/messages` with `x-api-key`.
    Anthropic,
}

impl std::str::FromStr for Provider {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "openai" | "openai-compatible" => Ok(Provider::OpenAi),
            "anthropic" => Ok(Provider::Anthropic),
            other => Err(BackendError::Config(format!("unknown provider `{other}`"))),
        }
    }
}

impl Provider {
    fn endpoint(self, base: &str) -> String {
        let base = base.trim_end_matches('/');
        match self {
            Provider::OpenAi => format!("{base}/chat/completions"),
            Provider::Anthropic => format!("{base}/v1/messages"),
        }
    }

    fn headers(self, key: &str) -> Vec<(&'static str, String)> {
        match self {
            Provider::OpenAi => vec![("authorization", format!("Bearer {key}"))],
            Provider::Anthropic => vec![("x-api-key", key.to_string()), ("anthropic-version", "2023-06-01".into())],
        }
    }

    pub fn body(self, model: &str, req: &ChatRequest) -> Value {
        let mut turns: Vec<Value> =
            req.transcript.iter().map(|t| json!({"role": t.role, "content": t.content})).collect();
        turns.push(json!({"role": "user", "content": req.user}));
        match self {
            Provider::OpenAi => {
                turns.insert(0, json!({"role": "system", "content": req.system}));
                json!({"model": model, "messages": turns})
            }
            Provider::Anthropic => json!({"model": model, "max_tokens": 4096, "system": req.system, "messages": turns}),
        }
    }

    pub fn extract(self, resp: &Value) -> Result<String, BackendError> {
        let text = match self {
            Provider::OpenAi => resp.pointer("/choices/0/message/content").and_then(Value::as_str).map(String::from),
            Provider::Anthropic => resp.get("content").and_then(Value::as_array).map(|blocks| {
                blocks.iter().filter_map(|b| b.get("text").and_then(Value::as_str)).collect::<Vec<_>>().join("")
            }),
        };
        text.ok_or_else(|| BackendError::Malformed(format!("no completion text in response: {resp}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpSettings {
    pub provider: Provider,
    pub base_url: String,
    pub model: String,
    pub api_key: String,
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub transcript_dir: Option<PathBuf>,
}

pub const ENV_API_KEY: &str = "SCOUT_API_KEY";
pub const ENV_BASE_URL: &str = "SCOUT_BASE_URL";
pub const ENV_MODEL: &str = "SCOUT_MODEL";
pub const ENV_PROVIDER: &str = "SCOUT_PROVIDER";

impl HttpSettings {
    /// Read settings from an environment lookup. A missing key or model is a
    /// configuration error.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, BackendError> {
        let need = |k: &str| {
            get(k).filter(|v| !v.trim().is_empty()).ok_or_else(|| BackendError::Config(format!("{k} is not set")))
        };
        let api_key = need(ENV_API_KEY)?;
        let model = need(ENV_MODEL)?;
        let provider: Provider = get(ENV_PROVIDER).unwrap_or_else(|| "openai".into()).parse()?;
        let base_url = get(ENV_BASE_URL).unwrap_or_else(|| match provider {
            Provider::OpenAi => "https://api.openai.com/v1".into(),
            Provider::Anthropic => "https://api.anthropic.com".into(),
        });
        Ok(Self {
            provider,
            base_url,
            model,
            api_key,
            timeout: Duration::from_secs(300),
            max_in_flight: 8,
            transcript_dir: None,
        })
    }

    pub fn from_env() -> Result<Self, BackendError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }
}

/// Counting semaphore: callers beyond the limit wait for a free slot.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpTransport {
    settings: HttpSettings,
    agent: ureq::Agent,
    limiter: Limiter,
    seq: AtomicU64,
}

impl HttpTransport {
    pub fn new(settings: HttpSettings) -> Result<Self, BackendError> {
        if let Some(dir) = &settings.transcript_dir {
            fs::create_dir_all(dir).map_err(|e| BackendError::Config(format!("transcript dir: {e}")))?;
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { limiter: Limiter::new(settings.max_in_flight), agent, settings, seq: AtomicU64::new(0) })
    }

    fn post(&self, body: &Value) -> Result<Value, BackendError> {
        let s = &self.settings;
        let mut call = self.agent.post(&s.provider.endpoint(&s.base_url));
        for (k, v) in s.provider.headers(&s.api_key) {
            call = call.header(k, &v);
        }
        let mut resp = call.send_json(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => BackendError::Timeout,
            other => BackendError::Transport(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Transport(format!("HTTP {status}: {text}")));
        }
        serde_json::from_str(&text).map_err(|e| BackendError::Malformed(format!("response body: {e}")))
    }

    fn record(&self, seq: u64, req: &ChatRequest, body: &Value, outcome: &Result<String, BackendError>) {
        let Some(dir) = &self.settings.transcript_dir else { return };
        let entry = json!({
            "seq": seq,
            "label": req.label,
            "provider": self.settings.provider,
            "model": self.settings.model,
            "request": body,
            "response": outcome.as_ref().ok(),
            "error": outcome.as_ref().err().map(|e| e.to_string()),
        });
        let path = dir.join(format!("{seq:06}-{}.json", req.label));
        if let Err(e) = fs::write(&path, serde_json::to_string_pretty(&entry).unwrap_or_default()) {
            log::warn!("could not write transcript {}: {e}", path.display());
        }
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let body = self.settings.provider.body(&self.settings.model, req);
        let seq = self.seq.fetch_add(1, Ordering::SeqCst);
        let outcome = {
            let _permit = self.limiter.acquire();
            self.post(&body).and_then(|v| self.settings.provider.extract(&v))
        };
        self.record(seq, req, &body, &outcome);
        outcome
    }
}

/// The outermost `{...}` of a reply, tolerating prose or code fences around it.
fn json_span(text: &str) -> &str {
    match (text.find('{'), text.rfind('}')) {
        (Some(a), Some(b)) if a < b => &text[a..=b],
        _ => text,
    }
}

/// All four agent roles over one chat transport.
pub struct ChatBackend<T> {
    pub transport: T,
    pub prompts: PromptSet,
}

fn list(xs: &[String]) -> String {
    if xs.is_empty() {
        "(none)".into()
    } else {
        xs.join("; ")
    }
}

impl<T: ChatTransport> ChatBackend<T> {
    pub fn new(transport: T) -> Self {
        Self { transport, prompts: PromptSet::default() }
    }

    /// Send a prompt and parse the reply; on a parse failure ask once for a repair.
    fn ask<R: DeserializeOwned>(&self, label: &str, user: String) -> Result<R, BackendError> {
        let req = ChatRequest { label: label.into(), system: SYSTEM.into(), user, transcript: vec![] };
        let reply = self.transport.complete(&req)?;
        let err = match serde_json::from_str(json_span(&reply)) {
            Ok(v) => return Ok(v),
            Err(e) => e.to_string(),
        };
        log::warn!("{label}: unparseable reply ({err}); asking for a repair");
        let slots = BTreeMap::from([("error", err), ("reply", reply.clone())]);
        let repair = ChatRequest {
            label: format!("{label}-repair"),
            system: SYSTEM.into(),
            user: fill(&self.prompts.repair, &slots)?,
            transcript: vec![
                Turn { role: "user".into(), content: req.user },
                Turn { role: "assistant".into(), content: reply },
            ],
        };
        let second = self.transport.complete(&repair)?;
        serde_json::from_str(json_span(&second)).map_err(|e| BackendError::Malformed(format!("{label}: {e}")))
    }
}

const SYSTEM: &str = "You are one agent in a drug asset scouting system. Follow the output format exactly.";

impl<T: ChatTransport> Investigator for ChatBackend<T> {
    fn investigate(&self, req: &InvestigatorRequest) -> Result<InvestigatorOutput, BackendError> {
        let directive = if req.directive.is_empty() { "(none: search the query as stated)".to_string() } else { req.directive.clone() };
        let slots = BTreeMap::from([
            ("language", req.language.as_str().to_string()),
            ("query", req.query.clone()),
            ("directive", directive),
            ("instructions", if req.instructions.is_empty() { "(none)".into() } else { req.instructions.clone() }),
            ("known_assets", list(&req.known_assets)),
            ("known_candidates", list(&req.known_candidates)),
        ]);
        self.ask("investigator", fill(&self.prompts.investigator, &slots)?)
    }
}

impl<T: ChatTransport> Validator for ChatBackend<T> {
    fn validate(&self, query: &str, candidate: &Candidate) -> Result<MatchVerdict, BackendError> {
        let slots = BTreeMap::from([
            ("query", query.to_string()),
            ("candidate", candidate.raw_name.clone()),
            ("source_url", candidate.source_url.clone()),
        ]);
        let verdict: MatchVerdict = self.ask("validator", fill(&self.prompts.validator, &slots)?)?;
        verdict.check().map_err(BackendError::Malformed)?;
        Ok(verdict)
    }
}

impl<T: ChatTransport> Deduplicator for ChatBackend<T> {
    fn resolve(&self, req: &DedupRequest) -> Result<DedupResponse, BackendError> {
        let items: Vec<String> = req
            .items
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{i}: {}", serde_json::to_string(r).unwrap_or_default()))
            .collect();
        let existing: Vec<String> = req
            .existing
            .iter()
            .map(|e| format!("{} (aliases: {})", e.canonical_name, e.aliases.iter().cloned().collect::<Vec<_>>().join(", ")))
            .collect();
        let slots = BTreeMap::from([("items", items.join("\n")), ("existing", list(&existing))]);
        self.ask("deduplicator", fill(&self.prompts.deduplicator, &slots)?)
    }
}

impl<T: ChatTransport> Coach for ChatBackend<T> {
    fn expand(&self, ctx: &CoachContext) -> Result<CoachOutput, BackendError> {
        let lineage: Vec<String> = ctx.lineage.iter().map(|(d, i)| format!("{d} [{i}]")).collect();
        let queries: Vec<String> =
            ctx.executed_queries.iter().map(|q| format!("[{}] {}", q.language, q.query_text)).collect();
        let slots = BTreeMap::from([
            ("k", ctx.k.to_string()),
            ("query", ctx.query.clone()),
            ("directive", if ctx.directive.is_empty() { "(root)".into() } else { ctx.directive.clone() }),
            ("instructions", ctx.instructions.clone()),
            ("lineage", list(&lineage)),
            ("known_assets", list(&ctx.known_assets)),
            ("known_candidates", list(&ctx.known_candidates)),
            ("executed_queries", list(&queries)),
            ("visited_domains", list(&ctx.visited_domains)),
            ("failure_summary", if ctx.failure_summary.is_empty() { "(none)".into() } else { ctx.failure_summary.clone() }),
            ("investigator_prompt", ctx.investigator_prompt.clone()),
        ]);
        self.ask("coach", fill(&self.prompts.coach, &slots)?)
    }

    fn summarize_failures(&self, rationales: &[String], cap: usize) -> Result<String, BackendError> {
        let slots = BTreeMap::from([("cap", cap.to_string()), ("rationales", rationales.join("\n"))]);
        let req = ChatRequest {
            label: "summarizer".into(),
            system: SYSTEM.into(),
            user: fill(&self.prompts.summarizer, &slots)?,
            transcript: vec![],
        };
        self.transport.complete(&req)
    }
}

#[derive(Deserialize)]
struct WrittenQuery {
    query: String,
}

impl<T: ChatTransport> QueryWriter for ChatBackend<T> {
    fn write(&self, asset: &AssetRecord, group: &QueryGroup, feedback: Option<&str>) -> Result<String, BackendError> {
        let mut shown = asset.clone();
        shown.aliases.clear();
        shown.patents.clear();
        shown.provenance.clear();
        shown.canonical_name = "(withheld)".into();
        let forbidden: Vec<String> = asset.aliases.iter().chain(&asset.patents).cloned().collect();
        let slots = BTreeMap::from([
            ("asset", serde_json::to_string(&shown).unwrap_or_default()),
            ("template", group.template.clone()),
            ("forbidden", list(&forbidden)),
            ("feedback", feedback.unwrap_or("(none)").to_string()),
        ]);
        let out: WrittenQuery = self.ask("query-writer", fill(&self.prompts.query_writer, &slots)?)?;
        Ok(out.query)
    }
}

impl<T: ChatTransport> QueryJudge for ChatBackend<T> {
    fn judge(&self, query: &str, asset: &AssetRecord) -> Result<MatchVerdict, BackendError> {
        let source = asset.provenance.first().map(|p| p.source_url.clone()).unwrap_or_default();
        let candidate = Candidate {
            raw_name: asset.canonical_name.clone(),
            source_url: source,
            discovered_by_node: crate::model::NodeId::ROOT,
            discovered_language: asset.origin_language.clone(),
            epoch: 0,
        };
        self.validate(query, &candidate)
    }
}
