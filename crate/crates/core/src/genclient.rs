//! Text-generation backends.
//!
//! [`HttpChatBackend`] speaks the chat-completion wire format
//! (`{model, messages, temperature, max_tokens}` in, `choices[0].message.content`
//! out). [`MockBackend`] is an offline stand-in whose output is a pure
//! function of `(prompt, seed)`; a configurable share of label-bearing
//! prompts gets a flipped answer so the verifier's drop path is exercised.
//!
//! Retries and bounded batch parallelism are backend-agnostic and live in
//! [`generate_with`] and [`generate_batch_with`].

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::hashing::{stable_hash, unit_interval};
use crate::prompting::label_clause;
use crate::types::{label_to_answer_phrase, ClassificationLabel, LinguisticFeature};

pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_MAX_NEW_TOKENS: u32 = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend unavailable after {attempts} attempts: {last_error}")]
    BackendUnavailable { attempts: u32, last_error: String },
    #[error("environment variable {0} holding the API key is not set")]
    AuthMissing(String),
    #[error("backend rejected the prompt as too long: {0}")]
    PromptTooLong(String),
    #[error("backend rejected the request with status {status}: {body}")]
    Rejected { status: u16, body: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_new_tokens: u32,
    pub temperature: f64,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.max_new_tokens == 0 {
            return Err(GenError::InvalidRequest("max_new_tokens must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GenError::InvalidRequest(format!(
                "temperature must be a non-negative number, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub backend_name: String,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChatCompletion,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint_url: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env_var: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub mock_seed: u64,
    #[serde(default)]
    pub mock_corruption_rate: f64,
}

fn default_in_flight() -> usize {
    4
}
fn default_retry_limit() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_timeout() -> u64 {
    120_000
}

impl BackendConfig {
    pub fn mock(seed: u64, corruption_rate: f64) -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint_url: None,
            api_key_env_var: None,
            model_name: None,
            max_in_flight: default_in_flight(),
            retry_limit: 0,
            backoff_base_ms: 1,
            timeout_ms: default_timeout(),
            mock_seed: seed,
            mock_corruption_rate: corruption_rate,
        }
    }

    pub fn http(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::HttpChatCompletion,
            endpoint_url: Some(endpoint_url.into()),
            api_key_env_var: None,
            model_name: Some(model_name.into()),
            max_in_flight: default_in_flight(),
            retry_limit: default_retry_limit(),
            backoff_base_ms: default_backoff(),
            timeout_ms: default_timeout(),
            mock_seed: 0,
            mock_corruption_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.max_in_flight == 0 {
            return Err(GenError::InvalidConfig("max_in_flight must be positive".into()));
        }
        if self.backoff_base_ms == 0 {
            return Err(GenError::InvalidConfig("backoff_base_ms must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mock_corruption_rate) {
            return Err(GenError::InvalidConfig("mock_corruption_rate must lie in [0, 1]".into()));
        }
        if self.kind == BackendKind::HttpChatCompletion {
            if self.endpoint_url.as_deref().is_none_or(str::is_empty) {
                return Err(GenError::InvalidConfig("http backend needs endpoint_url".into()));
            }
            if self.model_name.as_deref().is_none_or(str::is_empty) {
                return Err(GenError::InvalidConfig("http backend needs model_name".into()));
            }
        }
        Ok(())
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            retry_limit: self.retry_limit,
            backoff_base_ms: self.backoff_base_ms,
        }
    }

    /// Instantiates the configured backend. Resolves the API key here, so a
    /// missing variable fails before any request is sent.
    pub fn build(&self) -> Result<Box<dyn Backend>, GenError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Mock => Box::new(MockBackend::new(self.mock_seed, self.mock_corruption_rate)),
            BackendKind::HttpChatCompletion => Box::new(HttpChatBackend::from_config(self)?),
        })
    }
}

/// Failure of a single attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum AttemptError {
    /// Worth retrying: transport errors, 429, 5xx.
    Transient(String),
    Fatal(GenError),
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &GenerationRequest) -> Result<String, AttemptError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retry_limit: u32,
    pub backoff_base_ms: u64,
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): `base * 2^retry`.
    pub fn backoff(&self, retry: u32) -> Duration {
        Duration::from_millis(self.backoff_base_ms.saturating_mul(1u64 << retry.min(20)))
    }
}

pub fn generate_with(
    backend: &dyn Backend,
    request: &GenerationRequest,
    policy: RetryPolicy,
) -> Result<GenerationResult, GenError> {
    request.validate()?;
    let started = Instant::now();
    let mut attempt = 0u32;
    loop {
        attempt += 1;
        match backend.complete(request) {
            Ok(text) => {
                return Ok(GenerationResult {
                    text,
                    backend_name: backend.name().to_string(),
                    latency_ms: started.elapsed().as_millis() as u64,
                    attempt_count: attempt,
                })
            }
            Err(AttemptError::Fatal(e)) => return Err(e),
            Err(AttemptError::Transient(msg)) => {
                if attempt > policy.retry_limit {
                    return Err(GenError::BackendUnavailable {
                        attempts: attempt,
                        last_error: msg,
                    });
                }
                std::thread::sleep(policy.backoff(attempt - 1));
            }
        }
    }
}

/// Runs one request against the backend described by `config`.
pub fn generate(request: &GenerationRequest, config: &BackendConfig) -> Result<GenerationResult, GenError> {
    let backend = config.build()?;
    generate_with(backend.as_ref(), request, config.retry_policy())
}

/// Runs every request with at most `max_in_flight` outstanding at once.
/// Results line up with `requests` by index; a failed item does not abort
/// the rest.
pub fn generate_batch_with(
    backend: &dyn Backend,
    requests: &[GenerationRequest],
    policy: RetryPolicy,
    max_in_flight: usize,
) -> Vec<Result<GenerationResult, GenError>> {
    let n = requests.len();
    let slots: Mutex<Vec<Option<Result<GenerationResult, GenError>>>> = Mutex::new(vec![None; n]);
    let next = AtomicUsize::new(0);
    let workers = max_in_flight.max(1).min(n);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let result = generate_with(backend, &requests[i], policy);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every index is claimed by exactly one worker"))
        .collect()
}

pub fn generate_batch(
    requests: &[GenerationRequest],
    config: &BackendConfig,
) -> Result<Vec<Result<GenerationResult, GenError>>, GenError> {
    if requests.is_empty() {
        return Err(GenError::InvalidRequest("batch must not be empty".into()));
    }
    let backend = config.build()?;
    Ok(generate_batch_with(
        backend.as_ref(),
        requests,
        config.retry_policy(),
        config.max_in_flight,
    ))
}

/// Chat-completion HTTP backend.
pub struct HttpChatBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpChatBackend {
    pub fn from_config(config: &BackendConfig) -> Result<Self, GenError> {
        config.validate()?;
        let api_key = match &config.api_key_env_var {
            Some(var) => Some(std::env::var(var).map_err(|_| GenError::AuthMissing(var.clone()))?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        Ok(Self {
            agent,
            endpoint: config.endpoint_url.clone().unwrap_or_default(),
            model: config.model_name.clone().unwrap_or_default(),
            api_key,
        })
    }

    /// JSON body sent for `request`.
    pub fn wire_body(&self, request: &GenerationRequest) -> serde_json::Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_new_tokens,
        })
    }
}

fn extract_content(body: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(body).ok()?;
    v.get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

fn looks_like_length_error(body: &str) -> bool {
    let b = body.to_ascii_lowercase();
    b.contains("context_length") || b.contains("too long") || b.contains("maximum context")
}

impl Backend for HttpChatBackend {
    fn name(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &GenerationRequest) -> Result<String, AttemptError> {
        let mut call = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(self.wire_body(request))
            .map_err(|e| AttemptError::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| AttemptError::Transient(e.to_string()))?;
        match status {
            200..=299 => extract_content(&body).ok_or_else(|| {
                AttemptError::Fatal(GenError::Rejected {
                    status,
                    body: format!("response has no choices[0].message.content: {body}"),
                })
            }),
            413 => Err(AttemptError::Fatal(GenError::PromptTooLong(body))),
            400 if looks_like_length_error(&body) => Err(AttemptError::Fatal(GenError::PromptTooLong(body))),
            408 | 429 | 500..=599 => Err(AttemptError::Transient(format!("status {status}: {body}"))),
            _ => Err(AttemptError::Fatal(GenError::Rejected { status, body })),
        }
    }
}

/// Deterministic offline backend.
#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
    corruption_rate: f64,
}

const SAME_NOTES: [&str; 3] = [
    "Both texts show the same habits here, which points to a shared hand.",
    "The two texts handle this aspect in a closely matching way.",
    "Text 1 and Text 2 make very similar choices in this respect.",
];

const DIFFERENT_NOTES: [&str; 3] = [
    "The texts diverge clearly here, which points to separate writers.",
    "Text 1 and Text 2 handle this aspect in noticeably different ways.",
    "The choices made in the two texts do not match in this respect.",
];

impl MockBackend {
    pub fn new(seed: u64, corruption_rate: f64) -> Self {
        Self { seed, corruption_rate }
    }

    fn hash(&self, tag: &str, prompt: &str) -> u64 {
        stable_hash(&[&self.seed.to_le_bytes(), tag.as_bytes(), prompt.as_bytes()])
    }

    /// Label asserted by the prompt's label clause, if it carries one.
    pub fn known_label(prompt: &str) -> Option<ClassificationLabel> {
        ClassificationLabel::ALL
            .into_iter()
            .filter_map(|l| prompt.find(label_clause(l)).map(|at| (at, l)))
            .min_by_key(|(at, _)| *at)
            .map(|(_, l)| l)
    }

    /// Whether the answer emitted for `prompt` contradicts its label clause.
    pub fn is_corrupted(&self, prompt: &str) -> bool {
        Self::known_label(prompt).is_some() && unit_interval(self.hash("corrupt", prompt)) < self.corruption_rate
    }

    /// Label the explanation body argues for.
    pub fn explained_label(&self, prompt: &str) -> ClassificationLabel {
        Self::known_label(prompt).unwrap_or_else(|| {
            if self.hash("label", prompt) & 1 == 0 {
                ClassificationLabel::SameAuthor
            } else {
                ClassificationLabel::DifferentAuthor
            }
        })
    }

    pub fn respond(&self, prompt: &str) -> String {
        let label = self.explained_label(prompt);
        let answer = if self.is_corrupted(prompt) { label.flipped() } else { label };
        let same = label == ClassificationLabel::SameAuthor;
        let (kind, claim, notes) = if same {
            ("similarities", "both texts were written by the same author", &SAME_NOTES)
        } else {
            ("differences", "the texts were written by different authors", &DIFFERENT_NOTES)
        };
        let mut out = format!(
            "{} Upon analyzing Text 1 and Text 2 based on the listed writing style characteristics, we find the following {kind} that could suggest that {claim}:\n",
            label_to_answer_phrase(answer)
        );
        for (i, feature) in LinguisticFeature::ALL.iter().enumerate() {
            let pick = self.hash(&format!("feature-{i}"), prompt) as usize % notes.len();
            out.push_str(&format!("{}: {}\n", feature.heading(), notes[pick]));
        }
        let conclusion = if same { "the same author" } else { "different authors" };
        out.push_str(&format!(
            "In conclusion, based on the aforementioned {kind} in writing style, expressions, tone, and other characteristics, it is plausible that Text1 and Text2 were written by {conclusion}."
        ));
        out
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &GenerationRequest) -> Result<String, AttemptError> {
        Ok(self.respond(&request.prompt))
    }
}
