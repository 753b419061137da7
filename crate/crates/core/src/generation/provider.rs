use alloc::collections::VecDeque;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::prompt::PromptBundle;
use super::{GenerationError, ParsedResponse};
use crate::model::render_dataset_text;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ProviderConfig {
    /// Chat-completions URL for remote providers.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_ms: u64,
    /// Retries after the first attempt.
    pub retry_budget: u32,
    /// First backoff delay; doubles per retry.
    pub backoff_ms: u64,
    /// Environment variable holding the API credential.
    pub credential_env: String,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            temperature: 0.7,
            max_output_tokens: 4096,
            timeout_ms: 120_000,
            retry_budget: 3,
            backoff_ms: 500,
            credential_env: "IOTGEN_API_KEY".into(),
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.timeout_ms == 0 {
            return Err(GenerationError::InvalidConfig("timeout must be positive".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(GenerationError::InvalidConfig("temperature must be a non-negative number".into()));
        }
        Ok(())
    }

    /// Delay before retry number `retry` (0-based).
    pub fn backoff(&self, retry: u32) -> u64 {
        self.backoff_ms.saturating_mul(1u64 << retry.min(20))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
}

impl ChatRequest {
    pub fn new(bundle: &PromptBundle, cfg: &ProviderConfig) -> Self {
        ChatRequest {
            model: cfg.model.clone(),
            system: bundle.system_message.clone(),
            user: bundle.user_message.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_output_tokens,
            timeout_ms: cfg.timeout_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Completion { text: text.into(), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProviderError {
    #[error("request timed out")]
    Timeout,
    #[error("rate limited")]
    RateLimited { retry_after_ms: Option<u64> },
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
}

impl ProviderError {
    /// Worth another attempt: timeouts, 429, 5xx and connection failures.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Status { status, .. } => *status >= 500,
            _ => true,
        }
    }
}

pub trait Provider {
    fn complete(&mut self, req: &ChatRequest) -> Result<Completion, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for &mut P {
    fn complete(&mut self, req: &ChatRequest) -> Result<Completion, ProviderError> {
        (**self).complete(req)
    }
}

/// Time source and sleeper, injected so the core never touches the OS.
pub trait Clock {
    fn now_ms(&self) -> u64;
    fn sleep_ms(&self, ms: u64);
}

/// Frozen clock that never sleeps; retries run back to back.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> u64 {
        0
    }
    fn sleep_ms(&self, _ms: u64) {}
}

/// One provider call.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TranscriptEntry {
    pub chunk: usize,
    pub round: usize,
    pub attempt: u32,
    pub request: ChatRequest,
    pub response: Option<String>,
    pub error: Option<String>,
    pub latency_ms: u64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

pub trait TranscriptSink {
    fn record(&mut self, entry: &TranscriptEntry);
}

impl TranscriptSink for Vec<TranscriptEntry> {
    fn record(&mut self, entry: &TranscriptEntry) {
        self.push(entry.clone());
    }
}

/// Position of a call within a generation run, for the transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CallSite {
    pub chunk: usize,
    pub round: usize,
}

/// Sends `bundle`, retrying retryable failures up to the budget with
/// exponential backoff (or the server's retry-after hint, if longer).
pub fn generate<P: Provider, C: Clock, S: TranscriptSink>(
    bundle: &PromptBundle,
    cfg: &ProviderConfig,
    provider: &mut P,
    clock: &C,
    sink: &mut S,
    site: CallSite,
) -> Result<String, ProviderError> {
    let req = ChatRequest::new(bundle, cfg);
    let mut attempt = 0;
    loop {
        let started = clock.now_ms();
        let outcome = provider.complete(&req);
        let latency_ms = clock.now_ms().saturating_sub(started);
        let mut entry = TranscriptEntry {
            chunk: site.chunk,
            round: site.round,
            attempt,
            request: req.clone(),
            response: None,
            error: None,
            latency_ms,
            prompt_tokens: None,
            completion_tokens: None,
        };
        match outcome {
            Ok(c) => {
                entry.response = Some(c.text.clone());
                entry.prompt_tokens = c.prompt_tokens;
                entry.completion_tokens = c.completion_tokens;
                sink.record(&entry);
                return Ok(c.text);
            }
            Err(e) => {
                entry.error = Some(e.to_string());
                sink.record(&entry);
                if attempt >= cfg.retry_budget || !e.is_retryable() {
                    return Err(e);
                }
                let hint = match e {
                    ProviderError::RateLimited { retry_after_ms } => retry_after_ms.unwrap_or(0),
                    _ => 0,
                };
                clock.sleep_ms(cfg.backoff(attempt).max(hint));
                attempt += 1;
            }
        }
    }
}

/// Offline provider for tests and dry runs.
#[derive(Debug, Clone, PartialEq)]
pub enum MockProvider {
    /// Replies in order; once exhausted every call fails with a transport
    /// error.
    Scripted(VecDeque<Result<String, ProviderError>>),
    /// Returns the sequences found in the user message, re-rendered, after a
    /// one-line explanation. Deterministic in the request.
    Echo,
}

impl MockProvider {
    pub fn scripted<I: IntoIterator<Item = Result<String, ProviderError>>>(replies: I) -> Self {
        MockProvider::Scripted(replies.into_iter().collect())
    }

    pub fn remaining(&self) -> usize {
        match self {
            MockProvider::Scripted(q) => q.len(),
            MockProvider::Echo => usize::MAX,
        }
    }
}

impl Provider for MockProvider {
    fn complete(&mut self, req: &ChatRequest) -> Result<Completion, ProviderError> {
        match self {
            MockProvider::Scripted(q) => match q.pop_front() {
                Some(r) => r.map(Completion::text),
                None => Err(ProviderError::Transport("mock script exhausted".into())),
            },
            MockProvider::Echo => {
                let parsed = super::parse_response(&req.user).unwrap_or(ParsedResponse::default());
                let seqs: Vec<_> = parsed
                    .candidates
                    .iter()
                    .enumerate()
                    .filter_map(|(i, c)| crate::model::text::group(&alloc::format!("e{i}"), c).ok())
                    .collect();
                let text = alloc::format!(
                    "Echoing {} sequence(s) unchanged.\n{}",
                    seqs.len(),
                    render_dataset_text(&seqs)
                );
                Ok(Completion::text(text))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::cell::RefCell;

    #[derive(Default)]
    struct FakeClock {
        now: RefCell<u64>,
        slept: RefCell<Vec<u64>>,
    }

    impl Clock for FakeClock {
        fn now_ms(&self) -> u64 {
            *self.now.borrow()
        }
        fn sleep_ms(&self, ms: u64) {
            *self.now.borrow_mut() += ms;
            self.slept.borrow_mut().push(ms);
        }
    }

    fn bundle() -> PromptBundle {
        PromptBundle { system_message: "sys".into(), user_message: "user".into(), sequence_count: 0 }
    }

    #[test]
    fn retries_back_off_exponentially() {
        let cfg = ProviderConfig { retry_budget: 3, backoff_ms: 100, ..Default::default() };
        let mut mock = MockProvider::scripted([
            Err(ProviderError::Timeout),
            Err(ProviderError::RateLimited { retry_after_ms: Some(1000) }),
            Err(ProviderError::Status { status: 503, body: "busy".into() }),
            Ok("done".into()),
        ]);
        let clock = FakeClock::default();
        let mut log = Vec::new();
        let out = generate(&bundle(), &cfg, &mut mock, &clock, &mut log, CallSite::default()).unwrap();
        assert_eq!(out, "done");
        assert_eq!(*clock.slept.borrow(), vec![100, 1000, 400]);
        assert_eq!(log.iter().map(|e| e.attempt).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert!(log[..3].iter().all(|e| e.error.is_some()));
    }

    #[test]
    fn zero_budget_fails_on_first_429() {
        let cfg = ProviderConfig { retry_budget: 0, ..Default::default() };
        let mut mock = MockProvider::scripted([Err(ProviderError::RateLimited { retry_after_ms: None }), Ok("x".into())]);
        let mut log = Vec::new();
        let e = generate(&bundle(), &cfg, &mut mock, &NoClock, &mut log, CallSite::default()).unwrap_err();
        assert_eq!(e, ProviderError::RateLimited { retry_after_ms: None });
        assert_eq!(log.len(), 1);
        assert_eq!(mock.remaining(), 1);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let cfg = ProviderConfig { retry_budget: 5, ..Default::default() };
        let mut mock = MockProvider::scripted([Err(ProviderError::Status { status: 401, body: "no".into() })]);
        let e = generate(&bundle(), &cfg, &mut mock, &NoClock, &mut Vec::new(), CallSite::default()).unwrap_err();
        assert!(matches!(e, ProviderError::Status { status: 401, .. }));
    }

    #[test]
    fn exhausted_transport_failures_record_every_attempt() {
        let cfg = ProviderConfig { retry_budget: 2, ..Default::default() };
        let mut mock = MockProvider::scripted([]);
        let mut log = Vec::new();
        let e = generate(&bundle(), &cfg, &mut mock, &NoClock, &mut log, CallSite { chunk: 1, round: 2 }).unwrap_err();
        assert!(matches!(e, ProviderError::Transport(_)));
        assert_eq!(log.len(), 3);
        assert!(log.iter().all(|e| e.chunk == 1 && e.round == 2));
    }

    #[test]
    fn echo_is_deterministic() {
        let req = ChatRequest::new(
            &PromptBundle {
                system_message: String::new(),
                user_message: "Sequences: [[Monday, (0-3), Light, on]].".into(),
                sequence_count: 1,
            },
            &ProviderConfig::default(),
        );
        let a = MockProvider::Echo.complete(&req).unwrap();
        assert_eq!(a, MockProvider::Echo.complete(&req).unwrap());
        assert!(a.text.ends_with("[[Monday, (0-3), Light, on]]"));
    }

    #[test]
    fn config_validation() {
        assert!(ProviderConfig::default().validate().is_ok());
        assert!(ProviderConfig { timeout_ms: 0, ..Default::default() }.validate().is_err());
        assert_eq!(ProviderConfig { backoff_ms: 250, ..Default::default() }.backoff(2), 1000);
    }
}
