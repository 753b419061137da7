//! std implementations of the core's runner, clock, provider and transcript
//! traits.

use std::io::Read;
use std::time::{Duration, Instant};

use iotgen_core::generation::{ChatRequest, Clock, Completion, Provider, ProviderConfig, ProviderError, TranscriptEntry, TranscriptSink};
use iotgen_core::JobRunner;
use rayon::prelude::*;
use serde_json::json;

use crate::formats::{FormatError, JsonlWriter};

/// Runs jobs on the rayon pool. Results come back in job order, so outcomes
/// match [`iotgen_core::Sequential`] exactly.
#[derive(Debug, Default, Clone, Copy)]
pub struct Rayon;

impl JobRunner for Rayon {
    fn run<T, F>(&self, jobs: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..jobs).into_par_iter().map(job).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SystemClock {
    start: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { start: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }

    fn sleep_ms(&self, ms: u64) {
        std::thread::sleep(Duration::from_millis(ms));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("credential variable {0} is not set")]
pub struct MissingCredential(pub String);

/// OpenAI-style chat-completions client.
pub struct HttpProvider {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(cfg: &ProviderConfig, api_key: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider { endpoint: cfg.endpoint.clone(), api_key: api_key.into(), agent }
    }

    /// Reads the key from the variable named in the config. Fails before any
    /// network activity when it is unset or empty.
    pub fn from_env(cfg: &ProviderConfig) -> Result<Self, MissingCredential> {
        match std::env::var(&cfg.credential_env) {
            Ok(k) if !k.trim().is_empty() => Ok(Self::new(cfg, k)),
            _ => Err(MissingCredential(cfg.credential_env.clone())),
        }
    }
}

fn request_body(req: &ChatRequest) -> serde_json::Value {
    json!({
        "model": req.model,
        "messages": [
            {"role": "system", "content": req.system},
            {"role": "user", "content": req.user},
        ],
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    })
}

/// `Retry-After` in seconds (the only form chat APIs send in practice).
fn retry_after_ms(value: Option<&str>) -> Option<u64> {
    let secs: f64 = value?.trim().parse().ok()?;
    (secs.is_finite() && secs >= 0.0).then(|| (secs * 1000.0).round() as u64)
}

fn parse_completion(body: &str) -> Result<Completion, ProviderError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| ProviderError::Transport(format!("response is not JSON: {e}")))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .ok_or_else(|| ProviderError::Transport("response has no choices[0].message.content".into()))?;
    Ok(Completion {
        text: text.to_string(),
        prompt_tokens: v.pointer("/usage/prompt_tokens").and_then(|t| t.as_u64()),
        completion_tokens: v.pointer("/usage/completion_tokens").and_then(|t| t.as_u64()),
    })
}

fn map_transport(e: ureq::Error) -> ProviderError {
    match e {
        ureq::Error::Timeout(_) => ProviderError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => ProviderError::Timeout,
        other => ProviderError::Transport(other.to_string()),
    }
}

impl Provider for HttpProvider {
    fn complete(&mut self, req: &ChatRequest) -> Result<Completion, ProviderError> {
        let body = request_body(req).to_string();
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send(body.as_bytes())
            .map_err(map_transport)?;
        let status = resp.status().as_u16();
        let hint = retry_after_ms(resp.headers().get("retry-after").and_then(|h| h.to_str().ok()));
        let mut text = String::new();
        resp.body_mut().as_reader().read_to_string(&mut text).map_err(|e| map_transport(ureq::Error::Io(e)))?;
        match status {
            200..=299 => parse_completion(&text),
            429 => Err(ProviderError::RateLimited { retry_after_ms: hint }),
            _ => Err(ProviderError::Status { status, body: text }),
        }
    }
}

/// Appends each provider call to a JSON Lines file. Write failures are
/// remembered and surfaced by [`JsonlTranscript::finish`] rather than
/// aborting the call in flight.
pub struct JsonlTranscript {
    writer: JsonlWriter,
    failure: Option<FormatError>,
}

impl JsonlTranscript {
    pub fn create(path: &std::path::Path) -> Result<Self, FormatError> {
        Ok(JsonlTranscript { writer: JsonlWriter::create(path)?, failure: None })
    }

    pub fn finish(self) -> Result<(), FormatError> {
        self.failure.map_or(Ok(()), Err)
    }
}

impl TranscriptSink for JsonlTranscript {
    fn record(&mut self, entry: &TranscriptEntry) {
        if self.failure.is_some() {
            return;
        }
        if let Err(e) = self.writer.append(entry) {
            log::error!("transcript write failed: {e}");
            self.failure = Some(e);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completion_body_is_read_with_usage() {
        let c = parse_completion(
            r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}}"#,
        )
        .unwrap();
        assert_eq!(c, Completion { text: "hi".into(), prompt_tokens: Some(3), completion_tokens: Some(1) });
        assert!(matches!(parse_completion("{}"), Err(ProviderError::Transport(_))));
    }

    #[test]
    fn retry_after_seconds() {
        assert_eq!(retry_after_ms(Some("2")), Some(2000));
        assert_eq!(retry_after_ms(Some(" 0.5 ")), Some(500));
        assert_eq!(retry_after_ms(Some("Wed, 21 Oct 2015 07:28:00 GMT")), None);
        assert_eq!(retry_after_ms(None), None);
    }

    #[test]
    fn rayon_matches_sequential() {
        let f = |i: usize| i * i;
        assert_eq!(Rayon.run(100, f), iotgen_core::Sequential.run(100, f));
    }
}
