//! Prompt assembly, provider calls and the parse/validate/repair cycle that
//! turns a compressed dataset plus a scene change into synthetic sequences.
//!
//! Everything here is transport-agnostic: providers, clocks and transcript
//! sinks are traits, so the same loop drives the scripted mock in tests and
//! the HTTP adapter in the CLI.

mod parse;
mod prompt;
mod provider;
mod repair;

use alloc::string::String;

pub use parse::{
    parse_response, validate_candidates, CountDeviation, ParseError, ParsedResponse, RejectedCandidate, ValidationReport,
};
pub use prompt::{
    build_prompt, build_prompts, estimate_text_tokens, render_device_controls, system_message, PromptBundle, REQUIREMENTS,
};
pub use provider::{
    generate, CallSite, ChatRequest, Clock, Completion, MockProvider, NoClock, Provider, ProviderConfig, ProviderError,
    TranscriptEntry, TranscriptSink,
};
pub use repair::{generate_dataset, repair_loop, GenerationOptions, GenerationResult};

/// Default prompt budget, in estimated tokens, before the kept set is chunked.
pub const DEFAULT_TOKEN_BUDGET: usize = 8000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerationError {
    #[error("scene descriptions must both be non-empty")]
    EmptyScene,
    #[error("no sequences to build a prompt from")]
    EmptyDataset,
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("chunk {chunk}, round {round}: {source}")]
    Provider { chunk: usize, round: usize, source: ProviderError },
}

/// The environment before and after the change being simulated.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SceneSpec {
    previous_env: String,
    new_env: String,
}

impl SceneSpec {
    pub fn new(previous_env: impl Into<String>, new_env: impl Into<String>) -> Result<Self, GenerationError> {
        let (previous_env, new_env) = (previous_env.into(), new_env.into());
        if previous_env.trim().is_empty() || new_env.trim().is_empty() {
            return Err(GenerationError::EmptyScene);
        }
        Ok(SceneSpec { previous_env, new_env })
    }

    pub fn previous_env(&self) -> &str {
        &self.previous_env
    }

    pub fn new_env(&self) -> &str {
        &self.new_env
    }
}
