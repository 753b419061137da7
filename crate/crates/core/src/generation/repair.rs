use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::parse::{parse_response, Collector, ParseError, RejectedCandidate, ValidationReport};
use super::prompt::{build_prompts, PromptBundle};
use super::provider::{generate, CallSite, Clock, Provider, ProviderConfig, TranscriptSink};
use super::{GenerationError, SceneSpec, DEFAULT_TOKEN_BUDGET};
use crate::model::{BehaviorDataset, BehaviorSequence, DeviceDictionary};

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GenerationOptions {
    /// Re-prompts allowed per chunk after the first call.
    pub max_rounds: usize,
    pub token_budget: usize,
    pub id_prefix: String,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions { max_rounds: 2, token_budget: DEFAULT_TOKEN_BUDGET, id_prefix: "g".into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    /// Every sequence here passed the dictionary validator.
    pub sequences: Vec<BehaviorSequence>,
    /// Model prose, one paragraph per response that carried any.
    pub explanation: String,
    pub report: ValidationReport,
}

fn repair_note(rejected: &[RejectedCandidate], unparsed: Option<&ParseError>) -> String {
    let mut s = String::new();
    if let Some(e) = unparsed {
        let _ = write!(
            s,
            "Your previous reply could not be read ({e}). Reply with the new sequences in the [[...], [...], ...] format."
        );
        return s;
    }
    s.push_str("The following sequences from your previous reply were invalid. Regenerate only those, fixing the listed problems, in the same [[...], [...], ...] format.\n");
    for r in rejected {
        let _ = write!(s, "- {}:", r.rendering);
        for v in &r.violations {
            let _ = write!(s, " {} ({});", v.code, v);
        }
        s.push('\n');
    }
    s
}

fn push_paragraph(out: &mut String, text: &str) {
    if text.is_empty() {
        return;
    }
    if !out.is_empty() {
        out.push_str("\n\n");
    }
    out.push_str(text);
}

struct Round<'a, P, C, S> {
    cfg: &'a ProviderConfig,
    provider: &'a mut P,
    clock: &'a C,
    sink: &'a mut S,
}

fn run_chunk<P: Provider, C: Clock, S: TranscriptSink>(
    bundle: &PromptBundle,
    io: &mut Round<'_, P, C, S>,
    dict: &DeviceDictionary,
    max_rounds: usize,
    chunk: usize,
    into: &mut Collector,
    explanation: &mut String,
) -> Result<(), GenerationError> {
    let mut prompt = bundle.clone();
    for round in 0..=max_rounds {
        let site = CallSite { chunk, round };
        let raw = generate(&prompt, io.cfg, io.provider, io.clock, io.sink, site)
            .map_err(|source| GenerationError::Provider { chunk, round, source })?;
        let (rejected, unparsed) = match parse_response(&raw) {
            Ok(p) => {
                push_paragraph(explanation, &p.explanation);
                (into.offer(&p.candidates, dict, chunk, round), None)
            }
            Err(e) => (Vec::new(), Some(e)),
        };
        if rejected.is_empty() && unparsed.is_none() {
            return Ok(());
        }
        if round == max_rounds {
            into.report.outstanding.extend(rejected);
            into.report.unparsed.extend(unparsed.map(|e| (chunk, e)));
            return Ok(());
        }
        into.report.repair_rounds += 1;
        prompt = bundle.with_note(&repair_note(&rejected, unparsed.as_ref()));
    }
    Ok(())
}

/// Generate, validate and re-prompt with the violation list until the reply
/// is clean or `max_rounds` re-prompts are spent. Accepted sequences from all
/// rounds are merged, deduplicated by rendering.
#[allow(clippy::too_many_arguments)]
pub fn repair_loop<P: Provider, C: Clock, S: TranscriptSink>(
    bundle: &PromptBundle,
    cfg: &ProviderConfig,
    provider: &mut P,
    clock: &C,
    sink: &mut S,
    dict: &DeviceDictionary,
    expected_count: usize,
    max_rounds: usize,
) -> Result<GenerationResult, GenerationError> {
    cfg.validate()?;
    let mut collector = Collector::default();
    let mut explanation = String::new();
    let mut io = Round { cfg, provider, clock, sink };
    run_chunk(bundle, &mut io, dict, max_rounds, 0, &mut collector, &mut explanation)?;
    let (sequences, report) = collector.finish(&GenerationOptions::default().id_prefix, expected_count);
    Ok(GenerationResult { sequences, explanation, report })
}

/// Whole pipeline step: chunk the kept set to the token budget, run the
/// repair loop per chunk and merge. The count check compares the merged
/// output to the size of `kept`.
#[allow(clippy::too_many_arguments)]
pub fn generate_dataset<P: Provider, C: Clock, S: TranscriptSink>(
    kept: &BehaviorDataset,
    dict: &DeviceDictionary,
    scene: &SceneSpec,
    opts: &GenerationOptions,
    cfg: &ProviderConfig,
    provider: &mut P,
    clock: &C,
    sink: &mut S,
) -> Result<GenerationResult, GenerationError> {
    cfg.validate()?;
    let bundles = build_prompts(kept, dict, scene, opts.token_budget)?;
    let mut collector = Collector::default();
    let mut explanation = String::new();
    let mut io = Round { cfg, provider, clock, sink };
    for (chunk, bundle) in bundles.iter().enumerate() {
        run_chunk(bundle, &mut io, dict, opts.max_rounds, chunk, &mut collector, &mut explanation)?;
    }
    let (sequences, report) = collector.finish(&opts.id_prefix, kept.len());
    Ok(GenerationResult { sequences, explanation, report })
}
