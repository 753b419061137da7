use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{GenerationError, SceneSpec};
use crate::ingest::CHARS_PER_TOKEN;
use crate::model::{render_dataset_text, BehaviorDataset, BehaviorSequence, DeviceDictionary};

/// Requirement clauses of the system message. These are functional prompt
/// text and must stay byte-for-byte as written.
pub const REQUIREMENTS: [&str; 7] = [
    "Please strictly follow the correspondence between the devices and device states in the set to generate. Do not generate device states that do not match the device.",
    "You can add some devices that users have not used before to better adapt to changes in the environment.",
    "Please modify or delete all unreasonable behaviors in the new environment.",
    "Please consider as many new devices as possible in the new environment.",
    "Please make sure that the generated sequence still contains 10 consecutive behaviors and there are forty elements in total.",
    "Please ensure that the total number of generated behavior sequences is roughly equal to the total number of original behavior sequences.",
    "Please make modifications in the original sequence. The generated new behavior sequence set is also in the format of [[...], [...], ...].",
];

const ROLE: &str = "You are a smart-home and IoT specialist who understands how people use \
their connected devices over a week. You will be asked how a household's device usage \
would shift once its habits or surroundings change.";

const TASK: &str = "You will receive a description of the household's old and new \
environment, its recorded behavior sequences, and the devices together with the states \
each device accepts. Using only those devices and states, rewrite the recorded sequences \
into plausible sequences for the new environment.";

/// The two chat messages sent for one chunk of sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PromptBundle {
    pub system_message: String,
    pub user_message: String,
    /// Number of sequences embedded in the user message.
    pub sequence_count: usize,
}

impl PromptBundle {
    pub fn estimated_tokens(&self) -> usize {
        estimate_text_tokens(&self.system_message) + estimate_text_tokens(&self.user_message)
    }

    /// A copy with `note` appended to the user message.
    pub fn with_note(&self, note: &str) -> PromptBundle {
        let mut b = self.clone();
        b.user_message.push_str("\n\n");
        b.user_message.push_str(note);
        b
    }
}

pub fn estimate_text_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(CHARS_PER_TOKEN)
}

pub fn system_message() -> String {
    let mut s = String::new();
    s.push_str(ROLE);
    s.push_str("\n\n");
    s.push_str(TASK);
    s.push_str("\n\nRequirements:\n");
    for (i, r) in REQUIREMENTS.iter().enumerate() {
        let _ = writeln!(s, "{}. {}", i + 1, r);
    }
    s
}

/// `{Light: [on, off], Fan: [...]}` in dictionary order.
pub fn render_device_controls(dict: &DeviceDictionary) -> String {
    let mut s = String::from("{");
    for (i, d) in dict.devices().iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{d}: [{}]", dict.controls(d).unwrap_or(&[]).join(", "));
    }
    s.push('}');
    s
}

fn user_message<'a>(seqs: impl IntoIterator<Item = &'a BehaviorSequence>, dict: &DeviceDictionary, scene: &SceneSpec) -> String {
    let days: Vec<&str> = dict.days().iter().map(|d| d.name()).collect();
    let mut s = String::new();
    let _ = writeln!(s, "Previous environment: {}.", scene.previous_env());
    let _ = writeln!(s, "Changed environment: {}.", scene.new_env());
    let _ = writeln!(s, "Recorded behavior sequences: {}.", render_dataset_text(seqs));
    let _ = writeln!(s, "Devices and their possible states: {}.", render_device_controls(dict));
    let _ = write!(s, "Days: {}. Time slots: {}.", days.join(", "), dict.slots().join(", "));
    s
}

pub fn build_prompt(kept: &BehaviorDataset, dict: &DeviceDictionary, scene: &SceneSpec) -> Result<PromptBundle, GenerationError> {
    if kept.is_empty() {
        return Err(GenerationError::EmptyDataset);
    }
    Ok(PromptBundle {
        system_message: system_message(),
        user_message: user_message(&kept.sequences, dict, scene),
        sequence_count: kept.len(),
    })
}

/// Splits `kept` into consecutive chunks whose prompts stay within
/// `budget_tokens`. A chunk always holds at least one sequence, so a single
/// oversized sequence still produces a (over-budget) prompt.
pub fn build_prompts(
    kept: &BehaviorDataset,
    dict: &DeviceDictionary,
    scene: &SceneSpec,
    budget_tokens: usize,
) -> Result<Vec<PromptBundle>, GenerationError> {
    if kept.is_empty() {
        return Err(GenerationError::EmptyDataset);
    }
    let whole = build_prompt(kept, dict, scene)?;
    if whole.estimated_tokens() <= budget_tokens {
        return Ok(alloc::vec![whole]);
    }
    let system = system_message();
    let mut out = Vec::new();
    let mut start = 0;
    while start < kept.len() {
        let mut end = start + 1;
        while end < kept.len() {
            let trial = user_message(&kept.sequences[start..=end], dict, scene);
            if estimate_text_tokens(&system) + estimate_text_tokens(&trial) > budget_tokens {
                break;
            }
            end += 1;
        }
        out.push(PromptBundle {
            system_message: system.clone(),
            user_message: user_message(&kept.sequences[start..end], dict, scene),
            sequence_count: end - start,
        });
        start = end;
    }
    Ok(out)
}
