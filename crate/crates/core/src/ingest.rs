//! Synthetic ground-truth datasets and prompt token budgeting.
//!
//! [`simulate_fixture`] plants `pattern_count` base sequences, copies each one
//! several times and perturbs copies with behavior-level noise. Which pattern a
//! sequence came from is returned alongside, so experiments can check what a
//! compression method kept.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::model::{render_text, Behavior, BehaviorDataset, BehaviorSequence, DeviceDictionary, CANONICAL_LEN};
use crate::seed;

/// How many copies each pattern receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum Copies {
    Exact(usize),
    /// Uniform over the inclusive range, drawn per pattern.
    Range(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FixtureSpec {
    pub pattern_count: usize,
    pub copies_per_pattern: Copies,
    /// Per-behavior probability of replacing its `(device, control)` pair.
    pub noise_rate: f64,
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(default = "canonical_len"))]
    pub sequence_len: usize,
}

#[cfg(feature = "serde")]
fn canonical_len() -> usize {
    CANONICAL_LEN
}

impl FixtureSpec {
    pub fn new(pattern_count: usize, copies: usize, noise_rate: f64, seed: u64) -> Self {
        FixtureSpec {
            pattern_count,
            copies_per_pattern: Copies::Exact(copies),
            noise_rate,
            seed,
            sequence_len: CANONICAL_LEN,
        }
    }

    /// 5 patterns x 40 copies, 5% noise.
    pub fn default_eval(seed: u64) -> Self {
        FixtureSpec::new(5, 40, 0.05, seed)
    }

    fn validate(&self) -> Result<(), FixtureError> {
        let bad = |m: &str| Err(FixtureError::InvalidSpec(m.to_string()));
        if self.pattern_count == 0 {
            return bad("pattern_count must be positive");
        }
        match self.copies_per_pattern {
            Copies::Exact(0) => return bad("copies_per_pattern must be positive"),
            Copies::Range(lo, hi) if lo == 0 || lo > hi => return bad("copies range must be 1 <= lo <= hi"),
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return bad("noise_rate must lie in [0, 1]");
        }
        if self.sequence_len == 0 {
            return bad("sequence_len must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FixtureError {
    #[error("invalid fixture spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub dataset: BehaviorDataset,
    /// Pattern index of each sequence, parallel to `dataset.sequences`.
    pub pattern_of: Vec<usize>,
    /// The noise-free base sequence of each pattern.
    pub bases: Vec<BehaviorSequence>,
}

impl Fixture {
    /// Sequence id to pattern id, the sidecar metadata written next to the
    /// dataset.
    pub fn pattern_map(&self) -> BTreeMap<String, usize> {
        self.dataset.ids().map(String::from).zip(self.pattern_of.iter().copied()).collect()
    }
}

const MAX_BASE_ATTEMPTS: usize = 1000;

pub fn simulate_fixture(spec: &FixtureSpec, dict: &DeviceDictionary) -> Result<Fixture, FixtureError> {
    spec.validate()?;
    if dict.devices().len() < 2 {
        return Err(FixtureError::InvalidSpec("dictionary needs at least two devices".into()));
    }
    let pairs: Vec<(&str, &str)> = dict.pairs().collect();
    let mut rng = seed::rng(spec.seed);

    let mut bases: Vec<BehaviorSequence> = Vec::with_capacity(spec.pattern_count);
    let mut seen = BTreeSet::new();
    for p in 0..spec.pattern_count {
        let mut attempts = 0;
        loop {
            let base = random_base(&mut rng, dict, &pairs, spec.sequence_len, format!("pattern-{p}"));
            if seen.insert(render_text(&base)) {
                bases.push(base);
                break;
            }
            attempts += 1;
            if attempts == MAX_BASE_ATTEMPTS {
                return Err(FixtureError::InvalidSpec(format!(
                    "could not draw {} distinct patterns from this dictionary",
                    spec.pattern_count
                )));
            }
        }
    }

    let mut sequences = Vec::new();
    let mut pattern_of = Vec::new();
    for (p, base) in bases.iter().enumerate() {
        let copies = match spec.copies_per_pattern {
            Copies::Exact(n) => n,
            Copies::Range(lo, hi) => rng.random_range(lo..=hi),
        };
        for _ in 0..copies {
            let mut behaviors = base.behaviors.clone();
            for b in &mut behaviors {
                if spec.noise_rate > 0.0 && rng.random_bool(spec.noise_rate) {
                    perturb(&mut rng, b, &pairs);
                }
            }
            sequences.push(BehaviorSequence::new(format!("s{:05}", sequences.len()), behaviors));
            pattern_of.push(p);
        }
    }

    let provenance = format!(
        "fixture patterns={} copies={:?} noise={} seed={}",
        spec.pattern_count, spec.copies_per_pattern, spec.noise_rate, spec.seed
    );
    let dataset = BehaviorDataset::new(sequences, provenance).expect("generated ids are unique");
    Ok(Fixture { dataset, pattern_of, bases })
}

/// One day, nondecreasing slots, independent `(device, control)` pairs.
fn random_base<R: Rng>(
    rng: &mut R,
    dict: &DeviceDictionary,
    pairs: &[(&str, &str)],
    len: usize,
    id: String,
) -> BehaviorSequence {
    let day = dict.days()[rng.random_range(0..dict.days().len())];
    let mut slots: Vec<usize> = (0..len).map(|_| rng.random_range(0..dict.slots().len())).collect();
    slots.sort_unstable();
    let behaviors = slots
        .into_iter()
        .map(|s| {
            let (d, c) = pairs[rng.random_range(0..pairs.len())];
            Behavior::new(day, &dict.slots()[s], d, c)
        })
        .collect();
    BehaviorSequence::new(id, behaviors)
}

/// Replaces the pair with a different valid pair, chosen uniformly.
fn perturb<R: Rng>(rng: &mut R, b: &mut Behavior, pairs: &[(&str, &str)]) {
    let current = pairs.iter().position(|&(d, c)| d == b.device && c == b.control);
    let (d, c) = match current {
        Some(cur) => {
            let mut k = rng.random_range(0..pairs.len() - 1);
            if k >= cur {
                k += 1;
            }
            pairs[k]
        }
        None => pairs[rng.random_range(0..pairs.len())],
    };
    b.device = d.into();
    b.control = c.into();
}

/// Prompt-size estimate for a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TokenEstimate {
    /// Σ ⌈rendered chars / 4⌉ over sequences.
    pub tokens: usize,
    pub chars: usize,
    /// Exact rendered element count.
    pub elements: usize,
}

impl core::ops::Add for TokenEstimate {
    type Output = TokenEstimate;
    fn add(self, o: TokenEstimate) -> TokenEstimate {
        TokenEstimate { tokens: self.tokens + o.tokens, chars: self.chars + o.chars, elements: self.elements + o.elements }
    }
}

pub const CHARS_PER_TOKEN: usize = 4;

pub fn estimate_sequence_tokens(seq: &BehaviorSequence) -> TokenEstimate {
    let chars = render_text(seq).chars().count();
    TokenEstimate { tokens: chars.div_ceil(CHARS_PER_TOKEN), chars, elements: seq.elements().count() }
}

pub fn estimate_tokens(ds: &BehaviorDataset) -> TokenEstimate {
    ds.sequences.iter().map(estimate_sequence_tokens).fold(TokenEstimate::default(), |a, b| a + b)
}

/// A ten-device home with eight 3-hour slots, used by the CLI defaults,
/// fixtures and tests.
pub fn standard_dictionary() -> DeviceDictionary {
    let slots = ["(0-3)", "(3-6)", "(6-9)", "(9-12)", "(12-15)", "(15-18)", "(18-21)", "(21-24)"];
    let devices: [(&str, &[&str]); 10] = [
        ("Light", &["on", "off"]),
        ("Airconditioner", &["switch on", "cooling", "switch off"]),
        ("Fan", &["switch on", "switch off"]),
        ("Heater", &["switch on", "heating", "switch off"]),
        ("TV", &["switch on", "setVolume", "switch off"]),
        ("Curtain", &["open", "close"]),
        ("WashingMachine", &["start", "stop"]),
        ("Speaker", &["play", "pause"]),
        ("Door", &["lock", "unlock"]),
        ("RobotVacuum", &["start", "dock"]),
    ];
    DeviceDictionary::new(
        crate::model::Weekday::ALL.to_vec(),
        slots.iter().map(|s| s.to_string()).collect(),
        devices.iter().map(|(d, _)| d.to_string()).collect(),
        devices.iter().map(|(d, cs)| (d.to_string(), cs.iter().map(|c| c.to_string()).collect())).collect(),
    )
    .expect("standard dictionary is valid")
}
