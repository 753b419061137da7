//! Behaviors, sequences and datasets.
//!
//! A behavior is a `(timestamp, device, control)` triple where the timestamp is
//! a weekday plus a time-slot label such as `(18-21)`. Sequences are ordered by
//! timestamp; the canonical sequence holds [`CANONICAL_LEN`] behaviors, which
//! renders to forty elements.

mod dictionary;
pub(crate) mod text;
mod vocab;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use dictionary::{DeviceDictionary, DictionaryError, ShapePolicy, Violation, ViolationCode};
pub use text::{parse_dataset_text, parse_text, render_dataset_text, render_text, TextError};
pub use vocab::{CodecError, TokenCategory, Vocabulary, BOS, EOS, PAD, RESERVED};

/// Behaviors per canonical sequence.
pub const CANONICAL_LEN: usize = 10;
/// Rendered elements per behavior: day, slot, device, control.
pub const ELEMENTS_PER_BEHAVIOR: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Weekday {
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl Weekday {
    pub const ALL: [Weekday; 7] = [
        Weekday::Monday,
        Weekday::Tuesday,
        Weekday::Wednesday,
        Weekday::Thursday,
        Weekday::Friday,
        Weekday::Saturday,
        Weekday::Sunday,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Weekday::Monday => "Monday",
            Weekday::Tuesday => "Tuesday",
            Weekday::Wednesday => "Wednesday",
            Weekday::Thursday => "Thursday",
            Weekday::Friday => "Friday",
            Weekday::Saturday => "Saturday",
            Weekday::Sunday => "Sunday",
        }
    }

    /// Monday = 0 .. Sunday = 6.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Weekday {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown weekday {0:?}")]
pub struct UnknownWeekday(pub String);

impl FromStr for Weekday {
    type Err = UnknownWeekday;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Weekday::ALL
            .iter()
            .copied()
            .find(|d| d.name() == s)
            .ok_or_else(|| UnknownWeekday(s.into()))
    }
}

/// A weekday and a time-slot label. Ordering between timestamps needs the
/// dictionary's slot order, see [`DeviceDictionary::timestamp_key`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Timestamp {
    pub day: Weekday,
    pub slot: String,
}

impl Timestamp {
    pub fn new(day: Weekday, slot: impl Into<String>) -> Self {
        Timestamp { day, slot: slot.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Behavior {
    pub when: Timestamp,
    pub device: String,
    pub control: String,
}

impl Behavior {
    pub fn new(day: Weekday, slot: &str, device: &str, control: &str) -> Self {
        Behavior {
            when: Timestamp::new(day, slot),
            device: device.into(),
            control: control.into(),
        }
    }

    /// The four rendered elements in `(day, slot, device, control)` order.
    pub fn elements(&self) -> [&str; ELEMENTS_PER_BEHAVIOR] {
        [self.when.day.name(), &self.when.slot, &self.device, &self.control]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BehaviorSequence {
    pub id: String,
    pub behaviors: Vec<Behavior>,
}

impl BehaviorSequence {
    pub fn new(id: impl Into<String>, behaviors: Vec<Behavior>) -> Self {
        BehaviorSequence { id: id.into(), behaviors }
    }

    pub fn len(&self) -> usize {
        self.behaviors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.behaviors.is_empty()
    }

    /// Flattened `(day, slot, device, control)` elements.
    pub fn elements(&self) -> impl Iterator<Item = &str> + '_ {
        self.behaviors.iter().flat_map(|b| b.elements())
    }

    /// Same behaviors, ignoring the id.
    pub fn same_content(&self, other: &BehaviorSequence) -> bool {
        self.behaviors == other.behaviors
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BehaviorDataset {
    pub sequences: Vec<BehaviorSequence>,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("duplicate sequence id {0:?}")]
pub struct DuplicateId(pub String);

impl BehaviorDataset {
    /// Builds a dataset, rejecting duplicate ids.
    pub fn new(
        sequences: Vec<BehaviorSequence>,
        provenance: impl Into<String>,
    ) -> Result<Self, DuplicateId> {
        let mut seen = alloc::collections::BTreeSet::new();
        for s in &sequences {
            if !seen.insert(s.id.as_str()) {
                return Err(DuplicateId(s.id.clone()));
            }
        }
        Ok(BehaviorDataset { sequences, provenance: provenance.into() })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.sequences.iter().map(|s| s.id.as_str())
    }

    /// Sub-dataset made of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> BehaviorDataset {
        BehaviorDataset {
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }
}
