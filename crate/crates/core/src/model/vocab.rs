use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::ops::Range;

use super::dictionary::{DeviceDictionary, DictionaryError, ShapePolicy, Violation};
use super::{Behavior, BehaviorSequence, Weekday, ELEMENTS_PER_BEHAVIOR};
use crate::seed::fnv1a64;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const RESERVED: usize = 3;
const RESERVED_TOKENS: [&str; RESERVED] = ["<pad>", "<bos>", "<eos>"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenCategory {
    Day,
    Slot,
    Device,
    Control,
}

impl TokenCategory {
    const ORDER: [TokenCategory; ELEMENTS_PER_BEHAVIOR] =
        [TokenCategory::Day, TokenCategory::Slot, TokenCategory::Device, TokenCategory::Control];

    fn at_position(position: usize) -> Self {
        Self::ORDER[position % ELEMENTS_PER_BEHAVIOR]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("unknown {expected:?} token {token:?} at position {position}")]
    UnknownToken { position: usize, token: String, expected: TokenCategory },
    #[error("{0} ids is not a multiple of 4")]
    Shape(usize),
    #[error("decoded sequence is invalid: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Validation(Vec<Violation>),
}

/// Token ids derived from a [`DeviceDictionary`]: reserved tokens, then days,
/// slots, devices and distinct controls, each in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    dict: DeviceDictionary,
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
    ranges: [Range<u32>; ELEMENTS_PER_BEHAVIOR],
    fingerprint: u64,
}

impl Vocabulary {
    pub fn build(dict: &DeviceDictionary) -> Result<Self, DictionaryError> {
        dict.check_cross_category()?;
        let mut tokens: Vec<String> = RESERVED_TOKENS.iter().map(|t| t.to_string()).collect();
        let mut ranges: [Range<u32>; ELEMENTS_PER_BEHAVIOR] = Default::default();
        let push_all = |tokens: &mut Vec<String>, items: &mut dyn Iterator<Item = &str>| {
            let start = tokens.len() as u32;
            tokens.extend(items.map(str::to_string));
            start..tokens.len() as u32
        };
        ranges[0] = push_all(&mut tokens, &mut dict.days().iter().map(|d| d.name()));
        ranges[1] = push_all(&mut tokens, &mut dict.slots().iter().map(String::as_str));
        ranges[2] = push_all(&mut tokens, &mut dict.devices().iter().map(String::as_str));
        ranges[3] = push_all(&mut tokens, &mut dict.control_tokens());

        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(DictionaryError::Conflict { token: t.clone(), first: "token", second: "token" });
            }
        }
        let mut v = Vocabulary { dict: dict.clone(), tokens, index, ranges, fingerprint: 0 };
        v.fingerprint = fnv1a64(v.dump().as_bytes());
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dictionary(&self) -> &DeviceDictionary {
        &self.dict
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Id range of one token category.
    pub fn range(&self, category: TokenCategory) -> Range<u32> {
        let i = TokenCategory::ORDER.iter().position(|c| *c == category).unwrap();
        self.ranges[i].clone()
    }

    /// Stable textual dump, one `id<TAB>token` line per entry.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{t}");
        }
        out
    }

    /// FNV-1a hash of [`Vocabulary::dump`]; models record it to refuse
    /// scoring under a different vocabulary.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    fn lookup(&self, position: usize, token: &str) -> Result<u32, CodecError> {
        let expected = TokenCategory::at_position(position);
        match self.id(token) {
            Some(id) if self.range(expected).contains(&id) => Ok(id),
            _ => Err(CodecError::UnknownToken { position, token: token.into(), expected }),
        }
    }

    /// Encodes to `4 * len` ids. Invalid sequences are rejected with the same
    /// violations the dictionary validator reports.
    pub fn encode(&self, seq: &BehaviorSequence) -> Result<Vec<u32>, CodecError> {
        let ids = seq
            .elements()
            .enumerate()
            .map(|(p, t)| self.lookup(p, t))
            .collect::<Result<Vec<_>, _>>()?;
        let violations = self.dict.check_sequence(seq, ShapePolicy::AnyLength);
        if !violations.is_empty() {
            return Err(CodecError::Validation(violations));
        }
        Ok(ids)
    }

    pub fn decode(&self, id: &str, ids: &[u32]) -> Result<BehaviorSequence, CodecError> {
        if ids.len() % ELEMENTS_PER_BEHAVIOR != 0 {
            return Err(CodecError::Shape(ids.len()));
        }
        let mut behaviors = Vec::with_capacity(ids.len() / ELEMENTS_PER_BEHAVIOR);
        for (b, quad) in ids.chunks(ELEMENTS_PER_BEHAVIOR).enumerate() {
            let mut words: [&str; ELEMENTS_PER_BEHAVIOR] = [""; ELEMENTS_PER_BEHAVIOR];
            for (k, &tid) in quad.iter().enumerate() {
                let position = b * ELEMENTS_PER_BEHAVIOR + k;
                let expected = TokenCategory::at_position(position);
                if !self.range(expected).contains(&tid) {
                    return Err(CodecError::UnknownToken {
                        position,
                        token: alloc::format!("#{tid}"),
                        expected,
                    });
                }
                words[k] = &self.tokens[tid as usize];
            }
            let day: Weekday = words[0].parse().expect("day range holds weekday names");
            behaviors.push(Behavior::new(day, words[1], words[2], words[3]));
        }
        let seq = BehaviorSequence::new(id, behaviors);
        let violations = self.dict.check_sequence(&seq, ShapePolicy::AnyLength);
        if !violations.is_empty() {
            return Err(CodecError::Validation(violations));
        }
        Ok(seq)
    }
}
