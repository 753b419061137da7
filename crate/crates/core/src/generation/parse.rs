use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::model::text::{group, split_elements};
use crate::model::{render_text, BehaviorSequence, DeviceDictionary, ShapePolicy, Violation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ParseError {
    #[error("no [[...]] block found")]
    NoSequenceBlock,
    /// Byte offset into the fence-stripped text.
    #[error("malformed list at byte {position}")]
    MalformedList { position: usize },
}

/// Candidate element lists plus the prose around them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedResponse {
    pub candidates: Vec<Vec<String>>,
    pub explanation: String,
}

fn strip_fences(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for line in raw.lines() {
        if line.trim_start().starts_with("```") {
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn block_start(text: &str) -> Option<usize> {
    text.match_indices('[')
        .map(|(i, _)| i)
        .find(|&i| text[i + 1..].trim_start().starts_with('['))
}

fn matching_close(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, c) in text[open..].char_indices() {
        match c {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Extracts the first list-of-lists from free-form model output. Code-fence
/// lines are dropped first; the remaining prose before and after the block
/// becomes the explanation. Candidates are not validated.
pub fn parse_response(raw: &str) -> Result<ParsedResponse, ParseError> {
    let text = strip_fences(raw);
    let open = block_start(&text).ok_or(ParseError::NoSequenceBlock)?;
    let close = matching_close(&text, open).ok_or(ParseError::MalformedList { position: open })?;

    let mut candidates = Vec::new();
    let mut at = open + 1;
    while at < close {
        let c = text[at..].chars().next().unwrap_or(' ');
        if c.is_whitespace() || c == ',' {
            at += c.len_utf8();
            continue;
        }
        if c != '[' {
            return Err(ParseError::MalformedList { position: at });
        }
        let end = at + 1 + text[at + 1..].find(']').ok_or(ParseError::MalformedList { position: at })?;
        let body = &text[at + 1..end];
        if let Some(nested) = body.find('[') {
            return Err(ParseError::MalformedList { position: at + 1 + nested });
        }
        candidates.push(split_elements(body));
        at = end + 1;
    }

    let before = text[..open].trim();
    let after = text[close + 1..].trim();
    let explanation = match (before.is_empty(), after.is_empty()) {
        (false, false) => alloc::format!("{before} {after}"),
        (false, true) => before.into(),
        (true, false) => after.into(),
        (true, true) => String::new(),
    };
    Ok(ParsedResponse { candidates, explanation })
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RejectedCandidate {
    pub chunk: usize,
    pub round: usize,
    /// Position within its response.
    pub index: usize,
    pub rendering: String,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountDeviation {
    pub expected: usize,
    pub actual: usize,
}

impl CountDeviation {
    /// `Some` when `actual` falls outside ±20% of `expected`.
    pub fn check(expected: usize, actual: usize) -> Option<Self> {
        let within = 5 * actual >= 4 * expected && 5 * actual <= 6 * expected;
        (!within).then_some(CountDeviation { expected, actual })
    }
}

/// Outcome bookkeeping. Invariant:
/// `candidates == accepted + duplicates + rejected_total`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationReport {
    pub candidates: usize,
    pub accepted: usize,
    /// Valid candidates dropped because an identical sequence was accepted.
    pub duplicates: usize,
    /// Invalid candidates over all rounds, repaired or not.
    pub rejected_total: usize,
    /// Invalid candidates from each chunk's final round, left unrepaired.
    pub outstanding: Vec<RejectedCandidate>,
    /// Responses from each chunk's final round that held no parsable block.
    pub unparsed: Vec<(usize, ParseError)>,
    /// Re-prompts issued, summed over chunks.
    pub repair_rounds: usize,
    pub count_deviation: Option<CountDeviation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.outstanding.is_empty() && self.unparsed.is_empty() && self.count_deviation.is_none()
    }

    /// Unrepaired violations or unreadable replies. Unlike [`is_clean`],
    /// a count deviation alone does not count: it is a warning.
    ///
    /// [`is_clean`]: ValidationReport::is_clean
    pub fn has_violations(&self) -> bool {
        !self.outstanding.is_empty() || !self.unparsed.is_empty()
    }

    pub fn totals_consistent(&self) -> bool {
        self.candidates == self.accepted + self.duplicates + self.rejected_total
    }
}

/// Accepts valid, not-yet-seen sequences; everything else lands in the report.
#[derive(Debug, Default)]
pub(crate) struct Collector {
    seen: BTreeSet<String>,
    pub(crate) sequences: Vec<BehaviorSequence>,
    pub(crate) report: ValidationReport,
}

impl Collector {
    /// Returns the rejections of this batch.
    pub(crate) fn offer(
        &mut self,
        cands: &[Vec<String>],
        dict: &DeviceDictionary,
        chunk: usize,
        round: usize,
    ) -> Vec<RejectedCandidate> {
        let mut rejected = Vec::new();
        for (index, elements) in cands.iter().enumerate() {
            self.report.candidates += 1;
            let violations = dict.check_elements(elements, ShapePolicy::Canonical);
            let seq = if violations.is_empty() { group("", elements).ok() } else { None };
            match seq {
                Some(seq) => {
                    if self.seen.insert(render_text(&seq)) {
                        self.report.accepted += 1;
                        self.sequences.push(seq);
                    } else {
                        self.report.duplicates += 1;
                    }
                }
                None => {
                    self.report.rejected_total += 1;
                    rejected.push(RejectedCandidate {
                        chunk,
                        round,
                        index,
                        rendering: alloc::format!("[{}]", elements.join(", ")),
                        violations,
                    });
                }
            }
        }
        rejected
    }

    /// Assigns `{prefix}{:05}` ids in acceptance order.
    pub(crate) fn finish(mut self, prefix: &str, expected: usize) -> (Vec<BehaviorSequence>, ValidationReport) {
        for (i, s) in self.sequences.iter_mut().enumerate() {
            s.id = alloc::format!("{prefix}{i:05}");
        }
        self.report.count_deviation = CountDeviation::check(expected, self.sequences.len());
        (self.sequences, self.report)
    }
}

/// Single-shot validation of parsed candidates. Only sequences passing the
/// dictionary validator (canonical shape) are returned; duplicates collapse.
pub fn validate_candidates(
    cands: &[Vec<String>],
    dict: &DeviceDictionary,
    expected_count: usize,
    id_prefix: &str,
) -> (Vec<BehaviorSequence>, ValidationReport) {
    let mut c = Collector::default();
    let rejected = c.offer(cands, dict, 0, 0);
    c.report.outstanding = rejected;
    c.finish(id_prefix, expected_count)
}
