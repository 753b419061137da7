//! Bracketed text form: `[Monday, (18-21), Light, on, Monday, ...]`.
//!
//! Rendering puts a single space after each comma. Parsing ignores whitespace
//! around elements, collapses internal runs of whitespace and strips quotes
//! wrapping an element, since model output is rarely byte-stable.

use alloc::string::String;
use alloc::vec::Vec;

use super::{Behavior, BehaviorSequence, Weekday, ELEMENTS_PER_BEHAVIOR};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("expected a bracketed list")]
    NotBracketed,
    #[error("{0} elements is not a multiple of 4")]
    Shape(usize),
    #[error("unknown day {text:?} at element {position}")]
    UnknownDay { position: usize, text: String },
}

pub fn render_text(seq: &BehaviorSequence) -> String {
    let mut out = String::with_capacity(seq.len() * 40);
    out.push('[');
    for (i, e) in seq.elements().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(e);
    }
    out.push(']');
    out
}

/// `[[...], [...], ...]` with one rendered sequence per inner list.
pub fn render_dataset_text<'a>(seqs: impl IntoIterator<Item = &'a BehaviorSequence>) -> String {
    let mut out = String::from("[");
    for (i, s) in seqs.into_iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&render_text(s));
    }
    out.push(']');
    out
}

/// Trims, collapses whitespace runs and strips one layer of wrapping quotes.
pub(crate) fn normalize_element(raw: &str) -> String {
    let mut t = raw.trim();
    for q in ['"', '\'', '`'] {
        if t.len() >= 2 && t.starts_with(q) && t.ends_with(q) {
            t = t[1..t.len() - 1].trim();
            break;
        }
    }
    let mut out = String::with_capacity(t.len());
    for (i, word) in t.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Splits the inside of a flat list on commas. An empty (or all-whitespace)
/// body yields no elements.
pub(crate) fn split_elements(body: &str) -> Vec<String> {
    if body.trim().is_empty() {
        return Vec::new();
    }
    body.split(',').map(normalize_element).collect()
}

pub(crate) fn group(id: &str, elements: &[String]) -> Result<BehaviorSequence, TextError> {
    if elements.len() % ELEMENTS_PER_BEHAVIOR != 0 {
        return Err(TextError::Shape(elements.len()));
    }
    let behaviors = elements
        .chunks(ELEMENTS_PER_BEHAVIOR)
        .enumerate()
        .map(|(b, q)| {
            let day: Weekday = q[0].parse().map_err(|_| TextError::UnknownDay {
                position: b * ELEMENTS_PER_BEHAVIOR,
                text: q[0].clone(),
            })?;
            Ok(Behavior::new(day, &q[1], &q[2], &q[3]))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BehaviorSequence::new(id, behaviors))
}

/// Parses one rendered sequence. The result is not validated against any
/// dictionary.
pub fn parse_text(id: &str, text: &str) -> Result<BehaviorSequence, TextError> {
    let body = text
        .trim()
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or(TextError::NotBracketed)?;
    if body.contains('[') || body.contains(']') {
        return Err(TextError::NotBracketed);
    }
    group(id, &split_elements(body))
}

/// Parses the output of [`render_dataset_text`]; ids are `{prefix}{index}`.
pub fn parse_dataset_text(prefix: &str, text: &str) -> Result<Vec<BehaviorSequence>, TextError> {
    let body = text
        .trim()
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or(TextError::NotBracketed)?;
    let mut out = Vec::new();
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let inner = rest.strip_prefix('[').ok_or(TextError::NotBracketed)?;
        let end = inner.find(']').ok_or(TextError::NotBracketed)?;
        out.push(group(&alloc::format!("{prefix}{}", out.len()), &split_elements(&inner[..end]))?);
        rest = inner[end + 1..].trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    Ok(out)
}
