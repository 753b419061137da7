use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{BehaviorSequence, Timestamp, Weekday, CANONICAL_LEN, ELEMENTS_PER_BEHAVIOR};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DictionaryError {
    /// The same token string appears in two categories (e.g. a device named
    /// like a slot), which would make the vocabulary ambiguous.
    #[error("token {token:?} appears both as {first} and as {second}")]
    Conflict { token: String, first: &'static str, second: &'static str },
    #[error("invalid dictionary: {0}")]
    Invalid(String),
}

/// The closed vocabulary of days, slots, devices and per-device controls.
///
/// List order is significant: it defines token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceDictionary {
    days: Vec<Weekday>,
    slots: Vec<String>,
    devices: Vec<String>,
    controls: BTreeMap<String, Vec<String>>,
    control_owners: BTreeMap<String, Vec<usize>>,
}

/// Whether a sequence must have the canonical length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShapePolicy {
    #[default]
    Canonical,
    AnyLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum ViolationCode {
    Shape,
    UnknownDay,
    UnknownSlot,
    UnknownDevice,
    UnknownControl,
    DeviceControlMismatch,
    TimestampOrder,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::Shape => "SHAPE",
            ViolationCode::UnknownDay => "UNKNOWN_DAY",
            ViolationCode::UnknownSlot => "UNKNOWN_SLOT",
            ViolationCode::UnknownDevice => "UNKNOWN_DEVICE",
            ViolationCode::UnknownControl => "UNKNOWN_CONTROL",
            ViolationCode::DeviceControlMismatch => "DEVICE_CONTROL_MISMATCH",
            ViolationCode::TimestampOrder => "TIMESTAMP_ORDER",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Violation {
    pub code: ViolationCode,
    /// 0-based behavior index, when the violation is local to one behavior.
    pub behavior: Option<usize>,
    pub detail: String,
}

impl Violation {
    fn at(code: ViolationCode, behavior: usize, detail: String) -> Self {
        Violation { code, behavior: Some(behavior), detail }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.behavior {
            Some(i) => write!(f, "{} at behavior {}: {}", self.code, i + 1, self.detail),
            None => write!(f, "{}: {}", self.code, self.detail),
        }
    }
}

fn check_token_text(category: &str, token: &str) -> Result<(), DictionaryError> {
    let bad = token.is_empty()
        || token.trim() != token
        || token.contains("  ")
        || token.chars().any(|c| matches!(c, ',' | '[' | ']' | '"' | '`') || (c.is_whitespace() && c != ' '));
    if bad {
        return Err(DictionaryError::Invalid(format!(
            "{category} token {token:?} is empty, padded, or contains a reserved character"
        )));
    }
    Ok(())
}

fn check_unique<'a>(category: &str, items: impl IntoIterator<Item = &'a str>) -> Result<(), DictionaryError> {
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item) {
            return Err(DictionaryError::Invalid(format!("duplicate {category} {item:?}")));
        }
    }
    Ok(())
}

impl DeviceDictionary {
    /// Builds and validates a dictionary. An empty device list is rejected.
    pub fn new(
        days: Vec<Weekday>,
        slots: Vec<String>,
        devices: Vec<String>,
        controls: BTreeMap<String, Vec<String>>,
    ) -> Result<Self, DictionaryError> {
        Self::build(days, slots, devices, controls, false)
    }

    /// Like [`DeviceDictionary::new`] but accepts an empty device list.
    pub fn new_permissive(
        days: Vec<Weekday>,
        slots: Vec<String>,
        devices: Vec<String>,
        controls: BTreeMap<String, Vec<String>>,
    ) -> Result<Self, DictionaryError> {
        Self::build(days, slots, devices, controls, true)
    }

    fn build(
        days: Vec<Weekday>,
        slots: Vec<String>,
        devices: Vec<String>,
        controls: BTreeMap<String, Vec<String>>,
        allow_empty_devices: bool,
    ) -> Result<Self, DictionaryError> {
        if days.is_empty() {
            return Err(DictionaryError::Invalid("no days".into()));
        }
        if slots.is_empty() {
            return Err(DictionaryError::Invalid("no time slots".into()));
        }
        if devices.is_empty() && !allow_empty_devices {
            return Err(DictionaryError::Invalid("no devices".into()));
        }
        check_unique("day", days.iter().map(|d| d.name()))?;
        check_unique("slot", slots.iter().map(String::as_str))?;
        check_unique("device", devices.iter().map(String::as_str))?;
        for s in &slots {
            check_token_text("slot", s)?;
        }
        for d in &devices {
            check_token_text("device", d)?;
            match controls.get(d) {
                None => return Err(DictionaryError::Invalid(format!("device {d:?} has no controls"))),
                Some(list) if list.is_empty() => {
                    return Err(DictionaryError::Invalid(format!("device {d:?} has no controls")))
                }
                Some(list) => {
                    check_unique("control", list.iter().map(String::as_str))?;
                    for c in list {
                        check_token_text("control", c)?;
                    }
                }
            }
        }
        if let Some(orphan) = controls.keys().find(|k| !devices.contains(k)) {
            return Err(DictionaryError::Invalid(format!(
                "controls listed for unknown device {orphan:?}"
            )));
        }

        let mut control_owners: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (di, d) in devices.iter().enumerate() {
            for c in &controls[d] {
                control_owners.entry(c.clone()).or_default().push(di);
            }
        }

        let dict = DeviceDictionary { days, slots, devices, controls, control_owners };
        dict.check_cross_category()?;
        Ok(dict)
    }

    /// Every token string must belong to a single category.
    pub(crate) fn check_cross_category(&self) -> Result<(), DictionaryError> {
        let mut owner: BTreeMap<&str, &'static str> = BTreeMap::new();
        let tokens = self
            .days
            .iter()
            .map(|d| (d.name(), "day"))
            .chain(self.slots.iter().map(|s| (s.as_str(), "slot")))
            .chain(self.devices.iter().map(|s| (s.as_str(), "device")))
            .chain(self.control_tokens().map(|s| (s, "control")));
        for (token, category) in tokens {
            if let Some(first) = owner.insert(token, category) {
                return Err(DictionaryError::Conflict { token: token.to_string(), first, second: category });
            }
        }
        Ok(())
    }

    pub fn days(&self) -> &[Weekday] {
        &self.days
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn devices(&self) -> &[String] {
        &self.devices
    }

    pub fn controls(&self, device: &str) -> Option<&[String]> {
        self.controls.get(device).map(Vec::as_slice)
    }

    /// Distinct control strings in first-appearance order (devices in
    /// declaration order, then each device's list order).
    pub fn control_tokens(&self) -> impl Iterator<Item = &str> + '_ {
        let mut seen = BTreeSet::new();
        self.devices
            .iter()
            .flat_map(move |d| self.controls[d].iter())
            .filter(move |c| seen.insert(c.as_str()))
            .map(String::as_str)
    }

    /// All valid `(device, control)` pairs in declaration order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.devices
            .iter()
            .flat_map(move |d| self.controls[d].iter().map(move |c| (d.as_str(), c.as_str())))
    }

    pub fn slot_index(&self, slot: &str) -> Option<usize> {
        self.slots.iter().position(|s| s == slot)
    }

    /// Sort key `(weekday index, slot index)`, or `None` for an unknown slot.
    pub fn timestamp_key(&self, ts: &Timestamp) -> Option<(usize, usize)> {
        self.slot_index(&ts.slot).map(|s| (ts.day.index(), s))
    }

    /// Checks one sequence. Returns every violation found (empty = valid).
    pub fn check_sequence(&self, seq: &BehaviorSequence, shape: ShapePolicy) -> Vec<Violation> {
        let elements: Vec<&str> = seq.elements().collect();
        self.check_elements(&elements, shape)
    }

    /// Checks a flat `(day, slot, device, control)*` element list. This is the
    /// single validator behind loaders, decoding and LLM-output validation.
    pub fn check_elements<S: AsRef<str>>(&self, elements: &[S], shape: ShapePolicy) -> Vec<Violation> {
        let mut out = Vec::new();
        if elements.len() % ELEMENTS_PER_BEHAVIOR != 0 {
            out.push(Violation {
                code: ViolationCode::Shape,
                behavior: None,
                detail: format!(
                    "{} elements is not a whole number of {ELEMENTS_PER_BEHAVIOR}-element behaviors",
                    elements.len()
                ),
            });
            return out;
        }
        let n = elements.len() / ELEMENTS_PER_BEHAVIOR;
        if shape == ShapePolicy::Canonical && n != CANONICAL_LEN {
            out.push(Violation {
                code: ViolationCode::Shape,
                behavior: None,
                detail: format!(
                    "{n} behaviors ({} elements), expected {CANONICAL_LEN} ({} elements)",
                    elements.len(),
                    CANONICAL_LEN * ELEMENTS_PER_BEHAVIOR
                ),
            });
        }

        let mut prev_key: Option<(usize, usize)> = None;
        for (i, quad) in elements.chunks(ELEMENTS_PER_BEHAVIOR).enumerate() {
            let [day, slot, device, control] =
                [quad[0].as_ref(), quad[1].as_ref(), quad[2].as_ref(), quad[3].as_ref()];

            let day_idx = match day.parse::<Weekday>() {
                Ok(d) if self.days.contains(&d) => Some(d.index()),
                _ => {
                    out.push(Violation::at(ViolationCode::UnknownDay, i, format!("unknown day {day:?}")));
                    None
                }
            };
            let slot_idx = self.slot_index(slot);
            if slot_idx.is_none() {
                out.push(Violation::at(ViolationCode::UnknownSlot, i, format!("unknown time slot {slot:?}")));
            }
            match self.controls.get(device) {
                Some(list) => {
                    if !list.iter().any(|c| c == control) {
                        if self.control_owners.contains_key(control) {
                            out.push(Violation::at(
                                ViolationCode::DeviceControlMismatch,
                                i,
                                format!("control {control:?} does not belong to device {device:?}"),
                            ));
                        } else {
                            out.push(Violation::at(
                                ViolationCode::UnknownControl,
                                i,
                                format!("unknown control {control:?}"),
                            ));
                        }
                    }
                }
                None => {
                    out.push(Violation::at(ViolationCode::UnknownDevice, i, format!("unknown device {device:?}")));
                    if !self.control_owners.contains_key(control) {
                        out.push(Violation::at(
                            ViolationCode::UnknownControl,
                            i,
                            format!("unknown control {control:?}"),
                        ));
                    }
                }
            }

            if let (Some(d), Some(s)) = (day_idx, slot_idx) {
                let key = (d, s);
                if let Some(prev) = prev_key {
                    if key < prev {
                        out.push(Violation::at(
                            ViolationCode::TimestampOrder,
                            i,
                            format!("({day}, {slot}) precedes the previous behavior's timestamp"),
                        ));
                    }
                }
                prev_key = Some(key);
            }
        }
        out
    }

    pub fn is_valid(&self, seq: &BehaviorSequence, shape: ShapePolicy) -> bool {
        self.check_sequence(seq, shape).is_empty()
    }
}
