//! IOB2 tag handling: parsing single tags, validating sequences, decoding
//! spans and re-encoding them.

use serde::{Deserialize, Serialize};
use std::fmt;

/// The outside tag.
pub const OUTSIDE: &str = "O";

/// A decoded BIO tag borrowed from its string form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Tag<'a> {
    /// Parse `"O"`, `"B-X"` or `"I-X"`. Anything else is `None`.
    pub fn parse(tag: &'a str) -> Option<Self> {
        if tag == OUTSIDE {
            return Some(Tag::Outside);
        }
        let (prefix, label) = tag.split_at_checked(2)?;
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return None;
        }
        match prefix {
            "B-" => Some(Tag::Begin(label)),
            "I-" => Some(Tag::Inside(label)),
            _ => None,
        }
    }

    pub fn label(&self) -> Option<&'a str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(l) | Tag::Inside(l) => Some(l),
        }
    }
}

/// Why a tag position breaks IOB2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ViolationReason {
    /// Not of the form `O`, `B-X` or `I-X`.
    Unrecognized { tag: String },
    /// `I-X` at the start of a sentence or after `O`.
    OrphanInside { label: String },
    /// `I-X` following a `B-Y`/`I-Y` with `Y != X`.
    LabelChange { expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BioViolation {
    pub position: usize,
    #[serde(flatten)]
    pub reason: ViolationReason,
}

impl fmt::Display for BioViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.reason {
            ViolationReason::Unrecognized { tag } => {
                write!(f, "position {}: unrecognized tag {tag:?}", self.position)
            }
            ViolationReason::OrphanInside { label } => {
                write!(f, "position {}: I-{label} does not continue an entity", self.position)
            }
            ViolationReason::LabelChange { expected, found } => {
                write!(f, "position {}: I-{found} continues an entity of class {expected}", self.position)
            }
        }
    }
}

/// Check a tag sequence against IOB2. Empty result iff the sequence is valid.
pub fn validate_bio<S: AsRef<str>>(tags: &[S]) -> Vec<BioViolation> {
    let mut violations = Vec::new();
    // label of the entity open at the previous position, if any
    let mut open: Option<&str> = None;
    for (position, raw) in tags.iter().enumerate() {
        let raw = raw.as_ref();
        match Tag::parse(raw) {
            None => {
                violations.push(BioViolation {
                    position,
                    reason: ViolationReason::Unrecognized { tag: raw.to_string() },
                });
                open = None;
            }
            Some(Tag::Outside) => open = None,
            Some(Tag::Begin(label)) => open = Some(label),
            Some(Tag::Inside(label)) => {
                match open {
                    None => violations.push(BioViolation {
                        position,
                        reason: ViolationReason::OrphanInside { label: label.to_string() },
                    }),
                    Some(prev) if prev != label => violations.push(BioViolation {
                        position,
                        reason: ViolationReason::LabelChange {
                            expected: prev.to_string(),
                            found: label.to_string(),
                        },
                    }),
                    Some(_) => {}
                }
                open = Some(label);
            }
        }
    }
    violations
}

/// Rewrite IOB1-style orphan or label-changing `I-X` tags to `B-X`.
///
/// Unrecognized tags are left untouched, so the result can still fail
/// validation.
pub fn repair_bio<S: AsRef<str>>(tags: &[S]) -> Vec<String> {
    let mut out = Vec::with_capacity(tags.len());
    let mut open: Option<String> = None;
    for raw in tags {
        let raw = raw.as_ref();
        match Tag::parse(raw) {
            None | Some(Tag::Outside) => {
                open = None;
                out.push(raw.to_string());
            }
            Some(Tag::Begin(label)) => {
                open = Some(label.to_string());
                out.push(raw.to_string());
            }
            Some(Tag::Inside(label)) => {
                if open.as_deref() == Some(label) {
                    out.push(raw.to_string());
                } else {
                    out.push(format!("B-{label}"));
                    open = Some(label.to_string());
                }
            }
        }
    }
    out
}

/// Decode a valid IOB2 sequence into `(start, end, label)` triples, `end`
/// exclusive. Invalid positions are decoded leniently (an orphan `I-X`
/// starts a new span).
pub fn decode_spans<S: AsRef<str>>(tags: &[S]) -> Vec<(usize, usize, String)> {
    let mut spans: Vec<(usize, usize, String)> = Vec::new();
    let mut current: Option<(usize, &str)> = None;
    for (i, raw) in tags.iter().enumerate() {
        let tag = Tag::parse(raw.as_ref()).unwrap_or(Tag::Outside);
        match tag {
            Tag::Inside(label) if current.is_some_and(|(_, l)| l == label) => {}
            Tag::Outside => {
                if let Some((start, label)) = current.take() {
                    spans.push((start, i, label.to_string()));
                }
            }
            Tag::Begin(label) | Tag::Inside(label) => {
                if let Some((start, prev)) = current.take() {
                    spans.push((start, i, prev.to_string()));
                }
                current = Some((i, label));
            }
        }
    }
    if let Some((start, label)) = current {
        spans.push((start, tags.len(), label.to_string()));
    }
    spans
}

/// Encode disjoint spans into an IOB2 sequence of length `len`.
pub fn encode_spans<'a, I>(len: usize, spans: I) -> Vec<String>
where
    I: IntoIterator<Item = (usize, usize, &'a str)>,
{
    let mut tags = vec![OUTSIDE.to_string(); len];
    for (start, end, label) in spans {
        for (offset, slot) in tags[start..end].iter_mut().enumerate() {
            *slot = if offset == 0 { format!("B-{label}") } else { format!("I-{label}") };
        }
    }
    tags
}
