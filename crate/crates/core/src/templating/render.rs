use super::{Template, TemplateElement};
use crate::corpus::{encode_spans, TaggedSentence};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// How label markers are spelled in denoiser input and output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerStyle {
    /// The bare label on both sides: `PER john smith PER`.
    #[default]
    Bare,
    /// XML-like open and close tokens: `<PER> john smith </PER>`.
    Tagged,
}

/// Literal tokens used when rendering templates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderVocab {
    pub mask: String,
    pub marker_style: MarkerStyle,
}

impl Default for RenderVocab {
    fn default() -> Self {
        Self { mask: "<mask>".into(), marker_style: MarkerStyle::Bare }
    }
}

impl RenderVocab {
    fn open(&self, label: &str) -> String {
        match self.marker_style {
            MarkerStyle::Bare => label.to_string(),
            MarkerStyle::Tagged => format!("<{label}>"),
        }
    }

    fn close(&self, label: &str) -> String {
        match self.marker_style {
            MarkerStyle::Bare => label.to_string(),
            MarkerStyle::Tagged => format!("</{label}>"),
        }
    }
}

/// Token strings for the denoiser.
pub fn render(template: &Template, vocab: &RenderVocab) -> Vec<String> {
    let mut open: Option<&str> = None;
    template
        .elements()
        .iter()
        .map(|e| match e {
            TemplateElement::Kept { text, .. } => text.clone(),
            TemplateElement::Mask => vocab.mask.clone(),
            TemplateElement::LabelMarker { label } => {
                if open == Some(label.as_str()) {
                    open = None;
                    vocab.close(label)
                } else {
                    open = Some(label);
                    vocab.open(label)
                }
            }
        })
        .collect()
}

/// Generated text that cannot be turned back into a tagged sentence.
#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MalformedError {
    #[error("no tokens left after removing markers")]
    Empty,
    #[error("unpaired {label} marker at position {position}")]
    Unpaired { label: String, position: usize },
    #[error("{label} pair at position {position} encloses no tokens")]
    EmptySpan { label: String, position: usize },
    #[error("{inner} marker at position {position} inside an open {outer} pair")]
    Interleaved { outer: String, inner: String, position: usize },
    #[error("mask token left at position {position}")]
    ResidualMask { position: usize },
    #[error("{0}")]
    Invalid(String),
}

enum Marker<'a> {
    Open(&'a str),
    Close(&'a str),
    /// Bare style: the same token opens and closes.
    Toggle(&'a str),
}

fn classify<'a>(token: &'a str, labels: &BTreeSet<String>, style: MarkerStyle) -> Option<Marker<'a>> {
    match style {
        MarkerStyle::Bare => labels.contains(token).then_some(Marker::Toggle(token)),
        MarkerStyle::Tagged => {
            let inner = token.strip_prefix('<')?.strip_suffix('>')?;
            match inner.strip_prefix('/') {
                Some(label) if labels.contains(label) => Some(Marker::Close(label)),
                None if labels.contains(inner) => Some(Marker::Open(inner)),
                _ => None,
            }
        }
    }
}

/// Parse denoiser output back into a tagged sentence.
///
/// Tokens are re-split on whitespace. Markers pair left to right; tokens
/// between a pair become `B-X I-X ...`, all others `O`, and the markers are
/// removed.
pub fn delinearize<S: AsRef<str>>(
    id: &str,
    tokens: &[S],
    known_labels: &BTreeSet<String>,
    vocab: &RenderVocab,
) -> Result<TaggedSentence, MalformedError> {
    let flat: Vec<&str> = tokens.iter().flat_map(|t| t.as_ref().split_whitespace()).collect();
    let mut words: Vec<String> = Vec::with_capacity(flat.len());
    let mut spans: Vec<(usize, usize, &str)> = Vec::new();
    let mut open: Option<(&str, usize, usize)> = None; // label, first word, marker position

    for (position, &token) in flat.iter().enumerate() {
        if token == vocab.mask {
            return Err(MalformedError::ResidualMask { position });
        }
        let Some(marker) = classify(token, known_labels, vocab.marker_style) else {
            words.push(token.to_string());
            continue;
        };
        match (marker, open) {
            (Marker::Open(label) | Marker::Toggle(label), None) => {
                open = Some((label, words.len(), position));
            }
            (Marker::Close(label) | Marker::Toggle(label), Some((outer, start, _))) if label == outer => {
                if words.len() == start {
                    return Err(MalformedError::EmptySpan { label: label.to_string(), position });
                }
                spans.push((start, words.len(), label));
                open = None;
            }
            (Marker::Close(label), None) => {
                return Err(MalformedError::Unpaired { label: label.to_string(), position });
            }
            (Marker::Open(inner) | Marker::Close(inner) | Marker::Toggle(inner), Some((outer, _, _))) => {
                return Err(MalformedError::Interleaved {
                    outer: outer.to_string(),
                    inner: inner.to_string(),
                    position,
                });
            }
        }
    }
    if let Some((label, _, position)) = open {
        return Err(MalformedError::Unpaired { label: label.to_string(), position });
    }
    if words.is_empty() {
        return Err(MalformedError::Empty);
    }
    let tags = encode_spans(words.len(), spans);
    TaggedSentence::new(id, words, tags).map_err(|e| MalformedError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templating::Role;

    fn labels() -> BTreeSet<String> {
        ["PER", "LOC"].into_iter().map(String::from).collect()
    }

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn render_bare_and_tagged() {
        let t = Template::from_elements(
            "s",
            vec![
                TemplateElement::LabelMarker { label: "PER".into() },
                TemplateElement::Kept { text: "x".into(), role: Role::Entity, origin: None },
                TemplateElement::LabelMarker { label: "PER".into() },
                TemplateElement::Mask,
            ],
        )
        .unwrap();
        assert_eq!(render(&t, &RenderVocab::default()), ["PER", "x", "PER", "<mask>"]);
        let tagged = RenderVocab { mask: "[M]".into(), marker_style: MarkerStyle::Tagged };
        assert_eq!(render(&t, &tagged), ["<PER>", "x", "</PER>", "[M]"]);
        let empty = Template::from_elements("s", vec![]).unwrap();
        assert!(render(&empty, &RenderVocab::default()).is_empty());
        let mask = Template::from_elements("s", vec![TemplateElement::Mask]).unwrap();
        assert_eq!(render(&mask, &RenderVocab::default()), ["<mask>"]);
    }

    #[test]
    fn delinearize_pairs_markers() {
        let tokens = strs(&["PER", "john", "smith", "PER", "visited", "LOC", "paris", "LOC"]);
        let s = delinearize("a", &tokens, &labels(), &RenderVocab::default()).unwrap();
        assert_eq!(s.tokens(), ["john", "smith", "visited", "paris"]);
        assert_eq!(s.tags(), ["B-PER", "I-PER", "O", "B-LOC"]);
        assert_eq!(s.id(), "a");
    }

    #[test]
    fn delinearize_without_markers() {
        let s = delinearize("a", &["hello world", "again"], &labels(), &RenderVocab::default()).unwrap();
        assert_eq!(s.tokens(), ["hello", "world", "again"]);
        assert!(s.tags().iter().all(|t| t == "O"));
    }

    #[test]
    fn delinearize_errors() {
        let v = RenderVocab::default();
        let check = |tokens: &[&str]| delinearize("a", &strs(tokens), &labels(), &v).unwrap_err();
        assert!(matches!(check(&["PER", "john"]), MalformedError::Unpaired { .. }));
        assert!(matches!(check(&["PER", "PER", "x"]), MalformedError::EmptySpan { .. }));
        assert!(matches!(check(&["PER", "a", "LOC", "b", "LOC", "PER"]), MalformedError::Interleaved { .. }));
        assert!(matches!(check(&["a", "<mask>"]), MalformedError::ResidualMask { position: 1 }));
        assert!(matches!(check(&[]), MalformedError::Empty));
        assert!(matches!(check(&["PER", "PER"]), MalformedError::EmptySpan { .. }));
    }

    #[test]
    fn tagged_style() {
        let v = RenderVocab { marker_style: MarkerStyle::Tagged, ..Default::default() };
        let tokens = strs(&["<PER>", "ann", "</PER>", "PER", "<LOC>", "rome", "</LOC>"]);
        let s = delinearize("a", &tokens, &labels(), &v).unwrap();
        // bare label strings are ordinary words in tagged style
        assert_eq!(s.tokens(), ["ann", "PER", "rome"]);
        assert_eq!(s.tags(), ["B-PER", "O", "B-LOC"]);
        let err = delinearize("a", &strs(&["x", "</PER>"]), &labels(), &v).unwrap_err();
        assert!(matches!(err, MalformedError::Unpaired { .. }));
        let err = delinearize("a", &strs(&["<PER>", "x", "</LOC>"]), &labels(), &v).unwrap_err();
        assert!(matches!(err, MalformedError::Interleaved { .. }));
    }
}
