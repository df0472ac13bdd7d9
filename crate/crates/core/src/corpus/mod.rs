//! BIO-tagged corpora: the sentence type, entity spans, CoNLL I/O and
//! stratified low-resource sampling.

mod bio;
mod conll;
mod stratify;

pub use bio::{
    decode_spans, encode_spans, repair_bio, validate_bio, BioViolation, Tag, ViolationReason, OUTSIDE,
};
pub use conll::{
    parse_conll, parse_conll_documents, serialize_conll, serialize_conll_documents, ConllDocument,
    ParseOptions, Separator,
};
pub use stratify::{dev_downsample_size, stratified_sample, DevSizing};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sentence {id:?}: {message}")]
    Validation { id: String, message: String },
    #[error("duplicate sentence id {0:?}")]
    DuplicateId(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// A pre-tokenized sentence with one IOB2 tag per token.
///
/// Construction validates; a value of this type always satisfies the
/// invariants (non-empty, aligned, IOB2, no empty or control-character
/// tokens).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSentence")]
pub struct TaggedSentence {
    id: String,
    tokens: Vec<String>,
    tags: Vec<String>,
}

#[derive(Deserialize)]
struct RawSentence {
    id: String,
    tokens: Vec<String>,
    tags: Vec<String>,
}

impl TryFrom<RawSentence> for TaggedSentence {
    type Error = CorpusError;

    fn try_from(raw: RawSentence) -> Result<Self, Self::Error> {
        TaggedSentence::new(raw.id, raw.tokens, raw.tags)
    }
}

impl TaggedSentence {
    pub fn new(id: impl Into<String>, tokens: Vec<String>, tags: Vec<String>) -> Result<Self, CorpusError> {
        let id = id.into();
        let invalid = |message: String| CorpusError::Validation { id: id.clone(), message };
        if tokens.is_empty() {
            return Err(invalid("sentence has no tokens".into()));
        }
        if tokens.len() != tags.len() {
            return Err(invalid(format!("{} tokens but {} tags", tokens.len(), tags.len())));
        }
        if let Some(i) = tokens.iter().position(|t| t.is_empty()) {
            return Err(invalid(format!("empty token at position {i}")));
        }
        if let Some(i) = tokens.iter().position(|t| t.contains(['\t', '\n', '\r'])) {
            return Err(invalid(format!("token at position {i} contains a tab or line break")));
        }
        let violations = validate_bio(&tags);
        if !violations.is_empty() {
            let listed: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(invalid(format!("invalid IOB2: {}", listed.join("; "))));
        }
        Ok(Self { id, tokens, tags })
    }

    /// Build from string slices; convenient in tests and fixtures.
    pub fn from_strs(id: &str, tokens: &[&str], tags: &[&str]) -> Result<Self, CorpusError> {
        Self::new(
            id,
            tokens.iter().map(|s| s.to_string()).collect(),
            tags.iter().map(|s| s.to_string()).collect(),
        )
    }

    /// Build from tokens and entity spans `(start, end, label)`.
    pub fn from_spans(
        id: impl Into<String>,
        tokens: Vec<String>,
        spans: &[(usize, usize, &str)],
    ) -> Result<Self, CorpusError> {
        let tags = encode_spans(tokens.len(), spans.iter().copied());
        Self::new(id, tokens, tags)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false; sentences hold at least one token.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Same tokens, different tags. Tags are re-validated.
    pub fn with_tags(&self, tags: Vec<String>) -> Result<Self, CorpusError> {
        Self::new(self.id.clone(), self.tokens.clone(), tags)
    }

    pub fn is_entity_token(&self, index: usize) -> bool {
        self.tags.get(index).is_some_and(|t| t != OUTSIDE)
    }

    pub fn has_entities(&self) -> bool {
        self.tags.iter().any(|t| t != OUTSIDE)
    }

    /// Distinct entity classes present, sorted.
    pub fn entity_labels(&self) -> BTreeSet<String> {
        self.tags.iter().filter_map(|t| Tag::parse(t).and_then(|t| t.label()).map(str::to_string)).collect()
    }

    /// Token sequence lower-cased for duplicate detection.
    pub fn folded_tokens(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.to_lowercase()).collect()
    }
}

/// A contiguous named entity inside a sentence; `end` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub surface: Vec<String>,
}

impl EntitySpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start..self.end).contains(&index)
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// Entity spans of a sentence, disjoint and ordered by start.
pub fn extract_entities(sentence: &TaggedSentence) -> Vec<EntitySpan> {
    decode_spans(sentence.tags())
        .into_iter()
        .map(|(start, end, label)| EntitySpan {
            start,
            end,
            label,
            surface: sentence.tokens()[start..end].to_vec(),
        })
        .collect()
}

/// Entity classes present anywhere in the corpus, sorted.
pub fn label_set<'a, I>(sentences: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a TaggedSentence>,
{
    sentences.into_iter().flat_map(TaggedSentence::entity_labels).collect()
}
