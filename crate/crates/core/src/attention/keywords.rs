//! Keyword selection: the non-entity tokens a sentence's entities attend to
//! most, per entity, unioned.

use super::{entity_salience, AttentionError};
use crate::ceil_tolerant;
use crate::corpus::{extract_entities, TaggedSentence};
use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::sync::OnceLock;

const ENGLISH_STOPWORDS: &str = include_str!("../../resources/stopwords/en.txt");

/// Selected keyword positions of one sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordSet {
    pub indices: BTreeSet<usize>,
    /// Entity ordinal (position in `extract_entities` order) to the keywords
    /// it contributed after filtering.
    pub per_entity: BTreeMap<usize, BTreeSet<usize>>,
}

impl KeywordSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    fn from_per_entity(per_entity: BTreeMap<usize, BTreeSet<usize>>) -> Self {
        let indices = per_entity.values().flatten().copied().collect();
        Self { indices, per_entity }
    }
}

/// Tokens that may never become keywords even when highly attended.
#[derive(Debug, Clone, Default)]
pub struct KeywordFilter {
    stopwords: HashSet<String>,
    punctuation: bool,
}

impl KeywordFilter {
    /// Filters nothing.
    pub fn none() -> Self {
        Self::default()
    }

    /// Built-in English stopword list plus punctuation.
    pub fn english() -> Self {
        Self::from_stopword_text(ENGLISH_STOPWORDS, true)
    }

    /// Stopwords from plain text: one word per line, `#` starts a comment.
    pub fn from_stopword_text(text: &str, punctuation: bool) -> Self {
        let stopwords = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_lowercase)
            .collect();
        Self { stopwords, punctuation }
    }

    pub fn from_stopword_file(path: &Path, punctuation: bool) -> std::io::Result<Self> {
        Ok(Self::from_stopword_text(&std::fs::read_to_string(path)?, punctuation))
    }

    pub fn with_punctuation(mut self, punctuation: bool) -> Self {
        self.punctuation = punctuation;
        self
    }

    pub fn stopword_count(&self) -> usize {
        self.stopwords.len()
    }

    pub fn rejects(&self, token: &str) -> bool {
        (self.punctuation && is_punctuation(token)) || self.stopwords.contains(&token.to_lowercase())
    }
}

/// True when every character is in a Unicode punctuation category (P*).
pub fn is_punctuation(token: &str) -> bool {
    static PUNCT: OnceLock<Regex> = OnceLock::new();
    PUNCT.get_or_init(|| Regex::new(r"^\p{P}+$").expect("static regex")).is_match(token)
}

fn check_rate(p: f64) -> Result<(), AttentionError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AttentionError::Argument(format!("keyword rate {p} outside [0, 1]")));
    }
    Ok(())
}

fn non_entity_indices(sentence: &TaggedSentence) -> Vec<usize> {
    (0..sentence.len()).filter(|&i| !sentence.is_entity_token(i)).collect()
}

/// Attention-ranked keywords.
///
/// For every entity, the non-entity tokens are ranked by the attention the
/// entity's tokens pay them (descending, ties to the lower index) and the
/// top `ceil(p * n_other)` are kept. Stopwords and punctuation are then
/// dropped from that list, so fewer may survive. The result is the union
/// over entities.
pub fn select_keywords(
    sentence: &TaggedSentence,
    matrix: ArrayView2<'_, f64>,
    p: f64,
    filter: &KeywordFilter,
) -> Result<KeywordSet, AttentionError> {
    check_rate(p)?;
    let n = sentence.len();
    if matrix.dim() != (n, n) {
        return Err(AttentionError::Invalid {
            id: sentence.id().to_string(),
            message: format!("matrix is {:?} but the sentence has {n} tokens", matrix.dim()),
        });
    }
    let candidates = non_entity_indices(sentence);
    let take = ceil_tolerant(p * candidates.len() as f64).min(candidates.len());

    let mut per_entity = BTreeMap::new();
    for (ordinal, span) in extract_entities(sentence).iter().enumerate() {
        let salience = entity_salience(matrix, span);
        let mut ranked = candidates.clone();
        ranked.sort_by(|&a, &b| salience[b].total_cmp(&salience[a]).then(a.cmp(&b)));
        let kept =
            ranked.into_iter().take(take).filter(|&i| !filter.rejects(&sentence.tokens()[i])).collect();
        per_entity.insert(ordinal, kept);
    }
    Ok(KeywordSet::from_per_entity(per_entity))
}

/// Keywords drawn uniformly at random, with the same per-entity count and
/// filtering rule as [`select_keywords`].
pub fn select_keywords_random<R: Rng + ?Sized>(
    sentence: &TaggedSentence,
    p: f64,
    filter: &KeywordFilter,
    rng: &mut R,
) -> Result<KeywordSet, AttentionError> {
    check_rate(p)?;
    let candidates = non_entity_indices(sentence);
    let take = ceil_tolerant(p * candidates.len() as f64).min(candidates.len());
    let mut per_entity = BTreeMap::new();
    for ordinal in 0..extract_entities(sentence).len() {
        let kept = sample(rng, candidates.len(), take)
            .into_iter()
            .map(|k| candidates[k])
            .filter(|&i| !filter.rejects(&sentence.tokens()[i]))
            .collect();
        per_entity.insert(ordinal, kept);
    }
    Ok(KeywordSet::from_per_entity(per_entity))
}
