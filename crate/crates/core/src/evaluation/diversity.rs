use super::EvalError;
use crate::corpus::{ConllDocument, TaggedSentence};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

/// Mean novelty of augmentations relative to their sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    /// Percentage of new entity words.
    pub diversity_e: f64,
    /// Percentage of new non-entity words.
    pub diversity_n: f64,
    /// Mean absolute length difference in tokens.
    pub diversity_l: f64,
    pub pairs: usize,
}

fn word_sets(s: &TaggedSentence) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut entity = BTreeSet::new();
    let mut other = BTreeSet::new();
    for (i, token) in s.tokens().iter().enumerate() {
        let folded = token.to_lowercase();
        if s.is_entity_token(i) {
            entity.insert(folded);
        } else {
            other.insert(folded);
        }
    }
    (entity, other)
}

/// Percentage of `augmented` not in `original`; 0 for an empty set.
fn novelty(augmented: &BTreeSet<String>, original: &BTreeSet<String>) -> f64 {
    if augmented.is_empty() {
        return 0.0;
    }
    100.0 * augmented.difference(original).count() as f64 / augmented.len() as f64
}

pub fn diversity(pairs: &[(TaggedSentence, TaggedSentence)]) -> Result<DiversityReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Argument("no (original, augmented) pairs".into()));
    }
    let (mut e, mut n, mut l) = (0.0, 0.0, 0.0);
    for (original, augmented) in pairs {
        let (orig_e, orig_n) = word_sets(original);
        let (aug_e, aug_n) = word_sets(augmented);
        e += novelty(&aug_e, &orig_e);
        n += novelty(&aug_n, &orig_n);
        l += augmented.len().abs_diff(original.len()) as f64;
    }
    let count = pairs.len() as f64;
    Ok(DiversityReport {
        diversity_e: e / count,
        diversity_n: n / count,
        diversity_l: l / count,
        pairs: pairs.len(),
    })
}

/// Pair every augmented document carrying a `source = <id>` comment with
/// that gold sentence. Documents without the comment are skipped.
pub fn pairs_from_provenance(
    augmented: &[ConllDocument],
    gold: &[TaggedSentence],
) -> Result<Vec<(TaggedSentence, TaggedSentence)>, EvalError> {
    let by_id: HashMap<&str, &TaggedSentence> = gold.iter().map(|s| (s.id(), s)).collect();
    augmented
        .iter()
        .filter_map(|d| d.comment_value("source").map(|src| (src, &d.sentence)))
        .map(|(src, aug)| {
            let original = by_id.get(src).ok_or_else(|| {
                EvalError::Argument(format!("source {src:?} of {:?} not in gold", aug.id()))
            })?;
            Ok(((*original).clone(), aug.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: &str, tokens: &[&str], tags: &[&str]) -> TaggedSentence {
        TaggedSentence::from_strs(id, tokens, tags).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        let a = s("a", &["John", "ran"], &["B-PER", "O"]);
        let r = diversity(&[(a.clone(), a)]).unwrap();
        assert_eq!((r.diversity_e, r.diversity_n, r.diversity_l), (0.0, 0.0, 0.0));
    }

    #[test]
    fn new_entity_word() {
        let a = s("a", &["john", "ran"], &["B-PER", "O"]);
        let b = s("b", &["Jane", "ran", "far"], &["B-PER", "O", "O"]);
        let r = diversity(&[(a, b)]).unwrap();
        assert_eq!(r.diversity_e, 100.0);
        assert_eq!(r.diversity_n, 50.0);
        assert_eq!(r.diversity_l, 1.0);
    }

    #[test]
    fn case_folded_and_empty_sets() {
        let a = s("a", &["X", "y"], &["B-A", "O"]);
        let b = s("b", &["x"], &["B-A"]);
        let r = diversity(&[(a, b)]).unwrap();
        assert_eq!((r.diversity_e, r.diversity_n), (0.0, 0.0));
        assert!(diversity(&[]).is_err());
    }

    #[test]
    fn provenance_pairs() {
        let gold = vec![s("a", &["x"], &["O"])];
        let mut doc = ConllDocument::new(s("a-aug1", &["y"], &["O"]));
        doc.comments.push("source = a round = 1 mixner = false".into());
        let pairs = pairs_from_provenance(&[ConllDocument::new(gold[0].clone()), doc], &gold).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].1.id(), "a-aug1");
    }
}
