use super::PipelineError;
use crate::corpus::{ConllDocument, TaggedSentence};
use crate::seed::derived_rng;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Distinct tokens seen with each tag, sorted.
pub fn label_inventory(corpus: &[TaggedSentence]) -> BTreeMap<String, Vec<String>> {
    let mut sets: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for s in corpus {
        for (token, tag) in s.tokens().iter().zip(s.tags()) {
            sets.entry(tag.clone()).or_default().insert(token.clone());
        }
    }
    sets.into_iter().map(|(tag, tokens)| (tag, tokens.into_iter().collect())).collect()
}

/// Label-wise token replacement. For every round and sentence, each token
/// is replaced with probability `probability` by a uniformly drawn token
/// carrying the same tag elsewhere in the corpus. Returns the gold corpus
/// followed by the replacements, which keep the source's tags.
pub fn baseline_lwtr(
    corpus: &[TaggedSentence],
    rounds: usize,
    probability: f64,
    seed: u64,
) -> Result<Vec<ConllDocument>, PipelineError> {
    if corpus.is_empty() {
        return Err(PipelineError::Data("empty corpus".into()));
    }
    if rounds == 0 || !(0.0..=1.0).contains(&probability) {
        return Err(PipelineError::Config(format!(
            "rounds must be positive and probability in [0, 1], got {rounds} and {probability}"
        )));
    }
    let inventory = label_inventory(corpus);
    let mut out: Vec<ConllDocument> = corpus.iter().cloned().map(ConllDocument::new).collect();
    for round in 1..=rounds {
        for s in corpus {
            let mut rng = derived_rng(seed, &["lwtr", s.id(), &round.to_string()]);
            let tokens: Vec<String> = s
                .tokens()
                .iter()
                .zip(s.tags())
                .map(|(token, tag)| {
                    if !rng.random_bool(probability) {
                        return token.clone();
                    }
                    let pool = &inventory[tag];
                    pool[rng.random_range(0..pool.len())].clone()
                })
                .collect();
            let sentence = TaggedSentence::new(format!("{}-lwtr{round}", s.id()), tokens, s.tags().to_vec())?;
            out.push(ConllDocument {
                sentence,
                comments: vec![format!("source = {} round = {round} method = lwtr", s.id())],
            });
        }
    }
    Ok(out)
}
