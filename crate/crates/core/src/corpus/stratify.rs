//! Iterative stratification over entity-class sets.
//!
//! Each sentence is treated as a multi-label example whose labels are the
//! entity classes it contains. The corpus is split into a subset of exactly
//! `n` sentences and a remainder, keeping per-class proportions close to the
//! split ratio. Rare classes are placed first so they are not starved.

use super::{CorpusError, TaggedSentence};
use crate::seed::rng_from_seed;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeMap;

const SUBSET: usize = 0;
const REMAINDER: usize = 1;

/// Split `sentences` into `(subset, remainder)` with `|subset| == n`.
///
/// Both halves keep the original corpus order.
pub fn stratified_sample(
    sentences: &[TaggedSentence],
    n: usize,
    seed: u64,
) -> Result<(Vec<TaggedSentence>, Vec<TaggedSentence>), CorpusError> {
    let total = sentences.len();
    if n > total {
        return Err(CorpusError::Argument(format!("cannot sample {n} sentences from a corpus of {total}")));
    }
    let assignment = assign(sentences, n, seed);
    let mut subset = Vec::with_capacity(n);
    let mut remainder = Vec::with_capacity(total - n);
    for (sentence, split) in sentences.iter().zip(assignment) {
        if split == SUBSET {
            subset.push(sentence.clone());
        } else {
            remainder.push(sentence.clone());
        }
    }
    Ok((subset, remainder))
}

fn assign(sentences: &[TaggedSentence], n: usize, seed: u64) -> Vec<usize> {
    let total = sentences.len();
    let mut rng = rng_from_seed(seed);

    let mut class_ids: BTreeMap<String, usize> = BTreeMap::new();
    let labels: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| {
            s.entity_labels()
                .into_iter()
                .map(|l| {
                    let next = class_ids.len();
                    *class_ids.entry(l).or_insert(next)
                })
                .collect()
        })
        .collect();
    let n_classes = class_ids.len();

    let ratios =
        if total == 0 { [0.0, 0.0] } else { [n as f64 / total as f64, (total - n) as f64 / total as f64] };
    let mut capacity = [n, total - n];
    let mut remaining = vec![0usize; n_classes];
    for ls in &labels {
        for &c in ls {
            remaining[c] += 1;
        }
    }
    let mut desired: Vec<[f64; 2]> =
        remaining.iter().map(|&count| [count as f64 * ratios[0], count as f64 * ratios[1]]).collect();

    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);

    let mut split_of = vec![usize::MAX; total];

    while let Some(min) = remaining.iter().copied().filter(|&c| c > 0).min() {
        let rarest: Vec<usize> = (0..n_classes).filter(|&c| remaining[c] == min).collect();
        let class = rarest[rng.random_range(0..rarest.len())];

        for &idx in &order {
            if split_of[idx] != usize::MAX || !labels[idx].contains(&class) {
                continue;
            }
            let split = choose_split(&capacity, |j| desired[class][j], &mut rng);
            split_of[idx] = split;
            capacity[split] -= 1;
            for &c in &labels[idx] {
                desired[c][split] -= 1.0;
                remaining[c] -= 1;
            }
        }
    }

    // sentences without entities fill whatever room is left
    for &idx in &order {
        if split_of[idx] == usize::MAX {
            let split = choose_split(&capacity, |_| 0.0, &mut rng);
            split_of[idx] = split;
            capacity[split] -= 1;
        }
    }
    split_of
}

/// Among splits with free capacity, the one with the largest desired count
/// for the current class, then the largest free capacity, then random.
fn choose_split<R: Rng>(capacity: &[usize; 2], desire: impl Fn(usize) -> f64, rng: &mut R) -> usize {
    let open: Vec<usize> = [SUBSET, REMAINDER].into_iter().filter(|&j| capacity[j] > 0).collect();
    debug_assert!(!open.is_empty(), "every sentence has a slot by construction");
    let best_desire = open.iter().map(|&j| desire(j)).fold(f64::NEG_INFINITY, f64::max);
    let by_desire: Vec<usize> =
        open.into_iter().filter(|&j| (desire(j) - best_desire).abs() < 1e-9).collect();
    let best_cap = by_desire.iter().map(|&j| capacity[j]).max().unwrap_or(0);
    let tied: Vec<usize> = by_desire.into_iter().filter(|&j| capacity[j] == best_cap).collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    }
}

/// How a development set shrinks alongside a training subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DevSizing {
    /// Keep the train subset's sampling ratio.
    #[default]
    Proportional,
    Fixed(usize),
}

pub fn dev_downsample_size(dev_len: usize, train_len: usize, subset_len: usize, sizing: DevSizing) -> usize {
    match sizing {
        DevSizing::Fixed(k) => k.min(dev_len),
        DevSizing::Proportional if train_len == 0 => 0,
        DevSizing::Proportional => {
            let k = (dev_len as f64 * subset_len as f64 / train_len as f64).round() as usize;
            k.min(dev_len)
        }
    }
}
