use super::EvalError;
use crate::corpus::{decode_spans, TaggedSentence};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl SpanCounts {
    fn add(&mut self, other: SpanCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: SpanCounts,
}

impl From<SpanCounts> for Score {
    fn from(counts: SpanCounts) -> Self {
        Self { precision: counts.precision(), recall: counts.recall(), f1: counts.f1(), counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub counts: SpanCounts,
    /// False positives count against the predicted label, the rest against
    /// the gold label.
    pub per_class: BTreeMap<String, Score>,
    /// Keyed by sentence length bucket: `<5`, `5-10`, `>=10`.
    pub per_length_bucket: BTreeMap<String, Score>,
}

pub const LENGTH_BUCKETS: [&str; 3] = ["<5", "5-10", ">=10"];

pub fn length_bucket(len: usize) -> &'static str {
    match len {
        0..5 => LENGTH_BUCKETS[0],
        5..10 => LENGTH_BUCKETS[1],
        _ => LENGTH_BUCKETS[2],
    }
}

/// Exact span matching: a predicted span is a true positive iff a gold span
/// has the same start, end and label. Sentences pair up by id.
pub fn micro_f1(predictions: &[TaggedSentence], gold: &[TaggedSentence]) -> Result<F1Report, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::Argument(format!(
            "{} predictions for {} gold sentences",
            predictions.len(),
            gold.len()
        )));
    }
    let by_id: HashMap<&str, &TaggedSentence> = predictions.iter().map(|s| (s.id(), s)).collect();
    let mut total = SpanCounts::default();
    let mut classes: BTreeMap<String, SpanCounts> = BTreeMap::new();
    let mut buckets: BTreeMap<String, SpanCounts> = BTreeMap::new();
    for g in gold {
        let p = by_id
            .get(g.id())
            .ok_or_else(|| EvalError::Argument(format!("no prediction for sentence {:?}", g.id())))?;
        if p.len() != g.len() {
            return Err(EvalError::Argument(format!(
                "sentence {:?}: prediction has {} tokens, gold {}",
                g.id(),
                p.len(),
                g.len()
            )));
        }
        let gold_spans: BTreeSet<(usize, usize, String)> = decode_spans(g.tags()).into_iter().collect();
        let pred_spans: BTreeSet<(usize, usize, String)> = decode_spans(p.tags()).into_iter().collect();
        let mut sentence = SpanCounts::default();
        for span in &pred_spans {
            let class = classes.entry(span.2.clone()).or_default();
            if gold_spans.contains(span) {
                sentence.tp += 1;
                class.tp += 1;
            } else {
                sentence.fp += 1;
                class.fp += 1;
            }
        }
        for span in gold_spans.difference(&pred_spans) {
            sentence.fn_ += 1;
            classes.entry(span.2.clone()).or_default().fn_ += 1;
        }
        total.add(sentence);
        buckets.entry(length_bucket(g.len()).to_string()).or_default().add(sentence);
    }
    Ok(F1Report {
        micro_precision: total.precision(),
        micro_recall: total.recall(),
        micro_f1: total.f1(),
        counts: total,
        per_class: classes.into_iter().map(|(k, c)| (k, c.into())).collect(),
        per_length_bucket: buckets.into_iter().map(|(k, c)| (k, c.into())).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: &str, tags: &[&str]) -> TaggedSentence {
        let tokens: Vec<String> = (0..tags.len()).map(|i| format!("w{i}")).collect();
        TaggedSentence::new(id, tokens, tags.iter().map(|t| t.to_string()).collect()).unwrap()
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let gold = vec![s("1", &["B-PER", "I-PER", "O"]), s("2", &["O", "B-LOC"])];
        let r = micro_f1(&gold, &gold).unwrap();
        assert_eq!(r.micro_f1, 1.0);
        assert!(r.per_class.values().all(|c| c.f1 == 1.0));
        assert!(r.per_length_bucket.values().all(|c| c.f1 == 1.0));
        let none = vec![s("1", &["O", "O", "O"]), s("2", &["O", "O"])];
        let r = micro_f1(&none, &gold).unwrap();
        assert_eq!((r.micro_recall, r.micro_f1), (0.0, 0.0));
    }

    #[test]
    fn boundary_error() {
        // gold: PER(0,2), LOC(3,4); predicted: PER(0,1), LOC(3,4)
        let gold = vec![s("1", &["B-PER", "I-PER", "O", "B-LOC"])];
        let pred = vec![s("1", &["B-PER", "O", "O", "B-LOC"])];
        let r = micro_f1(&pred, &gold).unwrap();
        assert_eq!(r.counts, SpanCounts { tp: 1, fp: 1, fn_: 1 });
        assert_eq!(r.micro_f1, 0.5);
        assert_eq!(r.per_class["PER"].counts, SpanCounts { tp: 0, fp: 1, fn_: 1 });
        assert_eq!(r.per_class["LOC"].f1, 1.0);
    }

    #[test]
    fn pairs_by_id_and_checks_lengths() {
        let gold = vec![s("1", &["B-A"]), s("2", &["O", "B-A"])];
        let pred = vec![s("2", &["O", "B-A"]), s("1", &["B-A"])];
        assert_eq!(micro_f1(&pred, &gold).unwrap().micro_f1, 1.0);
        assert!(micro_f1(&[s("1", &["O", "O"]), s("2", &["O", "O"])], &gold).is_err());
        assert!(micro_f1(&[s("3", &["B-A"]), s("2", &["O", "B-A"])], &gold).is_err());
        assert!(micro_f1(&gold[..1], &gold).is_err());
    }

    #[test]
    fn buckets() {
        assert_eq!(length_bucket(4), "<5");
        assert_eq!(length_bucket(5), "5-10");
        assert_eq!(length_bucket(9), "5-10");
        assert_eq!(length_bucket(10), ">=10");
    }
}
