//! Augmentation quality and downstream scoring: diversity of augmentations
//! against their sources, span-level F1 with per-class and per-length
//! breakdowns, and mean perplexity from an external scorer.

mod diversity;
mod f1;
mod perplexity;

pub use diversity::{diversity, pairs_from_provenance, DiversityReport};
pub use f1::{length_bucket, micro_f1, F1Report, Score, SpanCounts, LENGTH_BUCKETS};
pub use perplexity::{perplexity, FileScorer, HttpScorer, PerplexityReport, Scorer, SkippedSentence};

use serde::{Deserialize, Serialize};
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("scorer: {0}")]
    Scorer(String),
    #[error("{0}")]
    Io(String),
}

/// Whatever evaluations were requested in one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<F1Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diversity: Option<DiversityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<PerplexityReport>,
}

impl EvaluationReport {
    /// Aligned plain-text tables.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(f1) = &self.f1 {
            let _ = writeln!(
                out,
                "{:<12} {:>9} {:>9} {:>9} {:>6} {:>6} {:>6}",
                "slice", "precision", "recall", "f1", "tp", "fp", "fn"
            );
            let micro = Score::from(f1.counts);
            let rows = std::iter::once(("micro".to_string(), micro))
                .chain(f1.per_class.iter().map(|(k, v)| (k.clone(), *v)))
                .chain(
                    LENGTH_BUCKETS
                        .iter()
                        .filter_map(|b| f1.per_length_bucket.get(*b).map(|v| (format!("len {b}"), *v))),
                );
            for (name, s) in rows {
                let _ = writeln!(
                    out,
                    "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>6} {:>6} {:>6}",
                    name, s.precision, s.recall, s.f1, s.counts.tp, s.counts.fp, s.counts.fn_
                );
            }
        }
        if let Some(d) = &self.diversity {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "{:<12} {:>9}", "diversity", "value");
            let _ = writeln!(out, "{:<12} {:>9.2}", "entity %", d.diversity_e);
            let _ = writeln!(out, "{:<12} {:>9.2}", "context %", d.diversity_n);
            let _ = writeln!(out, "{:<12} {:>9.2}", "length", d.diversity_l);
            let _ = writeln!(out, "{:<12} {:>9}", "pairs", d.pairs);
        }
        if let Some(p) = &self.perplexity {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "{:<12} {:>9.3}", "perplexity", p.mean);
            let _ = writeln!(out, "{:<12} {:>9}", "scored", p.scored);
            let _ = writeln!(out, "{:<12} {:>9}", "skipped", p.skipped.len());
        }
        out
    }
}
