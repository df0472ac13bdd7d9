use super::EvalError;
use crate::corpus::TaggedSentence;
use crate::http::{HttpOptions, JsonClient};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

/// Language-model perplexity of a sentence's text (tokens joined by single
/// spaces).
pub trait Scorer: Send + Sync {
    fn score(&self, text: &str) -> Result<f64, EvalError>;
}

/// `POST /score {"text"}` answering `{"perplexity"}`.
#[derive(Debug, Clone)]
pub struct HttpScorer {
    client: JsonClient,
}

impl HttpScorer {
    pub fn new(base_url: impl Into<String>, options: HttpOptions) -> Self {
        Self { client: JsonClient::new(base_url, options) }
    }
}

#[derive(Serialize)]
struct ScoreBody<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct ScoreReply {
    perplexity: f64,
}

impl Scorer for HttpScorer {
    fn score(&self, text: &str) -> Result<f64, EvalError> {
        let reply: ScoreReply =
            self.client.post("score", &ScoreBody { text }).map_err(|e| EvalError::Scorer(e.to_string()))?;
        Ok(reply.perplexity)
    }
}

/// Precomputed scores from JSON lines `{"text", "perplexity"}`.
#[derive(Debug, Clone, Default)]
pub struct FileScorer {
    scores: HashMap<String, f64>,
}

#[derive(Deserialize)]
struct ScoreLine {
    text: String,
    perplexity: f64,
}

impl FileScorer {
    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut scores = HashMap::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| EvalError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScoreLine = serde_json::from_str(&line)
                .map_err(|e| EvalError::Io(format!("score line {}: {e}", n + 1)))?;
            scores.insert(entry.text, entry.perplexity);
        }
        Ok(Self { scores })
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let file =
            std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(std::io::BufReader::new(file))
    }
}

impl Scorer for FileScorer {
    fn score(&self, text: &str) -> Result<f64, EvalError> {
        self.scores.get(text).copied().ok_or_else(|| EvalError::Scorer(format!("no score for {text:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSentence {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityReport {
    pub mean: f64,
    pub scored: usize,
    pub skipped: Vec<SkippedSentence>,
}

/// Mean perplexity over the sentences the scorer could handle. Failures and
/// non-finite scores are skipped and listed.
pub fn perplexity(sentences: &[TaggedSentence], scorer: &dyn Scorer) -> Result<PerplexityReport, EvalError> {
    let results: Vec<Result<f64, EvalError>> = sentences
        .par_iter()
        .map(|s| {
            let value = scorer.score(&s.tokens().join(" "))?;
            if value.is_finite() && value >= 0.0 {
                Ok(value)
            } else {
                Err(EvalError::Scorer(format!("invalid perplexity {value}")))
            }
        })
        .collect();
    let mut sum = 0.0;
    let mut scored = 0;
    let mut skipped = Vec::new();
    for (s, r) in sentences.iter().zip(results) {
        match r {
            Ok(v) => {
                sum += v;
                scored += 1;
            }
            Err(e) => skipped.push(SkippedSentence { id: s.id().to_string(), error: e.to_string() }),
        }
    }
    if scored == 0 {
        return Err(EvalError::Scorer(format!("all {} sentences skipped", sentences.len())));
    }
    Ok(PerplexityReport { mean: sum / scored as f64, scored, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::MockServer;

    struct Fixed(Vec<(&'static str, f64)>);

    impl Scorer for Fixed {
        fn score(&self, text: &str) -> Result<f64, EvalError> {
            self.0
                .iter()
                .find(|(t, _)| *t == text)
                .map(|(_, v)| *v)
                .ok_or_else(|| EvalError::Scorer("unknown".into()))
        }
    }

    fn sentences(texts: &[&str]) -> Vec<TaggedSentence> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let tokens: Vec<&str> = t.split(' ').collect();
                TaggedSentence::from_strs(&i.to_string(), &tokens, &vec!["O"; tokens.len()]).unwrap()
            })
            .collect()
    }

    #[test]
    fn mean_and_skips() {
        let scorer = Fixed(vec![("a b", 2.0), ("c", 4.0)]);
        let r = perplexity(&sentences(&["a b", "c"]), &scorer).unwrap();
        assert_eq!(r.mean, 3.0);
        let r = perplexity(&sentences(&["a b", "zzz"]), &scorer).unwrap();
        assert_eq!((r.mean, r.scored, r.skipped.len()), (2.0, 1, 1));
        assert_eq!(r.skipped[0].id, "1");
        assert!(perplexity(&sentences(&["zzz"]), &scorer).is_err());
    }

    #[test]
    fn http_scorer() {
        let server = MockServer::start(|r| {
            assert_eq!(r.path, "/score");
            let body: serde_json::Value = serde_json::from_str(&r.body).unwrap();
            let n = body["text"].as_str().unwrap().len();
            (200, format!(r#"{{"perplexity": {n}}}"#))
        });
        let scorer = HttpScorer::new(server.url(), HttpOptions { retries: 0, ..Default::default() });
        let r = perplexity(&sentences(&["ab", "abcd"]), &scorer).unwrap();
        assert_eq!(r.mean, 3.0);
    }

    #[test]
    fn file_scorer() {
        let text = "{\"text\": \"a b\", \"perplexity\": 1.0}\n\n{\"text\": \"c\", \"perplexity\": 1.0}\n";
        let scorer = FileScorer::from_jsonl(text.as_bytes()).unwrap();
        assert_eq!(perplexity(&sentences(&["a b", "c"]), &scorer).unwrap().mean, 1.0);
    }
}
