use super::{Denoiser, DenoiserError, FineTuneParams, GenerationRequest, TrainingPair};
use std::collections::HashMap;

/// Returns the training target whose input shares the most tokens with the
/// request (multiset overlap). Ties go to the lexicographically smallest
/// target. Deterministic and dependency-free; used for tests and dry runs.
#[derive(Debug, Clone, Default)]
pub struct LookupDenoiser {
    entries: Vec<Entry>,
}

#[derive(Debug, Clone)]
struct Entry {
    counts: HashMap<String, usize>,
    target: Vec<String>,
}

fn counts<S: AsRef<str>>(tokens: &[S]) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t.as_ref().to_string()).or_insert(0) += 1;
    }
    m
}

impl LookupDenoiser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Denoiser for LookupDenoiser {
    fn fine_tune(&mut self, pairs: &[TrainingPair], params: &FineTuneParams) -> Result<(), DenoiserError> {
        params.validate()?;
        if pairs.is_empty() {
            return Err(DenoiserError::Argument("no training pairs".into()));
        }
        self.entries =
            pairs.iter().map(|p| Entry { counts: counts(&p.input), target: p.target.clone() }).collect();
        Ok(())
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, DenoiserError> {
        request.validate()?;
        let query = counts(&request.template);
        let overlap = |e: &Entry| -> usize {
            query.iter().map(|(t, &n)| n.min(e.counts.get(t).copied().unwrap_or(0))).sum()
        };
        let best = self
            .entries
            .iter()
            .map(|e| (overlap(e), e))
            .max_by(|(a, ea), (b, eb)| a.cmp(b).then_with(|| eb.target.cmp(&ea.target)))
            .ok_or(DenoiserError::NotTrained)?;
        Ok(best.1.target.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(input: &str, target: &str) -> TrainingPair {
        TrainingPair {
            input: input.split(' ').map(String::from).collect(),
            target: target.split(' ').map(String::from).collect(),
        }
    }

    fn request(tokens: &str) -> GenerationRequest {
        GenerationRequest {
            template: tokens.split(' ').map(String::from).collect(),
            top_k: 1,
            num_beams: 1,
            max_length: 20,
            seed: 0,
        }
    }

    #[test]
    fn untrained_errors() {
        assert_eq!(LookupDenoiser::new().generate(&request("a")), Err(DenoiserError::NotTrained));
    }

    #[test]
    fn picks_largest_overlap() {
        let mut d = LookupDenoiser::new();
        d.fine_tune(
            &[pair("<mask> PER ann PER", "t1"), pair("<mask> LOC rome LOC went", "t2")],
            &FineTuneParams::default(),
        )
        .unwrap();
        assert_eq!(d.generate(&request("LOC rome LOC")).unwrap(), ["t2"]);
        assert_eq!(d.generate(&request("PER ann PER")).unwrap(), ["t1"]);
    }

    #[test]
    fn multiset_overlap_and_ties() {
        let mut d = LookupDenoiser::new();
        d.fine_tune(&[pair("a b", "zz"), pair("a a", "yy"), pair("a b", "aa")], &FineTuneParams::default())
            .unwrap();
        // "a a" overlaps the second entry twice, the others once
        assert_eq!(d.generate(&request("a a")).unwrap(), ["yy"]);
        // "a b": two entries tie at 2, smallest target wins
        assert_eq!(d.generate(&request("a b")).unwrap(), ["aa"]);
    }
}
