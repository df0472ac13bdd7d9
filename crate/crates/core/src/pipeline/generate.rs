use super::{PipelineConfig, PipelineError};
use crate::corpus::{label_set, TaggedSentence};
use crate::denoiser::{Denoiser, GenerationRequest};
use crate::mixner::{mix, NeighborTable};
use crate::seed::derived_rng;
use crate::templating::{delinearize, dynamic_mask, render, MalformedError, Template, TemplateRecipe};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Kept,
    Duplicate,
    Malformed,
    Failed,
}

/// What came back for one generation request.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Parsed(TaggedSentence),
    Malformed(MalformedError),
    /// The backend call itself failed.
    Failed(String),
}

/// One (sentence, round) generation and its fate.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationRecord {
    pub source_id: String,
    /// 1-based.
    pub round: usize,
    pub used_mixner: bool,
    pub partner_id: Option<String>,
    pub template: Template,
    pub raw_tokens: Vec<String>,
    pub outcome: Outcome,
    pub disposition: Disposition,
}

impl AugmentationRecord {
    pub fn parsed(&self) -> Option<&TaggedSentence> {
        match &self.outcome {
            Outcome::Parsed(s) => Some(s),
            _ => None,
        }
    }
}

/// Everything generation reads besides the configuration.
#[derive(Clone, Copy)]
pub struct GenerationInputs<'a> {
    pub corpus: &'a [TaggedSentence],
    pub recipe: &'a TemplateRecipe<'a>,
    pub denoiser: &'a dyn Denoiser,
    /// Partner candidates; mixing is off without them.
    pub neighbors: Option<&'a NeighborTable>,
}

/// Generated sentence id for `source` in `round`.
pub(crate) fn augmented_id(source: &str, round: usize) -> String {
    format!("{source}-aug{round}")
}

/// One record per entity-bearing sentence and round, in (sentence, round)
/// order. Every record draws from its own generator seeded by the run seed,
/// the sentence id and the round, so the output does not depend on
/// `workers`.
pub fn run_generation(
    inputs: GenerationInputs<'_>,
    config: &PipelineConfig,
    workers: usize,
) -> Result<Vec<AugmentationRecord>, PipelineError> {
    config.validate()?;
    let labels = label_set(inputs.corpus);
    let by_id: HashMap<&str, &TaggedSentence> = inputs.corpus.iter().map(|s| (s.id(), s)).collect();
    let neighbors = inputs.neighbors.filter(|_| config.mixner);
    if config.mixner && neighbors.is_none() {
        log::info!("no partner candidates; generating without mixing");
    }
    let tasks: Vec<(&TaggedSentence, usize)> = inputs
        .corpus
        .iter()
        .filter(|s| s.has_entities())
        .flat_map(|s| (1..=config.rounds).map(move |r| (s, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    let job = |&(sentence, round): &(&TaggedSentence, usize)| {
        generate_one(sentence, round, &inputs, neighbors, &by_id, &labels, config)
    };
    let records: Vec<AugmentationRecord> =
        pool.install(|| tasks.par_iter().map(job).collect::<Result<_, _>>())?;
    Ok(records)
}

fn generate_one(
    sentence: &TaggedSentence,
    round: usize,
    inputs: &GenerationInputs<'_>,
    neighbors: Option<&NeighborTable>,
    by_id: &HashMap<&str, &TaggedSentence>,
    labels: &BTreeSet<String>,
    config: &PipelineConfig,
) -> Result<AugmentationRecord, PipelineError> {
    let mut rng = derived_rng(config.seed, &["generate", sentence.id(), &round.to_string()]);
    let recipe = inputs.recipe;
    let own = recipe
        .linearized(sentence, &mut rng)?
        .ok_or_else(|| PipelineError::Data(format!("sentence {:?} has no entities", sentence.id())))?;

    let mut partner_id = None;
    let linearized = match neighbors {
        Some(table) if config.mix.admits(config.mix.sample_gamma(&mut rng)) => {
            let pid = table.sample(sentence.id(), &mut rng)?;
            let partner = by_id.get(pid.as_str()).copied().ok_or_else(|| {
                PipelineError::Data(format!("partner {pid:?} of {:?} is not in the corpus", sentence.id()))
            })?;
            let other = recipe
                .linearized(partner, &mut rng)?
                .ok_or_else(|| PipelineError::Data(format!("partner {pid:?} has no entities")))?;
            partner_id = Some(pid);
            mix(&own, &other)
        }
        _ => own,
    };
    let template = dynamic_mask(&linearized, &recipe.mask_policy, &mut rng);

    let tokens = render(&template, &config.vocab);
    let request = GenerationRequest {
        max_length: config.generation.max_length(tokens.len()),
        template: tokens,
        top_k: config.generation.top_k,
        num_beams: config.generation.num_beams,
        seed: rng.random(),
    };
    let (raw_tokens, outcome) = match inputs.denoiser.generate(&request) {
        Ok(raw) => {
            let outcome = match delinearize(&augmented_id(sentence.id(), round), &raw, labels, &config.vocab)
            {
                Ok(s) => Outcome::Parsed(s),
                Err(e) => Outcome::Malformed(e),
            };
            (raw, outcome)
        }
        Err(e) => {
            log::warn!("generation for {} round {round} failed: {e}", sentence.id());
            (Vec::new(), Outcome::Failed(e.to_string()))
        }
    };
    let disposition = match outcome {
        Outcome::Parsed(_) => Disposition::Kept,
        Outcome::Malformed(_) => Disposition::Malformed,
        Outcome::Failed(_) => Disposition::Failed,
    };
    Ok(AugmentationRecord {
        source_id: sentence.id().to_string(),
        round,
        used_mixner: partner_id.is_some(),
        partner_id,
        template,
        raw_tokens,
        outcome,
        disposition,
    })
}
