use super::{DenoiserError, TrainingPair};
use crate::corpus::TaggedSentence;
use crate::seed::derived_rng;
use crate::templating::{linearized_original, render, RecipeError, RenderVocab, TemplateRecipe};

/// Training pairs plus the ids of sentences that contributed none.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub pairs: Vec<TrainingPair>,
    /// Sentences without entities; they have no keywords to select.
    pub skipped: Vec<String>,
}

/// One pair per entity-bearing sentence and pass: the input is a fresh
/// template (dynamic masking re-drawn each pass), the target the linearized
/// original.
pub fn build_training_pairs(
    corpus: &[TaggedSentence],
    recipe: &TemplateRecipe<'_>,
    vocab: &RenderVocab,
    passes: usize,
    seed: u64,
) -> Result<TrainingSet, DenoiserError> {
    if passes == 0 {
        return Err(DenoiserError::Argument("passes must be at least 1".into()));
    }
    let mut set = TrainingSet::default();
    for sentence in corpus {
        if !sentence.has_entities() {
            set.skipped.push(sentence.id().to_string());
            continue;
        }
        let original = linearized_original(sentence).map_err(RecipeError::from)?;
        let target = render(&original, vocab);
        for pass in 0..passes {
            let mut rng = derived_rng(seed, &["train", sentence.id(), &pass.to_string()]);
            let template =
                recipe.template(sentence, &mut rng)?.expect("entity-bearing sentence yields a template");
            set.pairs.push(TrainingPair { input: render(&template, vocab), target: target.clone() });
        }
    }
    if !set.skipped.is_empty() {
        log::info!("{} sentences without entities excluded from training", set.skipped.len());
    }
    Ok(set)
}
