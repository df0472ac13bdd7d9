//! End-to-end template construction for one sentence: keyword selection,
//! selective masking, linearization and dynamic masking.

use super::{dynamic_mask, linearize, selective_mask, DynamicMaskPolicy, Template, TemplateError};
use crate::attention::{
    aggregate, select_keywords, select_keywords_random, AttentionError, AttentionProvider, KeywordFilter,
    KeywordSet,
};
use crate::corpus::{extract_entities, TaggedSentence};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Where keywords come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordStrategy {
    /// Most-attended tokens per entity.
    #[default]
    Attention,
    /// Same count, drawn uniformly.
    Random,
    /// No keywords: templates hold only linearized entities.
    None,
}

impl std::str::FromStr for KeywordStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "attention" => Ok(Self::Attention),
            "random" => Ok(Self::Random),
            "none" => Ok(Self::None),
            other => Err(format!("unknown keyword strategy {other:?} (attention, random, none)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecipeError {
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Parameters and providers for building templates.
#[derive(Clone)]
pub struct TemplateRecipe<'a> {
    pub strategy: KeywordStrategy,
    /// Keyword rate per entity, in [0, 1].
    pub p: f64,
    /// Number of final attention layers averaged.
    pub layers: usize,
    pub filter: KeywordFilter,
    pub mask_policy: DynamicMaskPolicy,
    pub attention: Option<&'a dyn AttentionProvider>,
}

impl<'a> TemplateRecipe<'a> {
    pub fn keywords<R: Rng + ?Sized>(
        &self,
        sentence: &TaggedSentence,
        rng: &mut R,
    ) -> Result<KeywordSet, RecipeError> {
        match self.strategy {
            KeywordStrategy::None => Ok(KeywordSet::default()),
            KeywordStrategy::Random => Ok(select_keywords_random(sentence, self.p, &self.filter, rng)?),
            KeywordStrategy::Attention => {
                let provider = self.attention.ok_or_else(|| {
                    AttentionError::Argument("attention strategy needs an attention provider".into())
                })?;
                let map = provider.attention(sentence)?;
                if map.len() != sentence.len() {
                    return Err(AttentionError::Invalid {
                        id: sentence.id().to_string(),
                        message: format!("map covers {} tokens, sentence has {}", map.len(), sentence.len()),
                    }
                    .into());
                }
                let layers = self.layers.min(map.n_layers()).max(1);
                if layers != self.layers {
                    log::debug!("{}: map has {} layers, averaging {layers}", sentence.id(), map.n_layers());
                }
                let matrix = aggregate(&map, layers)?;
                Ok(select_keywords(sentence, matrix.view(), self.p, &self.filter)?)
            }
        }
    }

    /// Steps up to and including linearization. `None` for sentences without
    /// entities, which have no keyword definition.
    pub fn linearized<R: Rng + ?Sized>(
        &self,
        sentence: &TaggedSentence,
        rng: &mut R,
    ) -> Result<Option<Template>, RecipeError> {
        if !sentence.has_entities() {
            return Ok(None);
        }
        let keywords = self.keywords(sentence, rng)?;
        let masked = selective_mask(sentence, &keywords);
        Ok(Some(linearize(&masked, &extract_entities(sentence))?))
    }

    /// All four steps.
    pub fn template<R: Rng + ?Sized>(
        &self,
        sentence: &TaggedSentence,
        rng: &mut R,
    ) -> Result<Option<Template>, RecipeError> {
        Ok(self.linearized(sentence, rng)?.map(|t| dynamic_mask(&t, &self.mask_policy, rng)))
    }
}

/// The sentence itself with label markers: the reconstruction target.
pub fn linearized_original(sentence: &TaggedSentence) -> Result<Template, TemplateError> {
    let all_context = KeywordSet {
        indices: (0..sentence.len()).filter(|&i| !sentence.is_entity_token(i)).collect(),
        per_entity: Default::default(),
    };
    linearize(&selective_mask(sentence, &all_context), &extract_entities(sentence))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{AttentionMap, InMemoryAttention};
    use crate::seed::rng_from_seed;
    use crate::templating::{delinearize, render, RenderVocab, SigmaRule};

    fn sentence() -> TaggedSentence {
        TaggedSentence::from_strs(
            "s1",
            &["yesterday", "john", "smith", "visited", "the", "old", "town"],
            &["O", "B-PER", "I-PER", "O", "O", "O", "O"],
        )
        .unwrap()
    }

    fn recipe<'a>(
        strategy: KeywordStrategy,
        attention: Option<&'a dyn AttentionProvider>,
    ) -> TemplateRecipe<'a> {
        TemplateRecipe {
            strategy,
            p: 0.3,
            layers: 4,
            filter: KeywordFilter::english(),
            mask_policy: DynamicMaskPolicy { mu: 0.0, sigma: SigmaRule::Fixed(0.0) },
            attention,
        }
    }

    #[test]
    fn attention_strategy_uses_provider() {
        let s = sentence();
        // entity rows attend to "visited" (3) and "town" (6)
        let mut data = vec![0.01f32; 7 * 7];
        for row in [1, 2] {
            data[row * 7 + 3] = 0.5;
            data[row * 7 + 6] = 0.4;
        }
        let store: InMemoryAttention =
            [AttentionMap::from_flat("s1", 1, 1, 7, data).unwrap()].into_iter().collect();
        let r = recipe(KeywordStrategy::Attention, Some(&store));
        let mut rng = rng_from_seed(0);
        let t = r.template(&s, &mut rng).unwrap().unwrap();
        assert_eq!(
            render(&t, &RenderVocab::default()),
            ["<mask>", "PER", "john", "smith", "PER", "visited", "<mask>", "town"]
        );
    }

    #[test]
    fn missing_attention_names_sentence() {
        let store = InMemoryAttention::new();
        let r = recipe(KeywordStrategy::Attention, Some(&store));
        let mut rng = rng_from_seed(0);
        let err = r.template(&sentence(), &mut rng).unwrap_err();
        assert!(err.to_string().contains("s1"), "{err}");
    }

    #[test]
    fn wrong_length_map() {
        let store: InMemoryAttention =
            [AttentionMap::from_flat("s1", 1, 1, 2, vec![0.0; 4]).unwrap()].into_iter().collect();
        let r = recipe(KeywordStrategy::Attention, Some(&store));
        assert!(r.keywords(&sentence(), &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn none_strategy_gives_entity_only_template() {
        let r = recipe(KeywordStrategy::None, None);
        let t = r.template(&sentence(), &mut rng_from_seed(0)).unwrap().unwrap();
        assert_eq!(render(&t, &RenderVocab::default()), ["<mask>", "PER", "john", "smith", "PER", "<mask>"]);
    }

    #[test]
    fn entity_free_sentences_have_no_template() {
        let s = TaggedSentence::from_strs("z", &["a"], &["O"]).unwrap();
        let r = recipe(KeywordStrategy::Random, None);
        assert!(r.template(&s, &mut rng_from_seed(0)).unwrap().is_none());
    }

    #[test]
    fn original_round_trips() {
        let s = sentence();
        let v = RenderVocab::default();
        let t = linearized_original(&s).unwrap();
        let labels = s.entity_labels();
        assert_eq!(delinearize("s1", &render(&t, &v), &labels, &v).unwrap(), s);
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("random".parse::<KeywordStrategy>().unwrap(), KeywordStrategy::Random);
        assert!("bogus".parse::<KeywordStrategy>().is_err());
    }
}
