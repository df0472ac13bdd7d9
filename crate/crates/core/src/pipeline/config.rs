use super::PipelineError;
use crate::attention::{AttentionProvider, KeywordFilter};
use crate::corpus::DevSizing;
use crate::denoiser::FineTuneParams;
use crate::mixner::MixPolicy;
use crate::templating::{DynamicMaskPolicy, KeywordStrategy, RenderVocab, TemplateRecipe};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Decoding settings sent with every generation request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub top_k: usize,
    pub num_beams: usize,
    /// Token cap as a multiple of the rendered template length.
    pub max_length_factor: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { top_k: 50, num_beams: 4, max_length_factor: 2.5 }
    }
}

impl GenerationConfig {
    pub fn max_length(&self, template_len: usize) -> usize {
        ((self.max_length_factor * template_len as f64).ceil() as usize).max(1)
    }
}

/// Every tunable of a run. Loaded from JSON; missing fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Share of a sentence's non-entity tokens kept per entity.
    pub keyword_rate: f64,
    /// Final attention layers averaged for keyword selection.
    pub attention_layers: usize,
    pub keyword_strategy: KeywordStrategy,
    /// `"en"`, `"none"`, or a path to a one-word-per-line stopword file.
    pub stopwords: String,
    pub filter_punctuation: bool,
    pub mask: DynamicMaskPolicy,
    pub rounds: usize,
    pub mixner: bool,
    pub mix: MixPolicy,
    pub generation: GenerationConfig,
    pub fine_tune: FineTuneParams,
    /// Templates drawn per training sentence; defaults to the epoch count so
    /// that masking is re-drawn for every epoch.
    pub training_passes: Option<usize>,
    pub vocab: RenderVocab,
    pub seed: u64,
    pub lwtr_probability: f64,
    pub split_sizes: Vec<usize>,
    pub dev_sizing: DevSizing,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            keyword_rate: 0.3,
            attention_layers: 4,
            keyword_strategy: KeywordStrategy::Attention,
            stopwords: "en".into(),
            filter_punctuation: true,
            mask: DynamicMaskPolicy::default(),
            rounds: 5,
            mixner: true,
            mix: MixPolicy::default(),
            generation: GenerationConfig::default(),
            fine_tune: FineTuneParams::default(),
            training_passes: None,
            vocab: RenderVocab::default(),
            seed: 42,
            lwtr_probability: 0.5,
            split_sizes: vec![100, 200, 500, 1000],
            dev_sizing: DevSizing::Proportional,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let config: Self = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(0.0..=1.0).contains(&self.keyword_rate) {
            return bad(format!("keyword_rate {} outside [0, 1]", self.keyword_rate));
        }
        if self.attention_layers == 0 {
            return bad("attention_layers must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.mask.mu) {
            return bad(format!("mask.mu {} outside [0, 1]", self.mask.mu));
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if self.training_passes == Some(0) {
            return bad("training_passes must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.lwtr_probability) {
            return bad(format!("lwtr_probability {} outside [0, 1]", self.lwtr_probability));
        }
        let g = &self.generation;
        if g.top_k == 0 || g.num_beams == 0 || g.max_length_factor.is_nan() || g.max_length_factor <= 0.0 {
            return bad("generation top_k, num_beams and max_length_factor must be positive".into());
        }
        if self.vocab.mask.is_empty() || self.vocab.mask.chars().any(char::is_whitespace) {
            return bad(format!("mask literal {:?} must be one non-empty token", self.vocab.mask));
        }
        self.mix.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.fine_tune.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn passes(&self) -> usize {
        self.training_passes.unwrap_or(self.fine_tune.epochs)
    }

    pub fn keyword_filter(&self) -> Result<KeywordFilter, PipelineError> {
        let filter = match self.stopwords.as_str() {
            "en" => KeywordFilter::english(),
            "none" => KeywordFilter::none(),
            path => KeywordFilter::from_stopword_file(Path::new(path), true)
                .map_err(|e| PipelineError::Config(format!("stopwords {path}: {e}")))?,
        };
        Ok(filter.with_punctuation(self.filter_punctuation))
    }

    pub fn recipe<'a>(
        &self,
        attention: Option<&'a dyn AttentionProvider>,
    ) -> Result<TemplateRecipe<'a>, PipelineError> {
        if self.keyword_strategy == KeywordStrategy::Attention && attention.is_none() {
            return Err(PipelineError::Config("keyword_strategy \"attention\" needs attention maps".into()));
        }
        Ok(TemplateRecipe {
            strategy: self.keyword_strategy,
            p: self.keyword_rate,
            layers: self.attention_layers,
            filter: self.keyword_filter()?,
            mask_policy: self.mask,
            attention,
        })
    }
}
