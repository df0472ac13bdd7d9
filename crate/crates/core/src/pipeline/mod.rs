//! The augmentation loop: templates per sentence and round, optional mixing,
//! generation, post-processing into a merged corpus, and the label-wise
//! token replacement baseline.

mod config;
mod generate;
mod lwtr;
mod postprocess;

pub use config::{GenerationConfig, PipelineConfig};
pub use generate::{run_generation, AugmentationRecord, Disposition, GenerationInputs, Outcome};
pub use lwtr::{baseline_lwtr, label_inventory};
pub use postprocess::{post_process, write_report, Augmented, DispositionCounts};

use crate::corpus::CorpusError;
use crate::denoiser::DenoiserError;
use crate::mixner::MixError;
use crate::templating::RecipeError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Recipe(#[from] RecipeError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Denoiser(#[from] DenoiserError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{0}")]
    Io(String),
}
