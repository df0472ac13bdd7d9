//! The seq2seq denoiser contract, training-pair construction and two
//! backends: an in-process nearest-neighbour lookup and an HTTP service.

mod lookup;
mod service;
mod training;

pub use lookup::LookupDenoiser;
pub use service::{ServiceDenoiser, ServiceOptions};
pub use training::{build_training_pairs, TrainingSet};

use crate::http::HttpError;
use crate::templating::RecipeError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DenoiserError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("denoiser has not been fine-tuned")]
    NotTrained,
    #[error("denoiser backend returned HTTP {status}: {body}")]
    Backend { status: u16, body: String },
    #[error("fine-tuning job {job_id} failed: {message}")]
    FineTune { job_id: String, message: String },
    #[error(transparent)]
    Http(HttpError),
    #[error(transparent)]
    Template(#[from] RecipeError),
}

impl From<HttpError> for DenoiserError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Status { status, body, .. } => DenoiserError::Backend { status, body },
            other => DenoiserError::Http(other),
        }
    }
}

/// One (corrupted template, original) example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub input: Vec<String>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FineTuneParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for FineTuneParams {
    fn default() -> Self {
        Self { epochs: 10, learning_rate: 1e-5, batch_size: 32 }
    }
}

impl FineTuneParams {
    pub fn validate(&self) -> Result<(), DenoiserError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(DenoiserError::Argument("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(DenoiserError::Argument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Decoding request for one rendered template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    #[serde(rename = "tokens")]
    pub template: Vec<String>,
    pub top_k: usize,
    pub num_beams: usize,
    pub max_length: usize,
    pub seed: u64,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), DenoiserError> {
        if self.template.is_empty() {
            return Err(DenoiserError::Argument("empty template".into()));
        }
        if self.top_k == 0 || self.num_beams == 0 || self.max_length == 0 {
            return Err(DenoiserError::Argument("top_k, num_beams and max_length must be positive".into()));
        }
        Ok(())
    }
}

/// A model that reconstructs linearized sentences from templates.
pub trait Denoiser: Send + Sync {
    fn fine_tune(&mut self, pairs: &[TrainingPair], params: &FineTuneParams) -> Result<(), DenoiserError>;

    /// Output tokens for one template. Must be deterministic in the request
    /// (including its seed).
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, DenoiserError>;
}
