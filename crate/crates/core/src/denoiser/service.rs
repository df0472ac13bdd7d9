use super::{Denoiser, DenoiserError, FineTuneParams, GenerationRequest, TrainingPair};
use crate::http::{HttpOptions, JsonClient};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub http: HttpOptions,
    pub poll_interval: Duration,
    /// Give up waiting for a fine-tuning job after this long.
    pub max_wait: Duration,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            http: HttpOptions::default(),
            poll_interval: Duration::from_secs(5),
            max_wait: Duration::from_secs(24 * 3600),
        }
    }
}

/// A denoiser hosted behind HTTP.
///
/// - `POST /finetune {pairs, hyperparameters}` answers `{job_id}`;
/// - `GET /finetune/<job_id>` answers `{status, error?}` where status is one
///   of `queued`, `running`, `succeeded`, `failed`;
/// - `POST /generate {tokens, top_k, num_beams, max_length, seed}` answers
///   `{tokens}`.
#[derive(Debug, Clone)]
pub struct ServiceDenoiser {
    client: JsonClient,
    options: ServiceOptions,
    job_id: Option<String>,
}

#[derive(Serialize)]
struct FineTuneBody<'a> {
    pairs: &'a [TrainingPair],
    hyperparameters: &'a FineTuneParams,
}

#[derive(Deserialize)]
struct JobCreated {
    job_id: String,
}

#[derive(Deserialize)]
struct JobStatus {
    status: String,
    #[serde(default)]
    error: Option<String>,
}

#[derive(Deserialize)]
struct Generated {
    tokens: Vec<String>,
}

impl ServiceDenoiser {
    pub fn new(base_url: impl Into<String>, options: ServiceOptions) -> Self {
        Self { client: JsonClient::new(base_url, options.http.clone()), options, job_id: None }
    }

    /// Use a model fine-tuned earlier instead of training again.
    pub fn with_job(mut self, job_id: impl Into<String>) -> Self {
        self.job_id = Some(job_id.into());
        self
    }

    pub fn job_id(&self) -> Option<&str> {
        self.job_id.as_deref()
    }

    fn wait(&self, job_id: &str) -> Result<(), DenoiserError> {
        let started = Instant::now();
        loop {
            let s: JobStatus = self.client.get(&format!("finetune/{job_id}"))?;
            match s.status.as_str() {
                "succeeded" => return Ok(()),
                "failed" => {
                    return Err(DenoiserError::FineTune {
                        job_id: job_id.to_string(),
                        message: s.error.unwrap_or_else(|| "no message".into()),
                    })
                }
                "queued" | "running" => {}
                other => {
                    return Err(DenoiserError::FineTune {
                        job_id: job_id.to_string(),
                        message: format!("unknown status {other:?}"),
                    })
                }
            }
            if started.elapsed() >= self.options.max_wait {
                return Err(DenoiserError::FineTune {
                    job_id: job_id.to_string(),
                    message: format!("still {} after {:?}", s.status, self.options.max_wait),
                });
            }
            log::debug!("fine-tuning job {job_id} is {}", s.status);
            std::thread::sleep(self.options.poll_interval);
        }
    }
}

impl Denoiser for ServiceDenoiser {
    fn fine_tune(&mut self, pairs: &[TrainingPair], params: &FineTuneParams) -> Result<(), DenoiserError> {
        params.validate()?;
        if pairs.is_empty() {
            return Err(DenoiserError::Argument("no training pairs".into()));
        }
        let created: JobCreated =
            self.client.post("finetune", &FineTuneBody { pairs, hyperparameters: params })?;
        log::info!("submitted fine-tuning job {} with {} pairs", created.job_id, pairs.len());
        self.wait(&created.job_id)?;
        self.job_id = Some(created.job_id);
        Ok(())
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, DenoiserError> {
        request.validate()?;
        if self.job_id.is_none() {
            return Err(DenoiserError::NotTrained);
        }
        let out: Generated = self.client.post("generate", request)?;
        Ok(out.tokens)
    }
}
