//! Blocking JSON-over-HTTP client shared by the service adapters (attention
//! provider, embedder, denoiser, perplexity scorer).

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HttpError {
    #[error("transport error calling {url}: {message}")]
    Transport { url: String, message: String },
    #[error("{url} returned HTTP {status}: {body}")]
    Status { url: String, status: u16, body: String },
    #[error("could not decode response from {url}: {message}")]
    Decode { url: String, message: String },
}

impl HttpError {
    fn is_transient(&self) -> bool {
        match self {
            HttpError::Transport { .. } => true,
            HttpError::Status { status, .. } => *status >= 500 || matches!(status, 408 | 429),
            HttpError::Decode { .. } => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpOptions {
    pub timeout: Duration,
    /// Attempts after the first one, for transient failures only.
    pub retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff: Duration,
}

impl Default for HttpOptions {
    fn default() -> Self {
        Self { timeout: Duration::from_secs(60), retries: 3, backoff: Duration::from_millis(250) }
    }
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    base_url: String,
    options: HttpOptions,
}

impl JsonClient {
    pub fn new(base_url: impl Into<String>, options: HttpOptions) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(options.timeout))
            .http_status_as_error(false)
            .build();
        Self { agent: config.into(), base_url: base_url.into().trim_end_matches('/').to_string(), options }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, HttpError> {
        let url = self.url(path);
        let payload = serde_json::to_string(body)
            .map_err(|e| HttpError::Decode { url: url.clone(), message: e.to_string() })?;
        self.with_retries(&url, || {
            self.agent.post(&url).header("content-type", "application/json").send(payload.as_str())
        })
    }

    pub fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, HttpError> {
        let url = self.url(path);
        self.with_retries(&url, || self.agent.get(&url).call())
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url, path.trim_start_matches('/'))
    }

    fn with_retries<T, F>(&self, url: &str, mut call: F) -> Result<T, HttpError>
    where
        T: DeserializeOwned,
        F: FnMut() -> Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    {
        let mut delay = self.options.backoff;
        let mut attempt = 0;
        loop {
            let result = call()
                .map_err(|e| HttpError::Transport { url: url.to_string(), message: e.to_string() })
                .and_then(|resp| decode(url, resp));
            match result {
                Err(e) if e.is_transient() && attempt < self.options.retries => {
                    log::warn!("{e}; retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

fn decode<T: DeserializeOwned>(
    url: &str,
    mut resp: ureq::http::Response<ureq::Body>,
) -> Result<T, HttpError> {
    let status = resp.status().as_u16();
    let body = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| HttpError::Transport { url: url.to_string(), message: e.to_string() })?;
    if !(200..300).contains(&status) {
        return Err(HttpError::Status { url: url.to_string(), status, body });
    }
    serde_json::from_str(&body)
        .map_err(|e| HttpError::Decode { url: url.to_string(), message: e.to_string() })
}
