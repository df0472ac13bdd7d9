//! Template mixing: pair a sentence with one of its most similar neighbours
//! and concatenate their linearized templates, gated by a Gaussian draw.

use crate::corpus::TaggedSentence;
use crate::http::{HttpError, HttpOptions, JsonClient};
use crate::templating::{Origin, Template, TemplateElement};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("retrieval: {0}")]
    Retrieval(String),
    #[error("embeddings: {0}")]
    Io(String),
    #[error(transparent)]
    Http(#[from] HttpError),
}

/// Cosine similarity, clamped to [-1, 1] against rounding.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, MixError> {
    if a.len() != b.len() {
        return Err(MixError::Argument(format!("dimension mismatch: {} vs {}", a.len(), b.len())));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(MixError::Argument("zero-norm vector".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sentence embeddings of a fixed dimension, keyed by sentence id.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingIndex {
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    position: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingLine {
    id: String,
    vector: Vec<f64>,
}

impl EmbeddingIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.position.contains_key(id)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, id: &str) -> Option<&[f64]> {
        self.position.get(id).map(|&i| self.vectors[i].as_slice())
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<(), MixError> {
        let id = id.into();
        if vector.is_empty() {
            return Err(MixError::Argument(format!("{id:?}: empty vector")));
        }
        if self.ids.is_empty() {
            self.dim = vector.len();
        } else if vector.len() != self.dim {
            return Err(MixError::Argument(format!(
                "{id:?}: dimension {} but the index holds {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(MixError::Argument(format!("{id:?}: non-finite component")));
        }
        if norm(&vector) == 0.0 {
            return Err(MixError::Argument(format!("{id:?}: zero-norm vector")));
        }
        if self.position.contains_key(&id) {
            return Err(MixError::Argument(format!("duplicate id {id:?}")));
        }
        self.position.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.vectors.push(vector);
        Ok(())
    }

    /// Keep only the ids for which `keep` is true.
    pub fn retain(&self, keep: impl Fn(&str) -> bool) -> Self {
        let mut out = Self::new();
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            if keep(id) {
                out.insert(id.clone(), v.clone()).expect("entries were valid already");
            }
        }
        out
    }

    /// Parse JSON lines of `{"id": string, "vector": [float, ...]}`.
    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self, MixError> {
        let mut index = Self::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| MixError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: EmbeddingLine =
                serde_json::from_str(&line).map_err(|e| MixError::Io(format!("line {}: {e}", n + 1)))?;
            index.insert(entry.id, entry.vector)?;
        }
        Ok(index)
    }

    pub fn load(path: &Path) -> Result<Self, MixError> {
        let file =
            std::fs::File::open(path).map_err(|e| MixError::Io(format!("open {}: {e}", path.display())))?;
        Self::from_jsonl(std::io::BufReader::new(file))
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (id, vector) in self.ids.iter().zip(&self.vectors) {
            let line = EmbeddingLine { id: id.clone(), vector: vector.clone() };
            writeln!(out, "{}", serde_json::to_string(&line)?)?;
        }
        Ok(())
    }

    /// Embed every sentence with `embedder`.
    pub fn build(sentences: &[TaggedSentence], embedder: &dyn Embedder) -> Result<Self, MixError> {
        let mut index = Self::new();
        for s in sentences {
            index.insert(s.id(), embedder.embed(&s.tokens().join(" "))?)?;
        }
        Ok(index)
    }

    /// Content digest over ids and vector bits, used as a cache key.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            hasher.update((id.len() as u64).to_le_bytes());
            hasher.update(id.as_bytes());
            for x in v {
                hasher.update(x.to_bits().to_le_bytes());
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The `top_k` ids most similar to `id`, excluding `id` itself,
    /// by similarity descending then id ascending.
    pub fn nearest(&self, id: &str, top_k: usize) -> Result<Vec<String>, MixError> {
        let &me = self
            .position
            .get(id)
            .ok_or_else(|| MixError::Retrieval(format!("{id:?} is not in the index")))?;
        if self.len() < 2 {
            return Err(MixError::Retrieval("the index needs at least two sentences".into()));
        }
        let mut scored: Vec<(f64, &str)> = self
            .ids
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != me)
            .map(|(i, other)| {
                let sim = cosine_similarity(&self.vectors[me], &self.vectors[i])
                    .expect("index entries share a dimension and are non-zero");
                (sim, other.as_str())
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        Ok(scored.into_iter().take(top_k).map(|(_, id)| id.to_string()).collect())
    }
}

/// Precomputed neighbour lists for every id in an index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborTable {
    pub top_k: usize,
    pub digest: String,
    pub neighbors: BTreeMap<String, Vec<String>>,
}

impl NeighborTable {
    pub fn build(index: &EmbeddingIndex, top_k: usize) -> Result<Self, MixError> {
        if top_k == 0 {
            return Err(MixError::Argument("top_k must be at least 1".into()));
        }
        let mut neighbors = BTreeMap::new();
        for id in index.ids() {
            neighbors.insert(id.clone(), index.nearest(id, top_k)?);
        }
        Ok(Self { top_k, digest: index.digest(), neighbors })
    }

    /// Load from `cache_dir` when a table for the same index contents and
    /// `top_k` exists; otherwise build it and try to store it there.
    pub fn build_cached(
        index: &EmbeddingIndex,
        top_k: usize,
        cache_dir: Option<&Path>,
    ) -> Result<Self, MixError> {
        let Some(dir) = cache_dir else {
            return Self::build(index, top_k);
        };
        let digest = index.digest();
        let path: PathBuf = dir.join("similarity").join(format!("{}-k{top_k}.json", &digest[..32]));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(table) = serde_json::from_str::<NeighborTable>(&text) {
                if table.digest == digest && table.top_k == top_k {
                    return Ok(table);
                }
            }
        }
        let table = Self::build(index, top_k)?;
        let stored = path
            .parent()
            .map(std::fs::create_dir_all)
            .transpose()
            .and_then(|_| std::fs::write(&path, serde_json::to_string(&table).unwrap_or_default()));
        if let Err(e) = stored {
            log::warn!("could not cache similarity table at {}: {e}", path.display());
        }
        Ok(table)
    }

    pub fn candidates(&self, id: &str) -> Option<&[String]> {
        self.neighbors.get(id).map(Vec::as_slice)
    }

    /// Uniformly pick one of `id`'s neighbours.
    pub fn sample<R: Rng + ?Sized>(&self, id: &str, rng: &mut R) -> Result<String, MixError> {
        let pool = self
            .candidates(id)
            .filter(|c| !c.is_empty())
            .ok_or_else(|| MixError::Retrieval(format!("no neighbours for {id:?}")))?;
        Ok(pool[rng.random_range(0..pool.len())].clone())
    }
}

/// Uniformly sample a partner among the `top_k` most similar sentences.
pub fn retrieve_partner<R: Rng + ?Sized>(
    id: &str,
    index: &EmbeddingIndex,
    top_k: usize,
    rng: &mut R,
) -> Result<String, MixError> {
    if top_k == 0 {
        return Err(MixError::Argument("top_k must be at least 1".into()));
    }
    let pool = index.nearest(id, top_k)?;
    Ok(pool[rng.random_range(0..pool.len())].clone())
}

/// Gate parameters and partner pool size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixPolicy {
    pub top_k: usize,
    pub mu: f64,
    pub sigma: f64,
    pub beta: f64,
}

impl Default for MixPolicy {
    fn default() -> Self {
        Self { top_k: 5, mu: 0.5, sigma: 0.2, beta: 0.7 }
    }
}

impl MixPolicy {
    pub fn validate(&self) -> Result<(), MixError> {
        if self.top_k == 0 {
            return Err(MixError::Argument("mix top_k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(MixError::Argument(format!("beta {} outside [0, 1]", self.beta)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(MixError::Argument(format!("sigma {} must be finite and >= 0", self.sigma)));
        }
        Ok(())
    }

    /// Draw gamma from Normal(mu, sigma^2), clamped to [0, 1].
    pub fn sample_gamma<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let draw = match Normal::new(self.mu, self.sigma.max(0.0)) {
            Ok(normal) => normal.sample(rng),
            Err(_) => self.mu,
        };
        draw.clamp(0.0, 1.0)
    }

    /// Mixing applies only when gamma is strictly above beta.
    pub fn admits(&self, gamma: f64) -> bool {
        gamma > self.beta
    }
}

pub fn gate<R: Rng + ?Sized>(policy: &MixPolicy, rng: &mut R) -> bool {
    policy.admits(policy.sample_gamma(rng))
}

/// Concatenate two linearized templates. Elements of `b` are re-tagged as
/// coming from the partner, and a mask at the seam is collapsed.
pub fn mix(a: &Template, b: &Template) -> Template {
    if b.is_empty() {
        return a.clone();
    }
    let mut elements: Vec<TemplateElement> = a.elements().to_vec();
    elements.extend(b.elements().iter().map(|e| match e {
        TemplateElement::Kept { text, role, origin } => TemplateElement::Kept {
            text: text.clone(),
            role: *role,
            origin: origin.map(|o| Origin { parent: 1, index: o.index }),
        },
        other => other.clone(),
    }));
    Template::assemble(a.source_id().to_string(), Some(b.source_id().to_string()), elements)
}

/// Sentence-embedding service or any other text-to-vector function.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, MixError>;
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

/// `POST /embed {"text": ...}` → `{"vector": [...]}`.
pub struct HttpEmbedder {
    client: JsonClient,
}

impl HttpEmbedder {
    pub fn new(base_url: impl Into<String>, options: HttpOptions) -> Self {
        Self { client: JsonClient::new(base_url, options) }
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, MixError> {
        let resp: EmbedResponse = self.client.post("embed", &EmbedRequest { text })?;
        Ok(resp.vector)
    }
}
