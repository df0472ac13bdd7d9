use super::{
    attention_provider, cache_dir, create_out_dir, is_url, record_attention, write_output, ConfigArgs,
    CorpusArgs,
};
use crate::manifest::ManifestBuilder;
use crate::Completion;
use aclm_core::corpus::{serialize_conll_documents, TaggedSentence};
use aclm_core::denoiser::{build_training_pairs, Denoiser, LookupDenoiser, ServiceDenoiser, ServiceOptions};
use aclm_core::http::HttpOptions;
use aclm_core::mixner::{EmbeddingIndex, HttpEmbedder, NeighborTable};
use aclm_core::pipeline::{post_process, run_generation, write_report, GenerationInputs};
use aclm_core::templating::KeywordStrategy;
use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde_json::json;
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    /// In-process nearest-template lookup; deterministic, for dry runs.
    Lookup,
    /// HTTP denoiser service.
    Service,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Attention store manifest or tagger service URL.
    #[arg(long)]
    attn: Option<String>,
    /// Sentence embeddings (JSON lines) or embedding service URL. Mixing is
    /// off without them.
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long, value_enum, default_value = "lookup")]
    backend: Backend,
    /// Base URL of the denoiser service.
    #[arg(long, required_if_eq("backend", "service"))]
    service_url: Option<String>,
    /// Reuse an already fine-tuned service model instead of training.
    #[arg(long)]
    job_id: Option<String>,
    /// Seconds between fine-tuning status polls.
    #[arg(long, default_value_t = 5)]
    poll_secs: u64,
    /// Keyword source: attention, random or none.
    #[arg(long)]
    strategy: Option<KeywordStrategy>,
    /// Augmentation rounds; overrides the configuration.
    #[arg(long)]
    rounds: Option<usize>,
    /// Disable template mixing.
    #[arg(long)]
    no_mixner: bool,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

fn embedding_index(source: &str, corpus: &[TaggedSentence]) -> Result<EmbeddingIndex> {
    let wanted: Vec<TaggedSentence> = corpus.iter().filter(|s| s.has_entities()).cloned().collect();
    if is_url(source) {
        let embedder = HttpEmbedder::new(source, HttpOptions::default());
        return Ok(EmbeddingIndex::build(&wanted, &embedder)?);
    }
    let index = EmbeddingIndex::load(Path::new(source)).with_context(|| format!("loading {source}"))?;
    let ids: HashSet<&str> = wanted.iter().map(|s| s.id()).collect();
    if let Some(missing) = wanted.iter().find(|s| !index.contains(s.id())) {
        bail!("no embedding for sentence {:?} in {source}", missing.id());
    }
    Ok(index.retain(|id| ids.contains(id)))
}

pub fn run(args: AugmentArgs, workers: usize) -> Result<Completion> {
    let mut config = args.config.load()?;
    if let Some(strategy) = args.strategy {
        config.keyword_strategy = strategy;
    }
    if let Some(rounds) = args.rounds {
        config.rounds = rounds;
    }
    if args.no_mixner {
        config.mixner = false;
    }
    config.validate()?;
    let corpus = args.corpus.read()?;
    let provider = args.attn.as_deref().map(attention_provider).transpose()?;
    let recipe = config.recipe(provider.as_deref())?;

    let neighbors = match (&args.embeddings, config.mixner) {
        (Some(source), true) => {
            let index = embedding_index(source, &corpus)?;
            if index.len() < 2 {
                log::warn!("fewer than two entity-bearing sentences; mixing disabled");
                None
            } else {
                Some(NeighborTable::build_cached(&index, config.mix.top_k, cache_dir().as_deref())?)
            }
        }
        _ => None,
    };

    let training = build_training_pairs(&corpus, &recipe, &config.vocab, config.passes(), config.seed)?;
    log::info!("{} training pairs", training.pairs.len());
    let mut denoiser: Box<dyn Denoiser> = match args.backend {
        Backend::Lookup => Box::new(LookupDenoiser::new()),
        Backend::Service => {
            let url = args.service_url.as_deref().context("--service-url is required")?;
            let options =
                ServiceOptions { poll_interval: Duration::from_secs(args.poll_secs), ..Default::default() };
            let service = ServiceDenoiser::new(url, options);
            Box::new(match &args.job_id {
                Some(job) => service.with_job(job.clone()),
                None => service,
            })
        }
    };
    let reuse_model = args.backend == Backend::Service && args.job_id.is_some();
    if !reuse_model {
        denoiser.fine_tune(&training.pairs, &config.fine_tune)?;
    }

    let inputs = GenerationInputs {
        corpus: &corpus,
        recipe: &recipe,
        denoiser: denoiser.as_ref(),
        neighbors: neighbors.as_ref(),
    };
    let mut records = run_generation(inputs, &config, workers)?;
    let augmented = post_process(&mut records, &corpus)?;

    create_out_dir(&args.out)?;
    write_output(&args.out, "augmented.conll", serialize_conll_documents(&augmented.documents)?)?;
    let mut report = Vec::new();
    write_report(&records, &mut report)?;
    write_output(&args.out, "records.jsonl", report)?;

    let mut manifest = ManifestBuilder::new("augment");
    manifest.config(&config).input("input", &args.corpus.input)?.seed("seed", config.seed);
    if let Some(attn) = &args.attn {
        record_attention(&mut manifest, attn)?;
    }
    if let Some(e) = &args.embeddings {
        manifest.input("embeddings", Path::new(e))?;
    }
    let summary = json!({
        "backend": format!("{:?}", args.backend).to_lowercase(),
        "training_pairs": training.pairs.len(),
        "skipped_without_entities": training.skipped,
        "records": records.len(),
        "mixed": records.iter().filter(|r| r.used_mixner).count(),
        "dispositions": augmented.counts,
        "output_sentences": augmented.documents.len(),
    });
    manifest
        .output("augmented.conll")
        .output("records.jsonl")
        .output("manifest.json")
        .summary(&summary)
        .write(&args.out)?;
    log::info!(
        "{} kept, {} duplicate, {} malformed, {} failed",
        augmented.counts.kept,
        augmented.counts.duplicate,
        augmented.counts.malformed,
        augmented.counts.failed
    );
    if augmented.counts.failed > 0 {
        return Ok(Completion::Partial(summary));
    }
    Ok(Completion::Done)
}
