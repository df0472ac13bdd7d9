use super::{create_out_dir, write_output, ConfigArgs, CorpusArgs};
use crate::manifest::ManifestBuilder;
use crate::Completion;
use aclm_core::corpus::serialize_conll_documents;
use aclm_core::pipeline::baseline_lwtr;
use anyhow::Result;
use clap::{Args, ValueEnum};
use serde_json::json;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    /// Label-wise token replacement.
    Lwtr,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[arg(long, value_enum, default_value = "lwtr")]
    method: Method,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Augmentation rounds; defaults to the configuration's.
    #[arg(long)]
    rounds: Option<usize>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: BaselineArgs) -> Result<Completion> {
    let mut config = args.config.load()?;
    if let Some(rounds) = args.rounds {
        config.rounds = rounds;
    }
    config.validate()?;
    let corpus = args.corpus.read()?;
    let documents = match args.method {
        Method::Lwtr => baseline_lwtr(&corpus, config.rounds, config.lwtr_probability, config.seed)?,
    };
    create_out_dir(&args.out)?;
    write_output(&args.out, "augmented.conll", serialize_conll_documents(&documents)?)?;
    let mut manifest = ManifestBuilder::new("baseline");
    manifest
        .config(&config)
        .input("input", &args.corpus.input)?
        .seed("seed", config.seed)
        .output("augmented.conll")
        .output("manifest.json")
        .summary(&json!({
            "method": "lwtr",
            "gold": corpus.len(),
            "augmentations": documents.len() - corpus.len(),
        }))
        .write(&args.out)?;
    Ok(Completion::Done)
}
