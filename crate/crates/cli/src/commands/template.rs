use super::{attention_provider, create_out_dir, record_attention, write_output, ConfigArgs, CorpusArgs};
use crate::manifest::ManifestBuilder;
use crate::Completion;
use aclm_core::seed::derived_rng;
use aclm_core::templating::KeywordStrategy;
use anyhow::Result;
use clap::Args;
use serde_json::json;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct TemplateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Attention store manifest or tagger service URL.
    #[arg(long)]
    attn: Option<String>,
    /// Keyword source: attention, random or none.
    #[arg(long)]
    strategy: Option<KeywordStrategy>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: TemplateArgs) -> Result<Completion> {
    let mut config = args.config.load()?;
    if let Some(strategy) = args.strategy {
        config.keyword_strategy = strategy;
    }
    let corpus = args.corpus.read()?;
    let provider = args.attn.as_deref().map(attention_provider).transpose()?;
    let recipe = config.recipe(provider.as_deref())?;

    let mut lines = String::new();
    let mut skipped = Vec::new();
    for sentence in &corpus {
        let mut rng = derived_rng(config.seed, &["template", sentence.id()]);
        match recipe.template(sentence, &mut rng)? {
            Some(t) => {
                lines.push_str(&serde_json::to_string(&t.to_dump())?);
                lines.push('\n');
            }
            None => skipped.push(sentence.id().to_string()),
        }
    }
    create_out_dir(&args.out)?;
    write_output(&args.out, "templates.jsonl", lines)?;

    let mut manifest = ManifestBuilder::new("template");
    manifest.config(&config).input("input", &args.corpus.input)?.seed("seed", config.seed);
    if let Some(attn) = &args.attn {
        record_attention(&mut manifest, attn)?;
    }
    manifest
        .output("templates.jsonl")
        .output("manifest.json")
        .summary(&json!({"templates": corpus.len() - skipped.len(), "skipped_without_entities": skipped}))
        .write(&args.out)?;
    Ok(Completion::Done)
}
