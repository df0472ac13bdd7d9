use super::{create_out_dir, parse_options, write_output, ConfigArgs, CorpusArgs};
use crate::manifest::ManifestBuilder;
use crate::Completion;
use aclm_core::corpus::{dev_downsample_size, serialize_conll, stratified_sample, TaggedSentence};
use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Development corpus to shrink alongside each subset.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Subset sizes, comma separated; defaults to the configuration's.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory; created if missing.
    #[arg(long = "out", alias = "out-dir")]
    out: PathBuf,
}

#[derive(Serialize)]
struct SplitSummary {
    size: usize,
    train_file: String,
    dev_file: Option<String>,
    dev_size: Option<usize>,
}

pub fn run(args: SplitArgs) -> Result<Completion> {
    let mut config = args.config.load()?;
    if let Some(sizes) = args.sizes {
        config.split_sizes = sizes;
    }
    let corpus = args.corpus.read()?;
    let dev = match &args.dev {
        Some(path) => Some(
            super::read_documents(path, parse_options(args.corpus.whitespace, args.corpus.repair_bio))?
                .into_iter()
                .map(|d| d.sentence)
                .collect::<Vec<_>>(),
        ),
        None => None,
    };
    let mut sizes = config.split_sizes.clone();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes.dedup();
    if sizes.is_empty() || sizes.contains(&0) {
        bail!("sizes must be a non-empty list of positive integers");
    }
    if sizes[0] > corpus.len() {
        bail!("size {} exceeds the corpus ({} sentences)", sizes[0], corpus.len());
    }
    create_out_dir(&args.out)?;
    let mut manifest = ManifestBuilder::new("split");
    manifest.config(&config).input("input", &args.corpus.input)?.seed("seed", config.seed);
    if let Some(path) = &args.dev {
        manifest.input("dev", path)?;
    }

    // Each subset is drawn from the next larger one, so smaller sets nest.
    let mut pool: Vec<TaggedSentence> = corpus.clone();
    let mut dev_pool = dev.clone();
    let mut summary = Vec::new();
    for &size in &sizes {
        let (subset, _) = stratified_sample(&pool, size, config.seed)?;
        let train_file = format!("train-{size}.conll");
        write_output(&args.out, &train_file, serialize_conll(&subset)?)?;
        manifest.output(&train_file);
        let mut entry = SplitSummary { size, train_file, dev_file: None, dev_size: None };
        if let (Some(dev_all), Some(current)) = (&dev, &dev_pool) {
            let k =
                dev_downsample_size(dev_all.len(), corpus.len(), size, config.dev_sizing).min(current.len());
            let (dev_subset, _) = stratified_sample(current, k, config.seed)?;
            let dev_file = format!("dev-{size}.conll");
            write_output(&args.out, &dev_file, serialize_conll(&dev_subset)?)?;
            manifest.output(&dev_file);
            entry.dev_file = Some(dev_file);
            entry.dev_size = Some(dev_subset.len());
            dev_pool = Some(dev_subset);
        }
        log::info!("subset of {size} written");
        summary.push(entry);
        pool = subset;
    }
    manifest.output("manifest.json").summary(&summary).write(&args.out)?;
    Ok(Completion::Done)
}
