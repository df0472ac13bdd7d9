use super::{create_out_dir, parse_options, read_documents, write_output};
use crate::manifest::ManifestBuilder;
use crate::Completion;
use aclm_core::corpus::{ConllDocument, TaggedSentence};
use aclm_core::evaluation::{
    diversity, micro_f1, pairs_from_provenance, perplexity, EvaluationReport, FileScorer, HttpScorer, Scorer,
};
use aclm_core::http::HttpOptions;
use anyhow::{bail, Result};
use clap::Args;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Predicted corpus, paired with --gold by sentence id.
    #[arg(long, requires = "gold")]
    pred: Option<PathBuf>,
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Augmented corpus with `source = <id>` provenance comments; the
    /// sentences without provenance are the originals.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Perplexity service scoring the augmentations in --pairs.
    #[arg(long, requires = "pairs", conflicts_with = "scores")]
    scorer_url: Option<PathBuf>,
    /// Precomputed perplexities (JSON lines `{"text", "perplexity"}`).
    #[arg(long, requires = "pairs")]
    scores: Option<PathBuf>,
    #[arg(long)]
    whitespace: bool,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

fn sentences(docs: Vec<ConllDocument>) -> Vec<TaggedSentence> {
    docs.into_iter().map(|d| d.sentence).collect()
}

pub fn run(args: EvaluateArgs) -> Result<Completion> {
    if args.pred.is_none() && args.pairs.is_none() {
        bail!("nothing to evaluate: pass --pred/--gold, --pairs, or both");
    }
    let options = parse_options(args.whitespace, false);
    let mut manifest = ManifestBuilder::new("evaluate");
    let mut report = EvaluationReport::default();

    if let (Some(pred), Some(gold)) = (&args.pred, &args.gold) {
        let predictions = sentences(read_documents(pred, options)?);
        let gold_sentences = sentences(read_documents(gold, options)?);
        report.f1 = Some(micro_f1(&predictions, &gold_sentences)?);
        manifest.input("pred", pred)?.input("gold", gold)?;
    }
    let mut partial = None;
    if let Some(path) = &args.pairs {
        let docs = read_documents(path, options)?;
        let originals: Vec<TaggedSentence> =
            docs.iter().filter(|d| d.comment_value("source").is_none()).map(|d| d.sentence.clone()).collect();
        let pairs = pairs_from_provenance(&docs, &originals)?;
        if pairs.is_empty() {
            bail!("{} has no augmentations with provenance comments", path.display());
        }
        report.diversity = Some(diversity(&pairs)?);
        manifest.input("pairs", path)?;

        let scorer: Option<Box<dyn Scorer>> = match (&args.scorer_url, &args.scores) {
            (Some(url), _) => Some(Box::new(HttpScorer::new(url.to_string_lossy(), HttpOptions::default()))),
            (None, Some(file)) => {
                manifest.input("scores", file)?;
                Some(Box::new(FileScorer::load(file)?))
            }
            _ => None,
        };
        if let Some(scorer) = scorer {
            let augmentations: Vec<TaggedSentence> = pairs.into_iter().map(|(_, aug)| aug).collect();
            let ppl = perplexity(&augmentations, scorer.as_ref())?;
            if !ppl.skipped.is_empty() {
                partial = Some(serde_json::json!({"perplexity_skipped": ppl.skipped}));
            }
            report.perplexity = Some(ppl);
        }
    }

    create_out_dir(&args.out)?;
    write_output(&args.out, "report.json", serde_json::to_string_pretty(&report)? + "\n")?;
    write_output(&args.out, "report.txt", report.to_text())?;
    manifest
        .output("report.json")
        .output("report.txt")
        .output("manifest.json")
        .summary(&report)
        .write(&args.out)?;
    print!("{}", report.to_text());
    Ok(match partial {
        Some(summary) => Completion::Partial(summary),
        None => Completion::Done,
    })
}
