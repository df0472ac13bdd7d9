mod commands;
mod manifest;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "aclm", version, about = "Entity-preserving data augmentation for sequence labeling")]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw nested stratified low-resource training subsets.
    Split(commands::split::SplitArgs),
    /// Dump one template per entity-bearing sentence.
    Template(commands::template::TemplateArgs),
    /// Fine-tune a denoiser and generate an augmented corpus.
    Augment(commands::augment::AugmentArgs),
    /// Run a baseline augmentation method.
    Baseline(commands::baseline::BaselineArgs),
    /// Score predictions, augmentation diversity and perplexity.
    Evaluate(commands::evaluate::EvaluateArgs),
}

/// How a command ended when it did not fail outright.
pub enum Completion {
    Done,
    /// Outputs written, but some items failed; carries a JSON summary.
    Partial(serde_json::Value),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let workers =
        cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
        log::warn!("could not size the global thread pool: {e}");
    }
    let result = match cli.command {
        Command::Split(args) => commands::split::run(args),
        Command::Template(args) => commands::template::run(args),
        Command::Augment(args) => commands::augment::run(args, workers),
        Command::Baseline(args) => commands::baseline::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
    };
    match result {
        Ok(Completion::Done) => ExitCode::SUCCESS,
        Ok(Completion::Partial(summary)) => {
            eprintln!("{}", serde_json::json!({"status": "partial", "summary": summary}));
            ExitCode::from(2)
        }
        Err(e) => {
            let causes: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!(
                "{}",
                serde_json::json!({"status": "error", "error": format!("{e:#}"), "causes": causes})
            );
            ExitCode::from(1)
        }
    }
}
