pub mod augment;
pub mod baseline;
pub mod evaluate;
pub mod split;
pub mod template;

use crate::manifest::ManifestBuilder;
use aclm_core::attention::{AttentionProvider, AttentionStore, HttpAttentionProvider};
use aclm_core::corpus::{parse_conll_documents, ConllDocument, ParseOptions, Separator, TaggedSentence};
use aclm_core::http::HttpOptions;
use aclm_core::pipeline::PipelineConfig;
use anyhow::{Context, Result};
use clap::Args;
use std::path::{Path, PathBuf};

pub const CACHE_ENV: &str = "ACLM_CACHE_DIR";

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    /// Token-per-line corpus with one `token<TAB>tag` pair per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Split columns on any whitespace instead of tabs.
    #[arg(long)]
    pub whitespace: bool,
    /// Turn orphan I- tags into B- tags instead of rejecting the sentence.
    #[arg(long)]
    pub repair_bio: bool,
}

impl CorpusArgs {
    pub fn options(&self) -> ParseOptions {
        parse_options(self.whitespace, self.repair_bio)
    }

    pub fn read(&self) -> Result<Vec<TaggedSentence>> {
        Ok(read_documents(&self.input, self.options())?.into_iter().map(|d| d.sentence).collect())
    }
}

pub fn parse_options(whitespace: bool, repair: bool) -> ParseOptions {
    ParseOptions { separator: if whitespace { Separator::Space } else { Separator::Tab }, repair }
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// JSON run configuration; absent fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

pub fn read_documents(path: &Path, options: ParseOptions) -> Result<Vec<ConllDocument>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_conll_documents(&text, options).with_context(|| format!("parsing {}", path.display()))
}

pub fn create_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_output(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

pub fn is_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://")
}

/// A store manifest path or a tagger service URL.
pub fn attention_provider(source: &str) -> Result<Box<dyn AttentionProvider>> {
    if is_url(source) {
        let mut provider = HttpAttentionProvider::new(source, HttpOptions::default());
        if let Some(dir) = cache_dir() {
            provider = provider.with_cache_dir(dir);
        }
        Ok(Box::new(provider))
    } else {
        let store = AttentionStore::open(Path::new(source))
            .with_context(|| format!("opening attention store {source}"))?;
        Ok(Box::new(store))
    }
}

/// Hash an attention store's manifest and data file, or note a service URL.
pub fn record_attention(manifest: &mut ManifestBuilder, source: &str) -> Result<()> {
    let path = Path::new(source);
    manifest.input("attention", path)?;
    if !is_url(source) {
        let store = AttentionStore::open(path)?;
        let data = path.parent().unwrap_or(Path::new("")).join(&store.manifest().data);
        manifest.input("attention_data", &data)?;
    }
    Ok(())
}
