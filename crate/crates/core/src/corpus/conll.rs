//! Token-per-line CoNLL reader and writer.
//!
//! Format: `token<SEP>tag` per line, a blank line between sentences, and
//! optional `# ...` comment lines before a sentence. A `# id = <string>`
//! comment names the sentence that follows it; other comments are kept
//! verbatim on the [`ConllDocument`].

use super::{repair_bio, CorpusError, Tag, TaggedSentence};
use std::collections::HashSet;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Separator {
    #[default]
    Tab,
    /// Any run of ASCII/Unicode whitespace.
    Space,
}

impl Separator {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Separator::Tab => line.split('\t').collect(),
            Separator::Space => line.split_whitespace().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub separator: Separator,
    /// Convert orphan `I-X` tags to `B-X` instead of rejecting the sentence.
    pub repair: bool,
}

/// A sentence together with the non-id comment lines that preceded it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConllDocument {
    pub sentence: TaggedSentence,
    /// Comment bodies with the leading `#` and surrounding whitespace removed.
    pub comments: Vec<String>,
}

impl ConllDocument {
    pub fn new(sentence: TaggedSentence) -> Self {
        Self { sentence, comments: Vec::new() }
    }

    /// Value of a `key = value` pair found in any comment line. Pairs are
    /// whitespace separated, e.g. `source = 12 round = 3`.
    pub fn comment_value(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|c| {
            let words: Vec<&str> = c.split_whitespace().collect();
            words.windows(3).find(|w| w[0] == key && w[1] == "=").map(|w| w[2])
        })
    }
}

pub fn parse_conll(text: &str, options: ParseOptions) -> Result<Vec<TaggedSentence>, CorpusError> {
    Ok(parse_conll_documents(text, options)?.into_iter().map(|d| d.sentence).collect())
}

pub fn parse_conll_documents(text: &str, options: ParseOptions) -> Result<Vec<ConllDocument>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    let mut pending = Pending::default();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            if let Some(doc) = pending.flush(docs.len(), options)? {
                push_unique(&mut docs, &mut seen, doc)?;
            }
            continue;
        }
        let fields = options.separator.split(line);
        if line.starts_with('#') && pending.tokens.is_empty() && !looks_like_token(&fields) {
            pending.comment(line);
            continue;
        }
        if fields.len() != 2 {
            return Err(CorpusError::Parse {
                line: lineno,
                message: format!("expected 2 columns (token, tag), found {}", fields.len()),
            });
        }
        pending.tokens.push(fields[0].to_string());
        pending.tags.push(fields[1].to_string());
    }
    if let Some(doc) = pending.flush(docs.len(), options)? {
        push_unique(&mut docs, &mut seen, doc)?;
    }
    Ok(docs)
}

fn looks_like_token(fields: &[&str]) -> bool {
    fields.len() == 2 && !fields[0].is_empty() && Tag::parse(fields[1]).is_some()
}

fn push_unique(
    docs: &mut Vec<ConllDocument>,
    seen: &mut HashSet<String>,
    doc: ConllDocument,
) -> Result<(), CorpusError> {
    if !seen.insert(doc.sentence.id().to_string()) {
        return Err(CorpusError::DuplicateId(doc.sentence.id().to_string()));
    }
    docs.push(doc);
    Ok(())
}

#[derive(Default)]
struct Pending {
    id: Option<String>,
    comments: Vec<String>,
    tokens: Vec<String>,
    tags: Vec<String>,
}

impl Pending {
    fn comment(&mut self, line: &str) {
        let body = line.trim_start_matches('#').trim();
        if let Some(rest) = body.strip_prefix("id") {
            if let Some(value) = rest.trim_start().strip_prefix('=') {
                self.id = Some(value.trim().to_string());
                return;
            }
        }
        self.comments.push(body.to_string());
    }

    fn flush(&mut self, ordinal: usize, options: ParseOptions) -> Result<Option<ConllDocument>, CorpusError> {
        if self.tokens.is_empty() {
            return Ok(None);
        }
        let id = self.id.take().unwrap_or_else(|| ordinal.to_string());
        let tokens = std::mem::take(&mut self.tokens);
        let mut tags = std::mem::take(&mut self.tags);
        if options.repair {
            tags = repair_bio(&tags);
        }
        let sentence = TaggedSentence::new(id, tokens, tags)?;
        Ok(Some(ConllDocument { sentence, comments: std::mem::take(&mut self.comments) }))
    }
}

/// Write sentences as tab-separated CoNLL. An `# id = ` line is emitted only
/// when a sentence's id differs from its zero-based position.
pub fn serialize_conll(sentences: &[TaggedSentence]) -> Result<String, CorpusError> {
    let docs: Vec<ConllDocument> = sentences.iter().cloned().map(ConllDocument::new).collect();
    serialize_conll_documents(&docs)
}

pub fn serialize_conll_documents(docs: &[ConllDocument]) -> Result<String, CorpusError> {
    let mut out = String::new();
    for (ordinal, doc) in docs.iter().enumerate() {
        let s = &doc.sentence;
        if s.id().contains(['\n', '\r']) || s.id().trim() != s.id() {
            return Err(CorpusError::Validation {
                id: s.id().to_string(),
                message: "id cannot be written as a comment line".into(),
            });
        }
        if let Some(c) = doc.comments.iter().find(|c| c.contains(['\n', '\r'])) {
            return Err(CorpusError::Validation {
                id: s.id().to_string(),
                message: format!("comment {c:?} spans several lines"),
            });
        }
        if s.id() != ordinal.to_string() {
            let _ = writeln!(out, "# id = {}", s.id());
        }
        for comment in &doc.comments {
            let _ = writeln!(out, "# {comment}");
        }
        for (token, tag) in s.tokens().iter().zip(s.tags()) {
            let _ = writeln!(out, "{token}\t{tag}");
        }
        out.push('\n');
    }
    Ok(out)
}
