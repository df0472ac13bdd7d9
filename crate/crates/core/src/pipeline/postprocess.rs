use super::generate::{AugmentationRecord, Disposition, Outcome};
use super::PipelineError;
use crate::corpus::{ConllDocument, TaggedSentence};
use crate::templating::TemplateDump;
use serde::Serialize;
use std::collections::{HashMap, HashSet};
use std::io::Write;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DispositionCounts {
    pub kept: usize,
    pub duplicate: usize,
    pub malformed: usize,
    pub failed: usize,
}

impl DispositionCounts {
    pub fn of(records: &[AugmentationRecord]) -> Self {
        let mut c = Self::default();
        for r in records {
            match r.disposition {
                Disposition::Kept => c.kept += 1,
                Disposition::Duplicate => c.duplicate += 1,
                Disposition::Malformed => c.malformed += 1,
                Disposition::Failed => c.failed += 1,
            }
        }
        c
    }
}

/// Gold sentences followed by the surviving augmentations.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub documents: Vec<ConllDocument>,
    pub counts: DispositionCounts,
}

/// Mark augmentations that repeat a parent (case-folded token equality with
/// the source, or with the partner for mixed records) as duplicates, then
/// merge the survivors after the gold corpus with provenance comments.
pub fn post_process(
    records: &mut [AugmentationRecord],
    gold: &[TaggedSentence],
) -> Result<Augmented, PipelineError> {
    let folded: HashMap<&str, Vec<String>> = gold.iter().map(|s| (s.id(), s.folded_tokens())).collect();
    let parent = |id: &str| {
        folded.get(id).ok_or_else(|| PipelineError::Data(format!("record refers to unknown sentence {id:?}")))
    };
    let mut ids: HashSet<String> = gold.iter().map(|s| s.id().to_string()).collect();
    let mut documents: Vec<ConllDocument> = gold.iter().cloned().map(ConllDocument::new).collect();

    for record in records.iter_mut() {
        let Outcome::Parsed(sentence) = &record.outcome else { continue };
        let tokens = sentence.folded_tokens();
        let mut duplicate = &tokens == parent(&record.source_id)?;
        if let Some(pid) = &record.partner_id {
            duplicate |= &tokens == parent(pid)?;
        }
        if duplicate {
            record.disposition = Disposition::Duplicate;
            continue;
        }
        record.disposition = Disposition::Kept;
        if !ids.insert(sentence.id().to_string()) {
            return Err(PipelineError::Data(format!("augmented id {:?} collides", sentence.id())));
        }
        let mut comments = vec![format!(
            "source = {} round = {} mixner = {}",
            record.source_id, record.round, record.used_mixner
        )];
        if let Some(pid) = &record.partner_id {
            comments.push(format!("partner = {pid}"));
        }
        documents.push(ConllDocument { sentence: sentence.clone(), comments });
    }
    Ok(Augmented { documents, counts: DispositionCounts::of(records) })
}

#[derive(Serialize)]
struct ReportLine<'a> {
    source_id: &'a str,
    round: usize,
    used_mixner: bool,
    partner_id: Option<&'a str>,
    template: TemplateDump,
    raw_tokens: String,
    parsed: Option<&'a TaggedSentence>,
    error: Option<String>,
    disposition: Disposition,
}

/// One JSON object per record and line.
pub fn write_report<W: Write>(records: &[AugmentationRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        let error = match &r.outcome {
            Outcome::Parsed(_) => None,
            Outcome::Malformed(e) => Some(e.to_string()),
            Outcome::Failed(e) => Some(e.clone()),
        };
        let line = ReportLine {
            source_id: &r.source_id,
            round: r.round,
            used_mixner: r.used_mixner,
            partner_id: r.partner_id.as_deref(),
            template: r.template.to_dump(),
            raw_tokens: r.raw_tokens.join(" "),
            parsed: r.parsed(),
            error,
            disposition: r.disposition,
        };
        writeln!(out, "{}", serde_json::to_string(&line)?)?;
    }
    Ok(())
}
