//! Templates: corrupted sentences that keep entities, label markers and
//! keywords, with everything else collapsed into mask placeholders.
//!
//! Construction runs in three steps, each a separate function so callers can
//! splice in template mixing between the last two:
//!
//! 1. [`selective_mask`] keeps entity and keyword tokens and masks the rest;
//! 2. [`linearize`] flanks each entity with its label;
//! 3. [`dynamic_mask`] re-masks a random share of the keywords.
//!
//! [`render`] turns a template into denoiser input tokens and
//! [`delinearize`] parses denoiser output back into a tagged sentence.

mod build;
mod recipe;
mod render;

pub use build::{
    dynamic_mask, linearize, mask_keywords, masked_count, selective_mask, DynamicMaskPolicy, SigmaRule,
};
pub use recipe::{linearized_original, KeywordStrategy, RecipeError, TemplateRecipe};
pub use render::{delinearize, render, MalformedError, MarkerStyle, RenderVocab};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("template {source_id:?}: {message}")]
    Internal { source_id: String, message: String },
    #[error("template {source_id:?} breaks an invariant: {message}")]
    Invariant { source_id: String, message: String },
}

/// Why a token survived masking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Entity,
    Keyword,
}

/// Where a kept token came from: `parent` is 0 for the template's own
/// sentence and 1 for a mixing partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Origin {
    pub parent: usize,
    pub index: usize,
}

impl Origin {
    pub fn own(index: usize) -> Self {
        Self { parent: 0, index }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateElement {
    Kept { text: String, role: Role, origin: Option<Origin> },
    Mask,
    LabelMarker { label: String },
}

impl TemplateElement {
    pub fn is_mask(&self) -> bool {
        matches!(self, TemplateElement::Mask)
    }

    pub fn is_keyword(&self) -> bool {
        matches!(self, TemplateElement::Kept { role: Role::Keyword, .. })
    }

    pub fn is_entity(&self) -> bool {
        matches!(self, TemplateElement::Kept { role: Role::Entity, .. })
    }
}

/// An ordered list of template elements plus provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    source_id: String,
    partner_id: Option<String>,
    elements: Vec<TemplateElement>,
}

impl Template {
    /// Build from raw elements, checking every template invariant.
    pub fn from_elements(
        source_id: impl Into<String>,
        elements: Vec<TemplateElement>,
    ) -> Result<Self, TemplateError> {
        let t = Self { source_id: source_id.into(), partner_id: None, elements };
        t.check_invariants()?;
        Ok(t)
    }

    pub(crate) fn assemble(
        source_id: String,
        partner_id: Option<String>,
        elements: Vec<TemplateElement>,
    ) -> Self {
        Self { source_id, partner_id, elements: collapse_masks(elements) }
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// The mixing partner's sentence id, when this is a mixed template.
    pub fn partner_id(&self) -> Option<&str> {
        self.partner_id.as_deref()
    }

    pub fn elements(&self) -> &[TemplateElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Origins of keywords still present as kept tokens.
    pub fn keyword_origins(&self) -> BTreeSet<Origin> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                TemplateElement::Kept { role: Role::Keyword, origin: Some(o), .. } => Some(*o),
                _ => None,
            })
            .collect()
    }

    pub fn keyword_count(&self) -> usize {
        self.elements.iter().filter(|e| e.is_keyword()).count()
    }

    /// Entity token texts in template order.
    pub fn entity_tokens(&self) -> Vec<&str> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                TemplateElement::Kept { text, role: Role::Entity, .. } => Some(text.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Labels of the marker elements in order.
    pub fn marker_labels(&self) -> Vec<&str> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                TemplateElement::LabelMarker { label } => Some(label.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn has_markers(&self) -> bool {
        self.elements.iter().any(|e| matches!(e, TemplateElement::LabelMarker { .. }))
    }

    /// Verify: no adjacent masks; markers come in same-label pairs around one
    /// or more entity tokens and nothing else; once any marker is present,
    /// every entity token sits inside a pair.
    pub fn check_invariants(&self) -> Result<(), TemplateError> {
        let fail =
            |message: String| Err(TemplateError::Invariant { source_id: self.source_id.clone(), message });
        if let Some(i) = self.elements.windows(2).position(|w| w[0].is_mask() && w[1].is_mask()) {
            return fail(format!("consecutive masks at {i}"));
        }
        let linearized = self.has_markers();
        let mut open: Option<(&str, usize)> = None;
        for (i, e) in self.elements.iter().enumerate() {
            match (e, open) {
                (TemplateElement::LabelMarker { label }, None) => open = Some((label, 0)),
                (TemplateElement::LabelMarker { label }, Some((l, n))) if l == label => {
                    if n == 0 {
                        return fail(format!("empty {label} pair closing at {i}"));
                    }
                    open = None;
                }
                (TemplateElement::LabelMarker { label }, Some((l, _))) => {
                    return fail(format!("{label} marker at {i} inside an open {l} pair"));
                }
                (TemplateElement::Kept { role: Role::Entity, .. }, Some((l, n))) => open = Some((l, n + 1)),
                (TemplateElement::Kept { role: Role::Entity, .. }, None) if linearized => {
                    return fail(format!("entity token at {i} outside any marker pair"));
                }
                (_, Some((l, _))) => return fail(format!("non-entity element at {i} inside {l} pair")),
                _ => {}
            }
        }
        if let Some((l, _)) = open {
            return fail(format!("unclosed {l} marker"));
        }
        Ok(())
    }

    /// JSON-friendly view: `{source_id, elements: [{kind, text}]}`.
    pub fn to_dump(&self) -> TemplateDump {
        TemplateDump {
            source_id: self.source_id.clone(),
            partner_id: self.partner_id.clone(),
            elements: self
                .elements
                .iter()
                .map(|e| match e {
                    TemplateElement::Kept { text, .. } => {
                        DumpElement { kind: "Kept".into(), text: Some(text.clone()) }
                    }
                    TemplateElement::Mask => DumpElement { kind: "Mask".into(), text: None },
                    TemplateElement::LabelMarker { label } => {
                        DumpElement { kind: "LabelMarker".into(), text: Some(label.clone()) }
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateDump {
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner_id: Option<String>,
    pub elements: Vec<DumpElement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpElement {
    pub kind: String,
    pub text: Option<String>,
}

/// Collapse runs of masks into a single mask.
pub(crate) fn collapse_masks(elements: Vec<TemplateElement>) -> Vec<TemplateElement> {
    let mut out: Vec<TemplateElement> = Vec::with_capacity(elements.len());
    for e in elements {
        if e.is_mask() && out.last().is_some_and(TemplateElement::is_mask) {
            continue;
        }
        out.push(e);
    }
    out
}
