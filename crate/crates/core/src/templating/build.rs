use super::{Origin, Role, Template, TemplateElement, TemplateError};
use crate::attention::KeywordSet;
use crate::corpus::{EntitySpan, TaggedSentence};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Keep entity and keyword tokens in order, replace every other token with a
/// mask, and collapse runs of masks.
pub fn selective_mask(sentence: &TaggedSentence, keywords: &KeywordSet) -> Template {
    let elements = sentence
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, token)| {
            let role = if sentence.is_entity_token(i) {
                Role::Entity
            } else if keywords.contains(i) {
                Role::Keyword
            } else {
                return TemplateElement::Mask;
            };
            TemplateElement::Kept { text: token.clone(), role, origin: Some(Origin::own(i)) }
        })
        .collect();
    Template::assemble(sentence.id().to_string(), None, elements)
}

/// Flank every entity's run of kept tokens with a marker carrying its label.
///
/// `entities` are the spans of the template's own sentence; each must map to
/// a complete, contiguous run of entity elements.
pub fn linearize(template: &Template, entities: &[EntitySpan]) -> Result<Template, TemplateError> {
    let internal =
        |message: String| TemplateError::Internal { source_id: template.source_id().to_string(), message };
    if template.has_markers() {
        return Err(internal("template is already linearized".into()));
    }
    let marker = |k: usize| TemplateElement::LabelMarker { label: entities[k].label.clone() };

    let mut out = Vec::with_capacity(template.len() + 2 * entities.len());
    let mut open: Option<usize> = None;
    let mut seen = vec![0usize; entities.len()];
    let mut started = vec![false; entities.len()];
    for element in template.elements() {
        let span = match element {
            TemplateElement::Kept { role: Role::Entity, origin, text } => {
                let index = origin
                    .filter(|o| o.parent == 0)
                    .map(|o| o.index)
                    .ok_or_else(|| internal(format!("entity token {text:?} has no own origin")))?;
                let k = entities
                    .iter()
                    .position(|s| s.contains(index))
                    .ok_or_else(|| internal(format!("token {index} is in no entity span")))?;
                Some(k)
            }
            _ => None,
        };
        if let Some(k) = open.filter(|&k| span != Some(k)) {
            out.push(marker(k));
            open = None;
        }
        if let Some(k) = span {
            if open.is_none() {
                if started[k] {
                    return Err(internal(format!("entity {k} is split by other elements")));
                }
                started[k] = true;
                out.push(marker(k));
                open = Some(k);
            }
            seen[k] += 1;
        }
        out.push(element.clone());
    }
    if let Some(k) = open {
        out.push(marker(k));
    }
    if let Some(k) = (0..entities.len()).find(|&k| seen[k] != entities[k].len()) {
        return Err(internal(format!(
            "entity {k} ({}) has {} of {} tokens in the template",
            entities[k].label,
            seen[k],
            entities[k].len()
        )));
    }
    Ok(Template::assemble(template.source_id().to_string(), template.partner_id().map(str::to_string), out))
}

/// How the standard deviation of the masking-rate Gaussian is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaRule {
    /// One over the number of keywords in the template.
    ReciprocalK,
    Fixed(f64),
}

/// Draws the per-template dynamic masking rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicMaskPolicy {
    pub mu: f64,
    pub sigma: SigmaRule,
}

impl Default for DynamicMaskPolicy {
    fn default() -> Self {
        Self { mu: 0.5, sigma: SigmaRule::ReciprocalK }
    }
}

impl DynamicMaskPolicy {
    pub fn sigma_for(&self, keywords: usize) -> f64 {
        match self.sigma {
            SigmaRule::ReciprocalK if keywords == 0 => 0.0,
            SigmaRule::ReciprocalK => 1.0 / keywords as f64,
            SigmaRule::Fixed(s) => s,
        }
    }

    /// Draw a rate from Normal(mu, sigma^2) and clamp it to [0, 1].
    pub fn sample_rate<R: Rng + ?Sized>(&self, keywords: usize, rng: &mut R) -> f64 {
        let sigma = self.sigma_for(keywords).max(0.0);
        let draw = match Normal::new(self.mu, sigma) {
            Ok(normal) => normal.sample(rng),
            Err(_) => self.mu,
        };
        draw.clamp(0.0, 1.0)
    }
}

/// Number of keywords masked at `rate` out of `keywords`: the nearest integer
/// to `rate * keywords`.
pub fn masked_count(rate: f64, keywords: usize) -> usize {
    let count = (rate.clamp(0.0, 1.0) * keywords as f64).round() as usize;
    count.min(keywords)
}

/// Draw a masking rate and mask that share of the template's keywords.
/// Templates without keywords come back unchanged.
pub fn dynamic_mask<R: Rng + ?Sized>(
    template: &Template,
    policy: &DynamicMaskPolicy,
    rng: &mut R,
) -> Template {
    let k = template.keyword_count();
    if k == 0 {
        return template.clone();
    }
    let rate = policy.sample_rate(k, rng);
    mask_keywords(template, rate, rng)
}

/// Mask `masked_count(rate, K)` uniformly chosen keywords, then collapse
/// mask runs. Entity tokens and markers are never touched.
pub fn mask_keywords<R: Rng + ?Sized>(template: &Template, rate: f64, rng: &mut R) -> Template {
    let positions: Vec<usize> =
        template.elements().iter().enumerate().filter(|(_, e)| e.is_keyword()).map(|(i, _)| i).collect();
    let count = masked_count(rate, positions.len());
    let mut elements = template.elements().to_vec();
    for pick in sample(rng, positions.len(), count) {
        elements[positions[pick]] = TemplateElement::Mask;
    }
    Template::assemble(template.source_id().to_string(), template.partner_id().map(str::to_string), elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::extract_entities;
    use crate::seed::rng_from_seed;
    use std::collections::{BTreeMap, BTreeSet};

    fn keywords(indices: &[usize]) -> KeywordSet {
        let set: BTreeSet<usize> = indices.iter().copied().collect();
        KeywordSet { indices: set.clone(), per_entity: BTreeMap::from([(0, set)]) }
    }

    fn texts(t: &Template) -> Vec<String> {
        t.elements()
            .iter()
            .map(|e| match e {
                TemplateElement::Kept { text, .. } => text.clone(),
                TemplateElement::Mask => "[M]".into(),
                TemplateElement::LabelMarker { label } => format!("<{label}>"),
            })
            .collect()
    }

    #[test]
    fn selective_mask_example() {
        let s =
            TaggedSentence::from_strs("s", &["a", "b", "E", "c", "d"], &["O", "O", "B-X", "O", "O"]).unwrap();
        let t = selective_mask(&s, &keywords(&[3]));
        assert_eq!(texts(&t), ["[M]", "E", "c", "[M]"]);
        assert_eq!(t.keyword_origins(), BTreeSet::from([Origin::own(3)]));
    }

    #[test]
    fn nothing_to_mask() {
        let s = TaggedSentence::from_strs("s", &["A", "B"], &["B-X", "I-X"]).unwrap();
        assert_eq!(texts(&selective_mask(&s, &KeywordSet::default())), ["A", "B"]);
        let s = TaggedSentence::from_strs("s", &["a", "B", "c"], &["O", "B-X", "O"]).unwrap();
        assert_eq!(texts(&selective_mask(&s, &keywords(&[0, 2]))), ["a", "B", "c"]);
    }

    #[test]
    fn linearize_flanks_entities() {
        let s = TaggedSentence::from_strs("s", &["john", "smith"], &["B-PER", "I-PER"]).unwrap();
        let t = linearize(&selective_mask(&s, &KeywordSet::default()), &extract_entities(&s)).unwrap();
        assert_eq!(texts(&t), ["<PER>", "john", "smith", "<PER>"]);
        t.check_invariants().unwrap();
    }

    #[test]
    fn linearize_without_entities() {
        let s = TaggedSentence::from_strs("s", &["a", "b"], &["O", "O"]).unwrap();
        let t = selective_mask(&s, &keywords(&[1]));
        assert_eq!(linearize(&t, &[]).unwrap(), t);
    }

    #[test]
    fn adjacent_entities_get_separate_pairs() {
        let s = TaggedSentence::from_strs(
            "s",
            &["john", "paris", "rome", "x"],
            &["B-PER", "B-LOC", "B-LOC", "O"],
        )
        .unwrap();
        let t = linearize(&selective_mask(&s, &KeywordSet::default()), &extract_entities(&s)).unwrap();
        assert_eq!(
            texts(&t),
            ["<PER>", "john", "<PER>", "<LOC>", "paris", "<LOC>", "<LOC>", "rome", "<LOC>", "[M]"]
        );
        t.check_invariants().unwrap();
    }

    #[test]
    fn linearize_rejects_mismatched_spans() {
        let s = TaggedSentence::from_strs("s", &["a", "B"], &["O", "B-X"]).unwrap();
        let t = selective_mask(&s, &KeywordSet::default());
        let wrong = vec![EntitySpan { start: 0, end: 2, label: "X".into(), surface: vec![] }];
        assert!(matches!(linearize(&t, &wrong), Err(TemplateError::Internal { .. })));
        assert!(linearize(&t, &[]).is_err());
        let lin = linearize(&t, &extract_entities(&s)).unwrap();
        assert!(linearize(&lin, &extract_entities(&s)).is_err());
    }

    fn four_keyword_template() -> Template {
        let s = TaggedSentence::from_strs(
            "s",
            &["a", "b", "E", "c", "d", "e"],
            &["O", "O", "B-X", "O", "O", "O"],
        )
        .unwrap();
        let t = selective_mask(&s, &keywords(&[0, 1, 3, 5]));
        linearize(&t, &extract_entities(&s)).unwrap()
    }

    #[test]
    fn forced_rate_masks_exact_count() {
        let t = four_keyword_template();
        assert_eq!(t.keyword_count(), 4);
        for seed in 0..20 {
            let mut rng = rng_from_seed(seed);
            let masked = mask_keywords(&t, 0.5, &mut rng);
            assert_eq!(masked.keyword_count(), 2);
            masked.check_invariants().unwrap();
            assert_eq!(masked.entity_tokens(), t.entity_tokens());
            assert_eq!(masked.marker_labels(), t.marker_labels());
        }
        let mut rng = rng_from_seed(0);
        assert_eq!(mask_keywords(&t, 1.0, &mut rng).keyword_count(), 0);
        assert_eq!(mask_keywords(&t, 0.0, &mut rng), t);
    }

    #[test]
    fn dynamic_mask_without_keywords_is_identity() {
        let s = TaggedSentence::from_strs("s", &["a", "E"], &["O", "B-X"]).unwrap();
        let t = linearize(&selective_mask(&s, &KeywordSet::default()), &extract_entities(&s)).unwrap();
        let mut rng = rng_from_seed(1);
        assert_eq!(dynamic_mask(&t, &DynamicMaskPolicy::default(), &mut rng), t);
    }

    #[test]
    fn rate_is_clamped() {
        let policy = DynamicMaskPolicy { mu: 3.0, sigma: SigmaRule::Fixed(0.0) };
        let mut rng = rng_from_seed(0);
        assert_eq!(policy.sample_rate(4, &mut rng), 1.0);
        let policy = DynamicMaskPolicy { mu: -1.0, sigma: SigmaRule::Fixed(0.5) };
        assert!((0..100).all(|_| policy.sample_rate(4, &mut rng) <= 0.5));
    }

    #[test]
    fn reciprocal_sigma() {
        let p = DynamicMaskPolicy::default();
        assert_eq!(p.sigma_for(4), 0.25);
        assert_eq!(p.sigma_for(0), 0.0);
    }

    #[test]
    fn masked_counts() {
        assert_eq!(masked_count(0.5, 4), 2);
        assert_eq!(masked_count(0.7, 10), 7);
        assert_eq!(masked_count(0.04, 10), 0);
        assert_eq!(masked_count(1.0, 3), 3);
        assert_eq!(masked_count(0.5, 0), 0);
    }
}
