use aclm_core::attention::{aggregate, select_keywords, AttentionMap, KeywordFilter, KeywordSet};
use aclm_core::corpus::{
    decode_spans, extract_entities, parse_conll, repair_bio, serialize_conll, stratified_sample,
    validate_bio, ParseOptions, TaggedSentence,
};
use aclm_core::evaluation::{diversity, length_bucket, micro_f1};
use aclm_core::mixner::{cosine_similarity, mix};
use aclm_core::pipeline::{baseline_lwtr, label_inventory};
use aclm_core::seed::rng_from_seed;
use aclm_core::templating::{
    delinearize, dynamic_mask, linearize, linearized_original, mask_keywords, masked_count, render,
    selective_mask, DynamicMaskPolicy, RenderVocab, Template, TemplateElement,
};
use aclm_core::testkit::random_sentence;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

fn sentence(seed: u64, max_len: usize) -> TaggedSentence {
    random_sentence(&mut rng_from_seed(seed), &seed.to_string(), 1, max_len, 3)
}

fn random_keywords(s: &TaggedSentence, seed: u64) -> KeywordSet {
    let mut rng = rng_from_seed(seed);
    let indices: BTreeSet<usize> =
        (0..s.len()).filter(|&i| !s.is_entity_token(i) && rng.random_bool(0.4)).collect();
    KeywordSet { indices: indices.clone(), per_entity: BTreeMap::from([(0, indices)]) }
}

fn full_template(s: &TaggedSentence, seed: u64) -> Template {
    let masked = selective_mask(s, &random_keywords(s, seed));
    linearize(&masked, &extract_entities(s)).unwrap()
}

fn entity_surface(s: &TaggedSentence) -> Vec<String> {
    extract_entities(s).into_iter().flat_map(|e| e.surface).collect()
}

fn no_adjacent_masks(t: &Template) -> bool {
    t.elements().windows(2).all(|w| !(w[0].is_mask() && w[1].is_mask()))
}

/// Spans from tags by a direct left-to-right scan.
fn spans_by_scan(tags: &[String]) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        if let Some(label) = tags[i].strip_prefix("B-") {
            let mut j = i + 1;
            while j < tags.len() && tags[j].strip_prefix("I-") == Some(label) {
                j += 1;
            }
            out.push((i, j, label.to_string()));
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

fn tag_strategy(max_len: usize) -> impl Strategy<Value = Vec<String>> {
    let tag = prop::sample::select(vec!["O", "B-A", "I-A", "B-B", "I-B", "B-C", "I-C"]);
    prop::collection::vec(tag, 1..=max_len).prop_map(|tags| repair_bio(&tags))
}

fn tagged(id: &str, tags: Vec<String>) -> TaggedSentence {
    let tokens = (0..tags.len()).map(|i| format!("t{i}")).collect();
    TaggedSentence::new(id, tokens, tags).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conll_round_trip(seeds in prop::collection::vec(any::<u64>(), 1..6)) {
        let corpus: Vec<TaggedSentence> = seeds
            .iter()
            .enumerate()
            .map(|(i, &s)| sentence(s, 12).with_id(format!("s{i}")))
            .collect();
        let text = serialize_conll(&corpus).unwrap();
        prop_assert_eq!(parse_conll(&text, ParseOptions::default()).unwrap(), corpus);
    }

    #[test]
    fn repaired_tags_are_valid(tags in prop::collection::vec(
        prop::sample::select(vec!["O", "B-A", "I-A", "I-B", "B-B"]), 0..20)
    ) {
        let repaired = repair_bio(&tags);
        prop_assert!(validate_bio(&repaired).is_empty());
        prop_assert_eq!(decode_spans(&repaired), spans_by_scan(&repaired));
    }

    #[test]
    fn templates_keep_invariants(seed in any::<u64>()) {
        let s = sentence(seed, 16);
        let t = full_template(&s, seed);
        prop_assert!(t.check_invariants().is_ok());
        prop_assert!(no_adjacent_masks(&t));
        prop_assert_eq!(t.entity_tokens(), entity_surface(&s));
        prop_assert_eq!(t.marker_labels().len(), 2 * extract_entities(&s).len());

        let policy = DynamicMaskPolicy::default();
        let masked = dynamic_mask(&t, &policy, &mut rng_from_seed(seed ^ 1));
        prop_assert!(masked.check_invariants().is_ok());
        prop_assert_eq!(masked.entity_tokens(), t.entity_tokens());
        prop_assert_eq!(masked.marker_labels(), t.marker_labels());
        prop_assert!(masked.keyword_origins().is_subset(&t.keyword_origins()));
    }

    #[test]
    fn masking_removes_exact_count(seed in any::<u64>(), rate in 0.0f64..=1.0) {
        let s = sentence(seed, 16);
        let t = full_template(&s, seed);
        let k = t.keyword_count();
        let out = mask_keywords(&t, rate, &mut rng_from_seed(seed));
        prop_assert_eq!(out.keyword_count(), k - masked_count(rate, k));
    }

    #[test]
    fn delinearize_inverts_linearize(seed in any::<u64>(), tagged_style in any::<bool>()) {
        let s = sentence(seed, 16);
        let vocab = if tagged_style {
            RenderVocab { marker_style: aclm_core::templating::MarkerStyle::Tagged, ..Default::default() }
        } else {
            RenderVocab::default()
        };
        let t = linearized_original(&s).unwrap();
        let labels: BTreeSet<String> = ["PER", "LOC", "ORG"].iter().map(|l| l.to_string()).collect();
        // bare labels are ambiguous when a token spells a label; the generator never does that
        let back = delinearize(s.id(), &render(&t, &vocab), &labels, &vocab).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn mixing_keeps_both_parents(a in any::<u64>(), b in any::<u64>()) {
        let (sa, sb) = (sentence(a, 10), sentence(b, 10).with_id("partner"));
        let (ta, tb) = (full_template(&sa, a), full_template(&sb, b));
        let m = mix(&ta, &tb);
        prop_assert!(m.check_invariants().is_ok());
        prop_assert!(no_adjacent_masks(&m));
        let mut entities = ta.entity_tokens();
        entities.extend(tb.entity_tokens());
        prop_assert_eq!(m.entity_tokens(), entities);
        prop_assert_eq!(m.partner_id(), Some("partner"));

        // a perfect reconstruction of both parents parses to both span lists
        let vocab = RenderVocab::default();
        let mut tokens = render(&linearized_original(&sa).unwrap(), &vocab);
        tokens.extend(render(&linearized_original(&sb).unwrap(), &vocab));
        let labels: BTreeSet<String> = ["PER", "LOC", "ORG"].iter().map(|l| l.to_string()).collect();
        let parsed = delinearize("m", &tokens, &labels, &vocab).unwrap();
        let mut expected: Vec<(usize, usize, String)> = decode_spans(sa.tags());
        expected.extend(decode_spans(sb.tags()).into_iter().map(|(s, e, l)| (s + sa.len(), e + sa.len(), l)));
        prop_assert_eq!(decode_spans(parsed.tags()), expected);
    }

    #[test]
    fn keyword_selection_is_scale_invariant_and_monotone(seed in any::<u64>(), scale in 0.01f32..100.0) {
        let s = sentence(seed, 12);
        let mut rng = rng_from_seed(seed);
        let n = s.len();
        let data: Vec<f32> = (0..2 * 2 * n * n).map(|_| rng.random::<f32>()).collect();
        let scaled: Vec<f32> = data.iter().map(|v| v * scale).collect();
        let base = aggregate(&AttentionMap::from_flat("x", 2, 2, n, data).unwrap(), 2).unwrap();
        let other = aggregate(&AttentionMap::from_flat("x", 2, 2, n, scaled).unwrap(), 2).unwrap();
        let filter = KeywordFilter::none();
        let k1 = select_keywords(&s, base.view(), 0.3, &filter).unwrap();
        let k2 = select_keywords(&s, other.view(), 0.3, &filter).unwrap();
        prop_assert_eq!(&k1.indices, &k2.indices);
        let more = select_keywords(&s, base.view(), 0.6, &filter).unwrap();
        prop_assert!(k1.indices.is_subset(&more.indices));
        prop_assert!(select_keywords(&s, base.view(), 0.0, &filter).unwrap().indices.is_empty());
    }

    #[test]
    fn aggregation_is_linear(seed in any::<u64>(), len in 1usize..8) {
        let mut rng = rng_from_seed(seed);
        let size = 3 * 2 * len * len;
        let a: Vec<f32> = (0..size).map(|_| rng.random::<f32>()).collect();
        let b: Vec<f32> = (0..size).map(|_| rng.random::<f32>()).collect();
        let sum: Vec<f32> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let agg = |v: Vec<f32>| aggregate(&AttentionMap::from_flat("x", 3, 2, len, v).unwrap(), 2).unwrap();
        let lhs = agg(sum);
        let rhs = agg(a) + agg(b);
        for (x, y) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn micro_f1_matches_span_counting(
        pairs in prop::collection::vec((tag_strategy(8), tag_strategy(8)), 1..6)
    ) {
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for (i, (g, p)) in pairs.into_iter().enumerate() {
            let n = g.len().min(p.len());
            gold.push(tagged(&i.to_string(), repair_bio(&g[..n])));
            pred.push(tagged(&i.to_string(), repair_bio(&p[..n])));
        }
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (g, p) in gold.iter().zip(&pred) {
            let gs = spans_by_scan(g.tags());
            let ps = spans_by_scan(p.tags());
            tp += ps.iter().filter(|s| gs.contains(s)).count();
            fp += ps.iter().filter(|s| !gs.contains(s)).count();
            fn_ += gs.iter().filter(|s| !ps.contains(s)).count();
        }
        let r = micro_f1(&pred, &gold).unwrap();
        prop_assert_eq!((r.counts.tp, r.counts.fp, r.counts.fn_), (tp, fp, fn_));
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let rc = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f = if p + rc == 0.0 { 0.0 } else { 2.0 * p * rc / (p + rc) };
        prop_assert_eq!(r.micro_f1, f);

        let bucket_tp: usize = r.per_length_bucket.values().map(|s| s.counts.tp).sum();
        let bucket_fn: usize = r.per_length_bucket.values().map(|s| s.counts.fn_).sum();
        prop_assert_eq!((bucket_tp, bucket_fn), (tp, fn_));
        for g in &gold {
            prop_assert!(r.per_length_bucket.contains_key(length_bucket(g.len())));
        }
    }

    #[test]
    fn diversity_ignores_pair_order(seeds in prop::collection::vec(any::<u64>(), 1..8), shuffle in any::<u64>()) {
        let pairs: Vec<(TaggedSentence, TaggedSentence)> =
            seeds.iter().map(|&s| (sentence(s, 10), sentence(s.wrapping_add(1), 10))).collect();
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rng_from_seed(shuffle));
        let a = diversity(&pairs).unwrap();
        let b = diversity(&shuffled).unwrap();
        prop_assert!((a.diversity_e - b.diversity_e).abs() < 1e-9);
        prop_assert!((a.diversity_n - b.diversity_n).abs() < 1e-9);
        prop_assert!((a.diversity_l - b.diversity_l).abs() < 1e-9);
        prop_assert!((0.0..=100.0).contains(&a.diversity_e) && (0.0..=100.0).contains(&a.diversity_n));
    }

    #[test]
    fn stratified_subsets_partition(n in 1usize..40, take in 0usize..40, seed in any::<u64>()) {
        let corpus: Vec<TaggedSentence> =
            (0..n).map(|i| sentence(seed.wrapping_add(i as u64), 8).with_id(i.to_string())).collect();
        let take = take.min(n);
        let (subset, rest) = stratified_sample(&corpus, take, seed).unwrap();
        prop_assert_eq!(subset.len(), take);
        prop_assert_eq!(subset.len() + rest.len(), n);
        let mut ids: Vec<String> = subset.iter().chain(&rest).map(|s| s.id().to_string()).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
    }

    #[test]
    fn lwtr_keeps_tags(seeds in prop::collection::vec(any::<u64>(), 1..5), seed in any::<u64>()) {
        let corpus: Vec<TaggedSentence> =
            seeds.iter().enumerate().map(|(i, &s)| sentence(s, 10).with_id(i.to_string())).collect();
        let inventory = label_inventory(&corpus);
        let out = baseline_lwtr(&corpus, 2, 0.5, seed).unwrap();
        prop_assert_eq!(out.len(), corpus.len() * 3);
        for (doc, source) in out[corpus.len()..].iter().zip(corpus.iter().cycle()) {
            prop_assert_eq!(doc.sentence.tags(), source.tags());
            for (t, tag) in doc.sentence.tokens().iter().zip(doc.sentence.tags()) {
                prop_assert!(inventory[tag].contains(t));
            }
        }
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(
        a in prop::collection::vec(-10.0f64..10.0, 3),
        b in prop::collection::vec(-10.0f64..10.0, 3),
    ) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-6) && b.iter().any(|v| v.abs() > 1e-6));
        let ab = cosine_similarity(&a, &b).unwrap();
        prop_assert_eq!(ab, cosine_similarity(&b, &a).unwrap());
        prop_assert!((-1.0..=1.0).contains(&ab));
    }
}

#[test]
fn only_entity_templates_hold_markers_entities_and_masks() {
    for seed in 0..100 {
        let s = sentence(seed, 12);
        let t = linearize(&selective_mask(&s, &KeywordSet::default()), &extract_entities(&s)).unwrap();
        assert!(t
            .elements()
            .iter()
            .all(|e| e.is_mask() || e.is_entity() || matches!(e, TemplateElement::LabelMarker { .. })));
    }
}
