//! Word-level attention maps, their aggregation into a single token-to-token
//! matrix, and keyword selection driven by that matrix.

mod keywords;
mod store;

pub use keywords::{select_keywords, select_keywords_random, KeywordFilter, KeywordSet};
pub use store::{
    read_record, write_record, AttentionProvider, AttentionStore, AttentionWriter, HttpAttentionProvider,
    InMemoryAttention, StoreManifest,
};

use crate::corpus::EntitySpan;
use ndarray::{s, Array1, Array2, Array4, ArrayView2, Axis};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttentionError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("attention map for {id:?}: {message}")]
    Invalid { id: String, message: String },
    #[error("no attention map for sentence {0:?}")]
    Missing(String),
    #[error("attention store: {0}")]
    Io(String),
    #[error(transparent)]
    Http(#[from] crate::http::HttpError),
}

/// Attention scores for one sentence, indexed `[layer][head][from][to]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    sentence_id: String,
    scores: Array4<f32>,
}

impl AttentionMap {
    pub fn new(sentence_id: impl Into<String>, scores: Array4<f32>) -> Result<Self, AttentionError> {
        let sentence_id = sentence_id.into();
        let (layers, heads, from, to) = scores.dim();
        let invalid = |message: String| AttentionError::Invalid { id: sentence_id.clone(), message };
        if layers == 0 || heads == 0 {
            return Err(invalid(format!("shape has {layers} layers and {heads} heads")));
        }
        if from != to {
            return Err(invalid(format!("token axes differ: {from} x {to}")));
        }
        if let Some(bad) = scores.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(invalid(format!("score {bad} is negative or not finite")));
        }
        Ok(Self { sentence_id, scores })
    }

    /// Build from a flat row-major buffer of shape `[layers][heads][len][len]`.
    pub fn from_flat(
        sentence_id: impl Into<String>,
        layers: usize,
        heads: usize,
        len: usize,
        data: Vec<f32>,
    ) -> Result<Self, AttentionError> {
        let sentence_id = sentence_id.into();
        let scores = Array4::from_shape_vec((layers, heads, len, len), data)
            .map_err(|e| AttentionError::Invalid { id: sentence_id.clone(), message: e.to_string() })?;
        Self::new(sentence_id, scores)
    }

    pub fn sentence_id(&self) -> &str {
        &self.sentence_id
    }

    pub fn scores(&self) -> &Array4<f32> {
        &self.scores
    }

    pub fn n_layers(&self) -> usize {
        self.scores.dim().0
    }

    pub fn n_heads(&self) -> usize {
        self.scores.dim().1
    }

    /// Token count (the size of both token axes).
    pub fn len(&self) -> usize {
        self.scores.dim().2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pool a subword-level map to word level.
///
/// `alignment[w]` lists the subword positions of word `w`. The lists must be
/// non-empty and, concatenated, enumerate `0..n_subwords` in order. Each
/// word-to-word score is the sum of the subword block it covers.
pub fn collapse_subwords(
    raw: &AttentionMap,
    alignment: &[Vec<usize>],
) -> Result<AttentionMap, AttentionError> {
    let subwords = raw.len();
    let mut expected = 0usize;
    for (w, pieces) in alignment.iter().enumerate() {
        if pieces.is_empty() {
            return Err(AttentionError::Argument(format!("word {w} has no subwords")));
        }
        for &p in pieces {
            if p != expected {
                return Err(AttentionError::Argument(format!(
                    "alignment is not an ordered partition: word {w} lists subword {p}, expected {expected}"
                )));
            }
            expected += 1;
        }
    }
    if expected != subwords {
        return Err(AttentionError::Argument(format!(
            "alignment covers {expected} subwords but the map has {subwords}"
        )));
    }

    let words = alignment.len();
    let (layers, heads, _, _) = raw.scores.dim();
    let mut out = Array4::<f32>::zeros((layers, heads, words, words));
    for l in 0..layers {
        for h in 0..heads {
            let slice = raw.scores.slice(s![l, h, .., ..]);
            for (wi, rows) in alignment.iter().enumerate() {
                for (wj, cols) in alignment.iter().enumerate() {
                    let mut total = 0.0f32;
                    for &r in rows {
                        for &c in cols {
                            total += slice[[r, c]];
                        }
                    }
                    out[[l, h, wi, wj]] = total;
                }
            }
        }
    }
    AttentionMap::new(raw.sentence_id.clone(), out)
}

/// Sum over heads within each layer, then average over the last `layers`
/// layers. Returns a `len x len` matrix whose row `i` is what token `i`
/// attends to.
pub fn aggregate(map: &AttentionMap, layers: usize) -> Result<Array2<f64>, AttentionError> {
    let n = map.n_layers();
    if layers == 0 || layers > n {
        return Err(AttentionError::Argument(format!("layer count {layers} outside 1..={n}")));
    }
    let last = map.scores.slice(s![n - layers.., .., .., ..]).mapv(f64::from);
    let per_layer = last.sum_axis(Axis(1));
    Ok(per_layer.sum_axis(Axis(0)) / layers as f64)
}

/// Attention paid by the span's tokens to every token: the sum of the span's
/// rows of `matrix`.
pub fn entity_salience(matrix: ArrayView2<'_, f64>, span: &EntitySpan) -> Array1<f64> {
    matrix.slice(s![span.start..span.end, ..]).sum_axis(Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn span(start: usize, end: usize) -> EntitySpan {
        EntitySpan { start, end, label: "X".into(), surface: vec![] }
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(AttentionMap::from_flat("s", 1, 1, 2, vec![0.0, -1.0, 0.0, 0.0]).is_err());
        assert!(AttentionMap::from_flat("s", 1, 1, 2, vec![0.0, f32::NAN, 0.0, 0.0]).is_err());
        assert!(AttentionMap::from_flat("s", 1, 1, 2, vec![0.0; 3]).is_err());
        assert!(AttentionMap::new("s", Array4::zeros((1, 1, 2, 3))).is_err());
    }

    #[test]
    fn identity_alignment_is_a_no_op() {
        let data: Vec<f32> = (0..2 * 3 * 3).map(|v| v as f32).collect();
        let map = AttentionMap::from_flat("s", 1, 2, 3, data).unwrap();
        let out = collapse_subwords(&map, &[vec![0], vec![1], vec![2]]).unwrap();
        assert_eq!(out, map);
    }

    #[test]
    fn split_word_doubles_row_sums() {
        // three subwords, word 0 = {0, 1}, word 1 = {2}
        let raw = AttentionMap::from_flat("s", 1, 1, 3, vec![0.25; 9]).unwrap();
        let out = collapse_subwords(&raw, &[vec![0, 1], vec![2]]).unwrap();
        let m = out.scores().slice(s![0, 0, .., ..]).to_owned();
        assert_eq!(m, array![[1.0f32, 0.5], [0.5, 0.25]]);
        // word 0's row sum is twice the raw per-subword row sum of 0.75
        assert_eq!(m.row(0).sum(), 1.5);
    }

    #[test]
    fn alignment_must_partition() {
        let raw = AttentionMap::from_flat("s", 1, 1, 2, vec![0.0; 4]).unwrap();
        assert!(collapse_subwords(&raw, &[vec![0], vec![]]).is_err());
        assert!(collapse_subwords(&raw, &[vec![1], vec![0]]).is_err());
        assert!(collapse_subwords(&raw, &[vec![0]]).is_err());
        assert!(collapse_subwords(&raw, &[vec![0], vec![1, 2]]).is_err());
    }

    #[test]
    fn single_slice_aggregate() {
        let map = AttentionMap::from_flat("s", 1, 1, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(aggregate(&map, 1).unwrap(), array![[1.0, 2.0], [3.0, 4.0]]);
    }

    #[test]
    fn mean_over_layers() {
        let mut data = vec![1.0f32; 4];
        data.extend([3.0f32; 4]);
        let map = AttentionMap::from_flat("s", 2, 1, 2, data).unwrap();
        assert_eq!(aggregate(&map, 2).unwrap(), Array2::from_elem((2, 2), 2.0));
        // only the last layer
        assert_eq!(aggregate(&map, 1).unwrap(), Array2::from_elem((2, 2), 3.0));
    }

    #[test]
    fn heads_are_summed() {
        let map = AttentionMap::from_flat("s", 1, 3, 1, vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(aggregate(&map, 1).unwrap(), array![[7.0]]);
    }

    #[test]
    fn layer_count_out_of_range() {
        let map = AttentionMap::from_flat("s", 2, 1, 1, vec![1.0, 1.0]).unwrap();
        assert!(aggregate(&map, 0).is_err());
        assert!(aggregate(&map, 3).is_err());
    }

    #[test]
    fn salience_sums_span_rows() {
        let m = array![[1.0, 0.0, 2.0], [0.0, 1.0, 1.0], [5.0, 5.0, 5.0]];
        assert_eq!(entity_salience(m.view(), &span(0, 2)), array![1.0, 1.0, 3.0]);
        assert_eq!(entity_salience(m.view(), &span(2, 3)), array![5.0, 5.0, 5.0]);
        let zero = Array2::<f64>::zeros((3, 3));
        assert_eq!(entity_salience(zero.view(), &span(0, 3)), Array1::<f64>::zeros(3));
    }
}
