//! Attention-guided, entity-preserving data augmentation for low-resource
//! sequence labeling.
//!
//! The crate turns BIO-tagged sentences into templates that keep every
//! entity plus the context words its entities attend to most, hands those
//! templates to a pluggable seq2seq denoiser, and turns the generations back
//! into tagged sentences. Optional template mixing pairs a sentence with a
//! semantically similar neighbour to diversify the output.
//!
//! Module map:
//!
//! - [`corpus`]: sentences, IOB2 validation, CoNLL I/O, stratified sampling
//! - [`attention`]: attention-map storage, aggregation and keyword selection
//! - [`templating`]: selective masking, label linearization, dynamic masking
//! - [`mixner`]: embedding index, partner retrieval and template mixing
//! - [`denoiser`]: training pairs and the denoiser backends
//! - [`pipeline`]: the end-to-end generation loop, post-processing, LwTR
//! - [`evaluation`]: diversity, span-level F1 and perplexity aggregation

pub mod attention;
pub mod corpus;
pub mod denoiser;
pub mod evaluation;
pub mod http;
pub mod mixner;
pub mod pipeline;
pub mod seed;
pub mod templating;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

/// Round `x` up, tolerating floating-point noise just above an integer.
pub(crate) fn ceil_tolerant(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}
