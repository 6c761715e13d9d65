//! Document-level translation toolkit with instrumented context use.
//!
//! The crate builds synthetic discourse-annotated parallel corpora, trains
//! small transformer translation models in three context architectures,
//! and measures how much those models actually rely on context: through
//! perturbation, through conditional information gain, and through
//! attribution over the attention stack.

pub mod attribution;
pub mod corpus;
pub mod decoding;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod tagger;
pub mod training;
