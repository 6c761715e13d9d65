//! The three context architectures as forward computations with optional
//! attribution tracing.

mod batch;
mod checkpoint;
mod forward;
mod params;
mod trace;

pub use batch::{build_batch, BatchLayout, SequenceBatch, TargetContext};
pub use forward::{EncodeMulti, Forward};
pub use params::{Model, Param, ParamLeaves};
pub use trace::{AttnTrace, DecoderLayerTrace, EncoderTrace, ForwardTrace, Segment};

use crate::numerics::NumericsError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    Sentence,
    Concat2to2,
    MultiEncoder,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Sentence => "sentence",
            Architecture::Concat2to2 => "concat_2to2",
            Architecture::MultiEncoder => "multi_encoder",
        }
    }

    pub fn parse(s: &str) -> Option<Architecture> {
        match s {
            "sentence" => Some(Architecture::Sentence),
            "concat_2to2" => Some(Architecture::Concat2to2),
            "multi_encoder" => Some(Architecture::MultiEncoder),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub arch: Architecture,
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ffn: usize,
    pub dropout: f64,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub max_positions: usize,
    /// Maximum context sentences K; dynamic context draws from 0..=K.
    pub max_context: usize,
    /// Multi-encoder only: context encoders reuse the main token embeddings
    /// of their side instead of owning separate tables.
    pub tied_context_embeddings: bool,
}

impl ModelConfig {
    /// Desk-scale defaults; the architecture topology matches the full-size
    /// setup with every dimension shrunk so training takes minutes.
    pub fn desk(arch: Architecture, src_vocab: usize, tgt_vocab: usize) -> ModelConfig {
        ModelConfig {
            arch,
            n_layers: 2,
            d_model: 64,
            n_heads: 4,
            d_ffn: 128,
            dropout: 0.1,
            src_vocab,
            tgt_vocab,
            max_positions: 256,
            max_context: 5,
            tied_context_embeddings: true,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ModelError::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_layers == 0 || self.d_ffn == 0 {
            return Err(ModelError::Config("n_layers and d_ffn must be positive".into()));
        }
        if self.src_vocab < 5 || self.tgt_vocab < 5 {
            return Err(ModelError::Config(
                "vocabularies must at least cover the reserved tokens".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!("dropout {} outside [0,1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("model configuration: {0}")]
    Config(String),
    #[error("architecture mismatch: {0}")]
    Architecture(String),
    #[error("sequence length {len} exceeds max positions {max}")]
    Length { len: usize, max: usize },
    #[error("malformed batch: {0}")]
    Batch(String),
    #[error("missing generated context: {0}")]
    Context(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
