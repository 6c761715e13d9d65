//! Read-only capture of the quantities attention attribution needs. Capture
//! copies values out of the forward pass and never feeds back into it.

/// Which part of the assembled input a position belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    SourceContext,
    CurrentSource,
    TargetContext,
    TargetPrefix,
}

/// One attention site: post-softmax weights, per-head value-vector norms, and
/// the residual-stream input norms of the query positions.
#[derive(Clone, Debug)]
pub struct AttnTrace {
    pub n_heads: usize,
    pub rows: usize,
    pub cols: usize,
    /// Head-major weights, `weights[h * rows * cols + i * cols + j]`.
    pub weights: Vec<f64>,
    /// Head-major key-position value norms, `value_norms[h * cols + j]`.
    pub value_norms: Vec<f64>,
    /// Euclidean norm of the query-side residual input, one per row.
    pub residual_norms: Vec<f64>,
}

impl AttnTrace {
    pub fn weight(&self, h: usize, i: usize, j: usize) -> f64 {
        self.weights[h * self.rows * self.cols + i * self.cols + j]
    }

    pub fn value_norm(&self, h: usize, j: usize) -> f64 {
        self.value_norms[h * self.cols + j]
    }
}

/// Self-attention traces for one encoder stack, outermost layer last.
#[derive(Clone, Debug)]
pub struct EncoderTrace {
    pub layers: Vec<AttnTrace>,
}

#[derive(Clone, Debug)]
pub struct DecoderLayerTrace {
    pub self_attn: AttnTrace,
    pub cross_attn: AttnTrace,
}

#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Main encoder (the only one for sentence and concat_2to2).
    pub encoder: EncoderTrace,
    /// multi_encoder context encoders; None when the block is empty or the
    /// architecture has no such encoder.
    pub encoder_sc: Option<EncoderTrace>,
    pub encoder_tc: Option<EncoderTrace>,
    pub decoder: Vec<DecoderLayerTrace>,
    /// Segment label per concatenated encoder-memory position.
    pub encoder_segments: Vec<Segment>,
    /// Segment label per decoder input position.
    pub decoder_segments: Vec<Segment>,
}
