//! Dense f64 tensor arithmetic with reverse-mode differentiation.
//!
//! A [`Tape`] records every operation of a forward pass; [`Tape::backward`]
//! replays the record once in reverse order and accumulates exact analytic
//! gradients into every node that needs them. Graphs are rebuilt per forward
//! pass and dropped afterwards, which keeps the engine simple and the
//! gradients easy to audit against finite differences.
//!
//! All kernels are single-threaded with a fixed accumulation order, so two
//! runs over the same inputs produce bit-identical results.

mod gradcheck;
mod tape;

pub use gradcheck::{gradient_check, gradient_check_with, GradCheckReport};
pub use tape::{Tape, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("dimension mismatch in {op}: lhs shape {lhs:?}, rhs shape {rhs:?}")]
    Dim {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("target id {id} out of vocabulary range {vocab}")]
    Vocabulary { id: u32, vocab: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}
