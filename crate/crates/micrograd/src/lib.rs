//! A small dense-tensor reverse-mode differentiation engine.
//!
//! Only the operations a compact transformer needs are provided: matrix
//! products, elementwise arithmetic, trailing-axis row broadcasts, softmax,
//! layer normalization, SiLU, embedding lookup, masking and a mean squared
//! error loss. Tensors are at most rank 2 for the matrix operations.

mod adam;
mod checkpoint;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{Scalar, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not match data length {len}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("expected a matrix, got shape {0:?}")]
    NotMatrix(Vec<usize>),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("softmax row has no finite entry")]
    EmptySoftmaxRow,
    #[error("concat of zero tensors")]
    EmptyConcat,
    #[error("checkpoint format error at byte {offset}: {reason}")]
    Checkpoint { offset: u64, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
