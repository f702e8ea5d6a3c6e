//! Minimal reverse-mode differentiation over dense 2-D arrays.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use params::{AdamConfig, ParamId, ParamStore};
pub use tape::{sigmoid, SparseMatrix, Tape, Var, PROB_CLAMP};
pub use tensor::Tensor;
