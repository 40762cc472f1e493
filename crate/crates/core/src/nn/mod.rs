//! Minimal differentiable linear algebra: dense matrices, a reverse-mode
//! tape, finite-difference checking, and Adam.

mod gradcheck;
mod mat;
mod params;
mod tape;

pub use gradcheck::{grad_check, GradCheck};
pub use mat::{dot, Mat};
pub use params::{AdamHyper, ParamStore};
pub use tape::{
    softmax, Gradients, NodeId, Tape, FLOPS_ATTENTION_SCORE, FLOPS_LOG, FLOPS_SOFTMAX, FLOPS_TANH, LEAKY_SLOPE,
    PROB_CLAMP,
};
