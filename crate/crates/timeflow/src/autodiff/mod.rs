//! Reverse-mode automatic differentiation over dense f64 arrays.
//!
//! Built for one purpose: letting an outer optimization differentiate
//! through the gradient steps of an inner one. See [`tape::Tape::backward`]
//! and its `create_graph` flag.
//!
//! A tape is single-threaded. Distinct tapes over shared read-only
//! parameter tensors may run concurrently; parameter mutation requires
//! exclusive access.

mod tape;
mod tensor;

pub use tape::{GradMap, NodeId, Tape};
pub use tensor::{axpy, Tensor};
