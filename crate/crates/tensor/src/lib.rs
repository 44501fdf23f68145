//! Tape-based reverse-mode automatic differentiation for small dense models.
//!
//! A [`Graph`] records every forward operation on a tape; [`Graph::backward`]
//! walks the tape in reverse and accumulates gradients into the recorded
//! parameter leaves. Parameters live in a [`ParameterSet`] (a named map of
//! [`Tensor`]s) that is owned by the caller, stepped by [`Adam`], and
//! serialized through the [`checkpoint`] module.
//!
//! All math is generic over the scalar type via [`Scalar`] (implemented for
//! `f32` and `f64`); the concrete aliases [`Tensor64`], [`Graph64`] and
//! [`ParameterSet64`] are what downstream crates normally use, since gradient
//! checking only has headroom at double precision.
//!
//! Execution is eager and single-threaded: values are computed when an op is
//! recorded, so intermediate results can be inspected mid-build. Distinct
//! graphs may run on different threads; a single graph may not.

pub mod checkpoint;
mod error;
mod gradcheck;
mod graph;
pub mod nn;
mod optim;
mod rng;
mod scalar;
mod tensor;

pub use error::TensorError;
pub use gradcheck::gradient_check;
pub use graph::{Graph, NodeId};
pub use optim::Adam;
pub use rng::{fnv1a64, Rng};
pub use scalar::Scalar;
pub use tensor::{ParameterSet, Tensor};

/// Single-precision tensor.
pub type Tensor32 = Tensor<f32>;
/// Double-precision tensor, the default for everything trained in this workspace.
pub type Tensor64 = Tensor<f64>;
/// Double-precision tape.
pub type Graph64 = Graph<f64>;
/// Double-precision parameter map.
pub type ParameterSet64 = ParameterSet<f64>;

pub type Result<T> = std::result::Result<T, TensorError>;
