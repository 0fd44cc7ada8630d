//! Spiking neural networks trained with sparse, evolving connectivity.
//!
//! Layers start from Erdős–Rényi masks and are periodically pruned and
//! regrown at a fixed per-layer budget. Two network families share the
//! trainer: a single-spike temporally coded MLP with exact z-domain
//! gradients ([`temporal`]) and multi-step LIF networks trained by
//! surrogate-gradient BPTT ([`lif`]).

pub mod cli;
pub mod container;
pub mod datasets;
pub mod error;
pub mod lif;
pub mod metrics;
pub mod temporal;
pub mod tensor;
pub mod topology;
pub mod trainer;

pub use error::{Error, Result};
