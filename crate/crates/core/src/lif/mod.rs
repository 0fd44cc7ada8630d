//! Leaky integrate-and-fire networks trained with surrogate gradients.
//!
//! Each step a neuron integrates `v = τ·u + I`, spikes when `v >= V_th` and
//! resets to zero. Projections are dense or convolutional and carry a
//! connection mask; the last projection feeds a readout that only sums its
//! input over time. Training minimises the per-step cross-entropy averaged
//! over time, back-propagated through time with a rectangular surrogate for
//! the spike derivative and the reset treated as a constant.

mod loss;
mod network;
mod neuron;
mod ops;

pub use loss::{cross_entropy, tet_loss, ReadoutAccumulator};
pub use network::{Connectivity, LifArchitecture, LifNetwork, LifTrace, Stage, SynapticLayer};
pub(crate) use neuron::fire;
pub use neuron::{lif_step, surrogate_grad, LifConfig, LifLayerState};
pub use ops::{avg_pool2, masked_conv_forward, masked_dense_forward, ConvShape, Padding};
