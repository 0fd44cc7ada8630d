//! Single-spike feed-forward SNN with exact spike-time gradients.
//!
//! Neurons are non-leaky integrate-and-fire units with exponentially decaying
//! synaptic current kernels. In the z-domain (`z = exp(t)`) the first spike
//! time of a neuron is a rational function of its causal inputs, so forward
//! and backward passes are exact.

mod layer;
mod loss;
mod network;

pub(crate) use layer::accumulate_backward;
pub use layer::{
    backward_layer, forward_layer, CausalSet, LayerGradient, TemporalLayer, ZSpikeVector,
    DENOM_EPS, V_THRESHOLD,
};
pub use loss::{z_loss, Z_MAX};
pub use network::{BatchGradients, ColumnSums, ForwardTrace, TemporalNetwork};
