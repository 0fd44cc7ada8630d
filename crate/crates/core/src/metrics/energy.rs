use crate::error::{Error, Result};

/// Energy per synaptic operation on two platforms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyModel {
    pub joules_per_op_gpu: f64,
    pub joules_per_op_neuromorphic: f64,
}

impl Default for EnergyModel {
    /// Per-operation costs of a fully-connected 784-800-10 network
    /// (635,200 connections) drawing 1.13e-5 J on a GPU and 7.95e-6 J on
    /// neuromorphic hardware.
    fn default() -> Self {
        Self {
            joules_per_op_gpu: 1.78e-11,
            joules_per_op_neuromorphic: 1.25e-11,
        }
    }
}

impl EnergyModel {
    pub fn new(joules_per_op_gpu: f64, joules_per_op_neuromorphic: f64) -> Result<Self> {
        for v in [joules_per_op_gpu, joules_per_op_neuromorphic] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "energy per operation must be positive, got {v}"
                )));
            }
        }
        Ok(Self {
            joules_per_op_gpu,
            joules_per_op_neuromorphic,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyEstimate {
    pub joules_gpu: f64,
    pub joules_neuromorphic: f64,
}

/// `ops × joules_per_op` for each platform.
pub fn estimate_energy(ops: u64, model: &EnergyModel) -> EnergyEstimate {
    EnergyEstimate {
        joules_gpu: ops as f64 * model.joules_per_op_gpu,
        joules_neuromorphic: ops as f64 * model.joules_per_op_neuromorphic,
    }
}

/// Active connections of one layer and the synaptic operations they cost
/// per inference time step (equal for dense layers; conv kernels are reused
/// at every output position).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerOps {
    pub connections: u64,
    pub ops_per_step: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub layers: Vec<LayerOps>,
}

impl OpCounts {
    pub fn total_connections(&self) -> u64 {
        self.layers.iter().map(|l| l.connections).sum()
    }

    pub fn total_ops_per_step(&self) -> u64 {
        self.layers.iter().map(|l| l.ops_per_step).sum()
    }
}
