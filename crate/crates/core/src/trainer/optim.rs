use crate::container::{put_f64s, put_u64, Reader};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    SgdMomentum { momentum: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-layer optimizer buffers. The first buffer is the momentum signal read
/// by the momentum growth rule (Adam's first moment or the SGD velocity).
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, layer_sizes: &[usize]) -> Self {
        let second = match kind {
            OptimizerKind::Adam { .. } => layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            OptimizerKind::SgdMomentum { .. } => Vec::new(),
        };
        Self {
            kind,
            step: 0,
            first: layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn layer_count(&self) -> usize {
        self.first.len()
    }

    pub fn momentum(&self, layer: usize) -> &[f64] {
        &self.first[layer]
    }

    /// Advances the step counter; call once per iteration before the
    /// per-layer [`Optimizer::update`] calls.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    /// Updates the buffers of `layer` with `grad` and applies the step to `params`.
    pub fn update(&mut self, layer: usize, params: &mut [f64], grad: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grad.len());
        match self.kind {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step.max(1) as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let m = &mut self.first[layer];
                let v = &mut self.second[layer];
                for k in 0..params.len() {
                    let g = grad[k];
                    m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                    v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                    params[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
                }
            }
            OptimizerKind::SgdMomentum { momentum } => {
                let vel = &mut self.first[layer];
                for k in 0..params.len() {
                    vel[k] = momentum * vel[k] + grad[k];
                    params[k] -= lr * vel[k];
                }
            }
        }
    }

    pub(crate) fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self.kind {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                put_u64(&mut out, 0);
                put_f64s(&mut out, &[beta1, beta2, eps]);
            }
            OptimizerKind::SgdMomentum { momentum } => {
                put_u64(&mut out, 1);
                put_f64s(&mut out, &[momentum, 0.0, 0.0]);
            }
        }
        put_u64(&mut out, self.step);
        put_u64(&mut out, self.first.len() as u64);
        for (k, buf) in self.first.iter().enumerate() {
            put_u64(&mut out, buf.len() as u64);
            put_f64s(&mut out, buf);
            if let Some(second) = self.second.get(k) {
                put_f64s(&mut out, second);
            }
        }
        out
    }

    pub(crate) fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let tag = r.u64()?;
        let params = [r.f64()?, r.f64()?, r.f64()?];
        let kind = match tag {
            0 => OptimizerKind::Adam {
                beta1: params[0],
                beta2: params[1],
                eps: params[2],
            },
            1 => OptimizerKind::SgdMomentum {
                momentum: params[0],
            },
            other => return Err(Error::Corrupt(format!("unknown optimizer tag {other}"))),
        };
        let step = r.u64()?;
        let layers = r.u64()? as usize;
        let mut first = Vec::new();
        let mut second = Vec::new();
        for _ in 0..layers {
            let n = r.u64()? as usize;
            first.push(r.f64s(n)?);
            if matches!(kind, OptimizerKind::Adam { .. }) {
                second.push(r.f64s(n)?);
            }
        }
        if !r.is_done() {
            return Err(Error::Corrupt("trailing optimizer bytes".into()));
        }
        Ok(Self {
            kind,
            step,
            first,
            second,
        })
    }
}
