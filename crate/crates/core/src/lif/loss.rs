use crate::error::{Error, Result};

/// Running sum of readout currents: `O(t) = O(t-1) + I(t)`, never leaking or firing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReadoutAccumulator {
    steps: Vec<Vec<f64>>,
}

impl ReadoutAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an accumulator whose `O(t)` are given directly.
    pub fn from_outputs(steps: Vec<Vec<f64>>) -> Self {
        Self { steps }
    }

    pub fn push(&mut self, current: &[f64]) {
        let next = match self.steps.last() {
            Some(prev) => prev.iter().zip(current).map(|(o, i)| o + i).collect(),
            None => current.to_vec(),
        };
        self.steps.push(next);
    }

    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    pub fn output(&self, t: usize) -> &[f64] {
        &self.steps[t]
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.steps.last().map(Vec::as_slice)
    }
}

/// Softmax cross-entropy `logsumexp(o) - o[class]` and its gradient
/// `softmax(o) - onehot(class)`.
pub fn cross_entropy(logits: &[f64], class: usize) -> Result<(f64, Vec<f64>)> {
    if class >= logits.len() {
        return Err(Error::InvalidClass {
            index: class,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&o| (o - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[class];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[class] -= 1.0;
    Ok((loss, grad))
}

/// Mean over time of the per-step cross-entropy of `O(t)`; the gradient has
/// one entry per step.
pub fn tet_loss(readout: &ReadoutAccumulator, class: usize) -> Result<(f64, Vec<Vec<f64>>)> {
    let steps = readout.steps();
    if steps == 0 {
        return Err(Error::invalid("readout holds no time steps"));
    }
    let scale = 1.0 / steps as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(steps);
    for t in 0..steps {
        let (loss, mut grad) = cross_entropy(readout.output(t), class)?;
        total += loss;
        grad.iter_mut().for_each(|g| *g *= scale);
        grads.push(grad);
    }
    Ok((total * scale, grads))
}
