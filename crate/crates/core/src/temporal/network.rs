use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rayon::prelude::*;

use super::layer::forward_layer_with_sums;
use super::{
    accumulate_backward, z_loss, CausalSet, LayerGradient, TemporalLayer, ZSpikeVector, V_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::tensor::Matrix;
use crate::topology::SparseMask;

/// Activations recorded by [`TemporalNetwork::forward`]; `activations[0]` is
/// the input and `activations[k + 1]` the output of layer `k`.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub activations: Vec<ZSpikeVector>,
    pub causal: Vec<CausalSet>,
}

impl ForwardTrace {
    pub fn output(&self) -> &ZSpikeVector {
        self.activations.last().expect("trace holds the input")
    }
}

/// Number of independently reduced slices of a training batch.
const GRADIENT_CHUNKS: usize = 4;

/// Per-layer weight column sums, see [`TemporalNetwork::column_sums`].
#[derive(Clone, Debug)]
pub struct ColumnSums(Vec<Vec<f64>>);

/// Result of [`TemporalNetwork::batch_gradients`].
#[derive(Clone, Debug)]
pub struct BatchGradients {
    /// Dense gradients of the summed loss, one matrix per layer.
    pub grads: Vec<Matrix>,
    pub loss_sum: f64,
    pub correct: usize,
}

/// Feed-forward stack of single-spike layers.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalNetwork {
    pub layers: Vec<TemporalLayer>,
}

impl TemporalNetwork {
    /// Builds a network over the given masks, drawing each active weight of
    /// column `j` uniformly from `[0, init_scale / fan_in_j]`.
    pub fn new(masks: Vec<SparseMask>, init_scale: f64, seed: u64) -> Result<Self> {
        for pair in masks.windows(2) {
            if pair[0].n_post() != pair[1].n_pre() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} inputs to next layer", pair[0].n_post()),
                    actual: pair[1].n_pre().to_string(),
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = masks
            .into_iter()
            .map(|mask| {
                let mut w = Matrix::zeros(mask.n_pre(), mask.n_post());
                let fan_in: Vec<usize> = column_counts(&mask);
                for i in 0..mask.n_pre() {
                    for j in 0..mask.n_post() {
                        let draw: f64 = rng.gen();
                        if mask.contains(i, j) {
                            w.set(i, j, draw * init_scale / fan_in[j].max(1) as f64);
                        }
                    }
                }
                TemporalLayer { weights: w, mask }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn n_inputs(&self) -> usize {
        self.layers.first().map_or(0, TemporalLayer::n_pre)
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map_or(0, TemporalLayer::n_post)
    }

    pub fn forward(&self, z_in: &ZSpikeVector) -> Result<ForwardTrace> {
        self.forward_impl(z_in, None)
    }

    /// Column sums of every weight matrix, valid until the weights change.
    pub fn column_sums(&self) -> ColumnSums {
        ColumnSums(
            self.layers
                .iter()
                .map(|layer| {
                    let mut sums = vec![0.0; layer.n_post()];
                    for i in 0..layer.n_pre() {
                        for (s, w) in sums.iter_mut().zip(layer.weights.row(i)) {
                            *s += w;
                        }
                    }
                    sums
                })
                .collect(),
        )
    }

    /// [`TemporalNetwork::forward`] reusing column sums from the current weights.
    pub fn forward_with_sums(
        &self,
        z_in: &ZSpikeVector,
        sums: &ColumnSums,
    ) -> Result<ForwardTrace> {
        self.forward_impl(z_in, Some(sums))
    }

    fn forward_impl(&self, z_in: &ZSpikeVector, sums: Option<&ColumnSums>) -> Result<ForwardTrace> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut causal = Vec::with_capacity(self.layers.len());
        activations.push(z_in.clone());
        for (k, layer) in self.layers.iter().enumerate() {
            let layer_sums = sums.map(|s| s.0[k].as_slice());
            let (z, c) =
                forward_layer_with_sums(activations.last().expect("non-empty"), layer, layer_sums)?;
            activations.push(z);
            causal.push(c);
        }
        Ok(ForwardTrace {
            activations,
            causal,
        })
    }

    /// Index of the earliest-firing output; the lowest index wins ties, so an
    /// all-silent output layer predicts class 0.
    pub fn predict(&self, z_in: &ZSpikeVector) -> Result<usize> {
        let trace = self.forward(z_in)?;
        Ok(argmin(trace.output().as_slice()))
    }

    /// Predictions for many inputs, sharing one set of column sums.
    pub fn predict_many(&self, inputs: &[ZSpikeVector]) -> Result<Vec<usize>> {
        let sums = self.column_sums();
        inputs
            .par_iter()
            .map(|z| {
                Ok(argmin(
                    self.forward_with_sums(z, &sums)?.output().as_slice(),
                ))
            })
            .collect()
    }

    pub fn zero_gradients(&self) -> Vec<LayerGradient> {
        self.layers
            .iter()
            .map(|l| LayerGradient::zeros(l.n_pre(), l.n_post()))
            .collect()
    }

    /// Back-propagates `grad_out` through the trace, adding dense weight
    /// gradients into `grads` (one per layer).
    pub fn accumulate_gradients(
        &self,
        trace: &ForwardTrace,
        grad_out: &[f64],
        grads: &mut [LayerGradient],
    ) {
        let mut upstream = grad_out.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let mut grad_in = vec![0.0; layer.n_pre()];
            accumulate_backward(
                &upstream,
                trace.activations[k].as_slice(),
                trace.activations[k + 1].as_slice(),
                &trace.causal[k],
                &layer.weights,
                &mut grads[k],
                (k > 0).then_some(grad_in.as_mut_slice()),
            );
            upstream = grad_in;
        }
    }

    /// Forward, loss and backward for one sample; returns the loss and
    /// whether the prediction was correct.
    pub fn sample_gradients(
        &self,
        z_in: &ZSpikeVector,
        class: usize,
        grads: &mut [LayerGradient],
    ) -> Result<(f64, bool)> {
        let sums = self.column_sums();
        self.sample_gradients_with_sums(z_in, class, &sums, grads)
    }

    fn sample_gradients_with_sums(
        &self,
        z_in: &ZSpikeVector,
        class: usize,
        sums: &ColumnSums,
        grads: &mut [LayerGradient],
    ) -> Result<(f64, bool)> {
        let trace = self.forward_with_sums(z_in, sums)?;
        let (loss, grad_out) = z_loss(trace.output(), class)?;
        self.accumulate_gradients(&trace, &grad_out, grads);
        Ok((loss, argmin(trace.output().as_slice()) == class))
    }

    /// Summed dense gradients, loss and correct count over a batch.
    ///
    /// The batch is cut into a fixed number of contiguous chunks reduced in
    /// order, so the result does not depend on the thread count.
    pub fn batch_gradients(
        &self,
        inputs: &[&ZSpikeVector],
        classes: &[usize],
    ) -> Result<BatchGradients> {
        if inputs.len() != classes.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} labels", inputs.len()),
                actual: classes.len().to_string(),
            });
        }
        let sums = self.column_sums();
        let chunk = inputs.len().div_ceil(GRADIENT_CHUNKS).max(1);
        let parts: Vec<Result<(Vec<LayerGradient>, f64, usize)>> = inputs
            .par_chunks(chunk)
            .zip(classes.par_chunks(chunk))
            .map(|(zs, cs)| {
                let mut grads = self.zero_gradients();
                let (mut loss, mut correct) = (0.0, 0);
                for (z, &c) in zs.iter().zip(cs) {
                    let (l, ok) = self.sample_gradients_with_sums(z, c, &sums, &mut grads)?;
                    loss += l;
                    correct += usize::from(ok);
                }
                Ok((grads, loss, correct))
            })
            .collect();
        let mut total: Option<(Vec<LayerGradient>, f64, usize)> = None;
        for part in parts {
            let (grads, loss, correct) = part?;
            match total.as_mut() {
                None => total = Some((grads, loss, correct)),
                Some((g, l, c)) => {
                    for (a, b) in g.iter_mut().zip(&grads) {
                        a.add(b);
                    }
                    *l += loss;
                    *c += correct;
                }
            }
        }
        let (grads, loss_sum, correct) = total.unwrap_or_else(|| (self.zero_gradients(), 0.0, 0));
        Ok(BatchGradients {
            grads: grads.into_iter().map(LayerGradient::into_matrix).collect(),
            loss_sum,
            correct,
        })
    }

    /// Penalty `coef · Σ_j max(0, 1 - Σ_i w_ij)` over every layer, pushing
    /// each neuron's total afferent weight above threshold. Adds its gradient
    /// on active synapses to `grads` and returns the penalty value.
    pub fn weight_sum_penalty(&self, coef: f64, grads: &mut [Matrix]) -> f64 {
        if coef == 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for (layer, grad) in self.layers.iter().zip(grads.iter_mut()) {
            let mut sums = vec![0.0; layer.n_post()];
            for i in 0..layer.n_pre() {
                for (s, w) in sums.iter_mut().zip(layer.weights.row(i)) {
                    *s += w;
                }
            }
            for (j, &s) in sums.iter().enumerate() {
                if s < V_THRESHOLD {
                    total += coef * (V_THRESHOLD - s);
                    for i in 0..layer.n_pre() {
                        if layer.mask.contains(i, j) {
                            grad.row_mut(i)[j] -= coef;
                        }
                    }
                }
            }
        }
        total
    }
}

pub(crate) fn argmin(z: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in z.iter().enumerate() {
        if v < z[best] {
            best = k;
        }
    }
    best
}

fn column_counts(mask: &SparseMask) -> Vec<usize> {
    let mut counts = vec![0; mask.n_post()];
    for (_, j) in mask.active() {
        counts[j] += 1;
    }
    counts
}
