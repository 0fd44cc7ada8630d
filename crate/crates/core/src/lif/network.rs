use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ops::{
    avg_pool2, avg_pool2_backward, conv_backward, conv_forward, dense_backward, dense_forward,
};
use super::{
    fire, surrogate_grad, tet_loss, ConvShape, LifConfig, LifLayerState, Padding,
    ReadoutAccumulator,
};
use crate::datasets::EventTensor;
use crate::error::{Error, Result};
use crate::temporal::BatchGradients;
use crate::tensor::Matrix;
use crate::topology::SparseMask;

const GRADIENT_CHUNKS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    Dense,
    Conv(ConvShape),
}

/// Weights and connection mask of one dense or convolutional projection.
#[derive(Clone, Debug, PartialEq)]
pub struct SynapticLayer {
    pub connectivity: Connectivity,
    pub weights: Matrix,
    pub mask: SparseMask,
}

impl SynapticLayer {
    pub fn input_len(&self) -> usize {
        match &self.connectivity {
            Connectivity::Dense => self.weights.rows(),
            Connectivity::Conv(s) => s.input_len(),
        }
    }

    pub fn output_len(&self) -> usize {
        match &self.connectivity {
            Connectivity::Dense => self.weights.cols(),
            Connectivity::Conv(s) => s.output_len(),
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_len()];
        match &self.connectivity {
            Connectivity::Dense => dense_forward(x, &self.weights, &mut out),
            Connectivity::Conv(s) => conv_forward(x, s, &self.weights, &mut out),
        }
        out
    }

    fn backward(&self, x: &[f64], g: &[f64], grad_w: &mut Matrix, grad_x: Option<&mut [f64]>) {
        match &self.connectivity {
            Connectivity::Dense => dense_backward(x, &self.weights, g, grad_w, grad_x),
            Connectivity::Conv(s) => conv_backward(x, s, &self.weights, g, grad_w, grad_x),
        }
    }
}

/// One step of the per-timestep pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Projection through `layers[k]` followed by LIF neurons.
    Spiking(usize),
    /// 2x2 average pooling of a `channels x height x width` spike map.
    Pool {
        channels: usize,
        height: usize,
        width: usize,
    },
    /// Projection through `layers[k]` into the non-firing readout.
    Readout(usize),
}

/// Network presets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LifArchitecture {
    /// Fully-connected `sizes[0] - ... - sizes[n]`; the last projection is the readout.
    Mlp { sizes: Vec<usize> },
    /// `16C3 - AP2 - 32C3 - AP2 - FC(classes)` with same padding.
    TinyConv {
        channels: usize,
        height: usize,
        width: usize,
        classes: usize,
    },
}

impl LifArchitecture {
    fn conv_shapes(channels: usize, height: usize, width: usize) -> (ConvShape, ConvShape) {
        let first = ConvShape {
            in_channels: channels,
            out_channels: 16,
            kernel: 3,
            height,
            width,
            padding: Padding::Same,
        };
        let second = ConvShape {
            in_channels: 16,
            out_channels: 32,
            kernel: 3,
            height: height / 2,
            width: width / 2,
            padding: Padding::Same,
        };
        (first, second)
    }

    /// `(n_pre, n_post)` of every maskable weight matrix, in layer order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        match self {
            Self::Mlp { sizes } => sizes.windows(2).map(|w| (w[0], w[1])).collect(),
            Self::TinyConv {
                channels,
                height,
                width,
                classes,
            } => {
                let (a, b) = Self::conv_shapes(*channels, *height, *width);
                vec![
                    (a.kernel_rows(), a.out_channels),
                    (b.kernel_rows(), b.out_channels),
                    (32 * (height / 4) * (width / 4), *classes),
                ]
            }
        }
    }

    pub fn input_len(&self) -> usize {
        match self {
            Self::Mlp { sizes } => sizes[0],
            Self::TinyConv {
                channels,
                height,
                width,
                ..
            } => channels * height * width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Mlp { sizes } if sizes.len() < 2 || sizes.contains(&0) => Err(Error::invalid(
                "an MLP needs at least two positive layer sizes",
            )),
            Self::TinyConv {
                height,
                width,
                classes,
                channels,
            } if *height < 4 || *width < 4 || *classes == 0 || *channels == 0 => Err(
                Error::invalid("the conv preset needs at least 4x4 inputs and one class"),
            ),
            _ => Ok(()),
        }
    }

    /// Builds the network over `masks`, drawing each active weight of column
    /// `j` uniformly from `±init_scale / sqrt(fan_in_j)`.
    pub fn build(
        &self,
        masks: Vec<SparseMask>,
        cfg: LifConfig,
        init_scale: f64,
        seed: u64,
    ) -> Result<LifNetwork> {
        self.validate()?;
        cfg.validate()?;
        let shapes = self.layer_shapes();
        if masks.len() != shapes.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} masks", shapes.len()),
                actual: masks.len().to_string(),
            });
        }
        for (mask, &(r, c)) in masks.iter().zip(&shapes) {
            if (mask.n_pre(), mask.n_post()) != (r, c) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{r}x{c} mask"),
                    actual: format!("{}x{}", mask.n_pre(), mask.n_post()),
                });
            }
        }
        let connectivity: Vec<Connectivity>;
        let stages: Vec<Stage>;
        match self {
            Self::Mlp { sizes } => {
                let n = sizes.len() - 1;
                connectivity = vec![Connectivity::Dense; n];
                stages = (0..n)
                    .map(|k| {
                        if k + 1 == n {
                            Stage::Readout(k)
                        } else {
                            Stage::Spiking(k)
                        }
                    })
                    .collect();
            }
            Self::TinyConv {
                channels,
                height,
                width,
                ..
            } => {
                let (a, b) = Self::conv_shapes(*channels, *height, *width);
                connectivity = vec![
                    Connectivity::Conv(a),
                    Connectivity::Conv(b),
                    Connectivity::Dense,
                ];
                stages = vec![
                    Stage::Spiking(0),
                    Stage::Pool {
                        channels: 16,
                        height: *height,
                        width: *width,
                    },
                    Stage::Spiking(1),
                    Stage::Pool {
                        channels: 32,
                        height: height / 2,
                        width: width / 2,
                    },
                    Stage::Readout(2),
                ];
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = masks
            .into_iter()
            .zip(connectivity)
            .map(|(mask, connectivity)| {
                let mut w = Matrix::zeros(mask.n_pre(), mask.n_post());
                let bounds: Vec<f64> = (0..mask.n_post())
                    .map(|j| init_scale / (mask.fan_in(j).max(1) as f64).sqrt())
                    .collect();
                for i in 0..mask.n_pre() {
                    for (j, &b) in bounds.iter().enumerate() {
                        let draw: f64 = rng.gen_range(-1.0..1.0);
                        if mask.contains(i, j) {
                            w.set(i, j, draw * b);
                        }
                    }
                }
                SynapticLayer {
                    connectivity,
                    weights: w,
                    mask,
                }
            })
            .collect();
        LifNetwork::new(layers, stages, cfg, self.input_len())
    }
}

/// Everything BPTT needs from one forward pass of a single sample.
#[derive(Clone, Debug)]
pub struct LifTrace {
    /// Input of each synaptic layer, indexed `[layer][t]`.
    pub inputs: Vec<Vec<Vec<f64>>>,
    /// Membrane trajectories of spiking layers; `None` for the readout.
    pub states: Vec<Option<LifLayerState>>,
    pub readout: ReadoutAccumulator,
}

/// Stack of masked projections, LIF neurons and pooling ending in a readout.
#[derive(Clone, Debug, PartialEq)]
pub struct LifNetwork {
    pub layers: Vec<SynapticLayer>,
    stages: Vec<Stage>,
    cfg: LifConfig,
    input_len: usize,
}

impl LifNetwork {
    pub fn new(
        layers: Vec<SynapticLayer>,
        stages: Vec<Stage>,
        cfg: LifConfig,
        input_len: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut len = input_len;
        let mut used = vec![false; layers.len()];
        for (s, stage) in stages.iter().enumerate() {
            match *stage {
                Stage::Spiking(k) | Stage::Readout(k) => {
                    let layer = layers.get(k).ok_or_else(|| {
                        Error::invalid(format!("stage refers to missing layer {k}"))
                    })?;
                    if used[k] {
                        return Err(Error::invalid(format!("layer {k} is used twice")));
                    }
                    used[k] = true;
                    if layer.input_len() != len {
                        return Err(Error::ShapeMismatch {
                            expected: format!("{len} inputs to layer {k}"),
                            actual: layer.input_len().to_string(),
                        });
                    }
                    layer.mask.check_shape(&layer.weights)?;
                    if let Connectivity::Conv(shape) = &layer.connectivity {
                        shape.validate()?;
                        if (shape.kernel_rows(), shape.out_channels)
                            != (layer.weights.rows(), layer.weights.cols())
                        {
                            return Err(Error::invalid(format!(
                                "kernel of layer {k} does not match its shape"
                            )));
                        }
                    }
                    len = layer.output_len();
                }
                Stage::Pool {
                    channels,
                    height,
                    width,
                } => {
                    if channels * height * width != len {
                        return Err(Error::ShapeMismatch {
                            expected: format!("{len} inputs to pooling"),
                            actual: (channels * height * width).to_string(),
                        });
                    }
                    len = channels * (height / 2) * (width / 2);
                }
            }
            if matches!(stage, Stage::Readout(_)) != (s + 1 == stages.len()) {
                return Err(Error::invalid(
                    "the readout must be the last stage and appear once",
                ));
            }
        }
        if used.contains(&false) || stages.is_empty() {
            return Err(Error::invalid(
                "every layer must be used by exactly one stage",
            ));
        }
        Ok(Self {
            layers,
            stages,
            cfg,
            input_len,
        })
    }

    pub fn config(&self) -> &LifConfig {
        &self.cfg
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map_or(0, SynapticLayer::output_len)
    }

    pub fn forward(&self, input: &EventTensor) -> Result<LifTrace> {
        if input.frame_len() != self.input_len || input.steps == 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("{} inputs per step over at least one step", self.input_len),
                actual: format!("{} over {} steps", input.frame_len(), input.steps),
            });
        }
        let n = self.layers.len();
        let mut inputs: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(input.steps); n];
        let mut states: Vec<Option<LifLayerState>> = self
            .stages
            .iter()
            .filter_map(|s| match s {
                Stage::Spiking(k) => Some(*k),
                _ => None,
            })
            .fold(vec![None; n], |mut acc, k| {
                acc[k] = Some(LifLayerState::default());
                acc
            });
        let mut membranes: Vec<Vec<f64>> = self
            .layers
            .iter()
            .map(|l| vec![0.0; l.output_len()])
            .collect();
        let mut last_current: Vec<Option<Vec<f64>>> = vec![None; n];
        let mut readout = ReadoutAccumulator::new();
        for t in 0..input.steps {
            let mut x = input.frame(t).to_vec();
            for stage in &self.stages {
                match *stage {
                    Stage::Spiking(k) | Stage::Readout(k) => {
                        // repeated inputs (e.g. direct-coded frames) reuse the previous current
                        let reuse = t > 0 && inputs[k][t - 1] == x;
                        let current = match (&last_current[k], reuse) {
                            (Some(c), true) => c.clone(),
                            _ => self.layers[k].forward(&x),
                        };
                        inputs[k].push(x);
                        if let Stage::Spiking(_) = stage {
                            let state = states[k].as_mut().expect("spiking layers carry state");
                            let u = &mut membranes[k];
                            let mut v = vec![0.0; u.len()];
                            let mut a = vec![0.0; u.len()];
                            for m in 0..u.len() {
                                v[m] = self.cfg.tau * u[m] + current[m];
                                (a[m], u[m]) = fire(v[m], self.cfg.v_th);
                            }
                            state.v.push(v);
                            state.u.push(u.clone());
                            state.a.push(a.clone());
                            x = a;
                        } else {
                            readout.push(&current);
                            x = Vec::new();
                        }
                        last_current[k] = Some(current);
                    }
                    Stage::Pool {
                        channels,
                        height,
                        width,
                    } => {
                        x = avg_pool2(&x, channels, height, width)?;
                    }
                }
            }
        }
        Ok(LifTrace {
            inputs,
            states,
            readout,
        })
    }

    /// Class with the largest final readout; the lowest index wins ties.
    pub fn predict(&self, input: &EventTensor) -> Result<usize> {
        let trace = self.forward(input)?;
        Ok(argmax(trace.readout.last().unwrap_or(&[])))
    }

    pub fn predict_many(&self, inputs: &[EventTensor]) -> Result<Vec<usize>> {
        inputs.par_iter().map(|x| self.predict(x)).collect()
    }

    /// Back-propagates the loss of `trace` through time and adds the dense
    /// weight gradients (inactive entries included) into `grads`. Returns the loss.
    pub fn accumulate_gradients(
        &self,
        trace: &LifTrace,
        class: usize,
        grads: &mut [Matrix],
    ) -> Result<f64> {
        let (loss, d_out) = tet_loss(&trace.readout, class)?;
        let steps = d_out.len();
        let mut g = d_out;
        for (s, stage) in self.stages.iter().enumerate().rev() {
            let first = s == 0;
            match *stage {
                Stage::Readout(k) | Stage::Spiking(k) => {
                    let d_current: Vec<Vec<f64>> = match stage {
                        Stage::Readout(_) => {
                            // O(t) sums I(τ) for τ <= t
                            let mut acc = vec![0.0; g[0].len()];
                            let mut out = vec![Vec::new(); steps];
                            for t in (0..steps).rev() {
                                acc.iter_mut().zip(&g[t]).for_each(|(a, d)| *a += d);
                                out[t] = acc.clone();
                            }
                            out
                        }
                        _ => {
                            let state = trace.states[k]
                                .as_ref()
                                .expect("spiking layers carry state");
                            let mut du = vec![0.0; g[0].len()];
                            let mut out = vec![Vec::new(); steps];
                            for t in (0..steps).rev() {
                                let mut dv = vec![0.0; du.len()];
                                for m in 0..du.len() {
                                    let sg =
                                        surrogate_grad(state.v[t][m] - self.cfg.v_th, &self.cfg);
                                    // reset factor (1 - a) is held constant
                                    dv[m] = g[t][m] * sg + du[m] * (1.0 - state.a[t][m]);
                                    du[m] = self.cfg.tau * dv[m];
                                }
                                out[t] = dv;
                            }
                            out
                        }
                    };
                    let layer = &self.layers[k];
                    let xs = &trace.inputs[k];
                    if first {
                        // no input gradient needed: merge steps that saw the same input
                        let mut t = 0;
                        while t < steps {
                            let mut merged = d_current[t].clone();
                            let mut u = t + 1;
                            while u < steps && xs[u] == xs[t] {
                                merged
                                    .iter_mut()
                                    .zip(&d_current[u])
                                    .for_each(|(a, b)| *a += b);
                                u += 1;
                            }
                            layer.backward(&xs[t], &merged, &mut grads[k], None);
                            t = u;
                        }
                    } else {
                        let mut next = Vec::with_capacity(steps);
                        for t in 0..steps {
                            let mut gx = vec![0.0; layer.input_len()];
                            layer.backward(&xs[t], &d_current[t], &mut grads[k], Some(&mut gx));
                            next.push(gx);
                        }
                        g = next;
                    }
                }
                Stage::Pool {
                    channels,
                    height,
                    width,
                } => {
                    g = g
                        .iter()
                        .map(|gt| avg_pool2_backward(gt, channels, height, width))
                        .collect();
                }
            }
        }
        Ok(loss)
    }

    pub fn zero_gradients(&self) -> Vec<Matrix> {
        self.layers
            .iter()
            .map(|l| Matrix::zeros(l.weights.rows(), l.weights.cols()))
            .collect()
    }

    /// Loss and gradients of one sample, zero on inactive synapses.
    pub fn bptt(&self, input: &EventTensor, class: usize) -> Result<(f64, Vec<Matrix>)> {
        let trace = self.forward(input)?;
        let mut grads = self.zero_gradients();
        let loss = self.accumulate_gradients(&trace, class, &mut grads)?;
        for (g, layer) in grads.iter_mut().zip(&self.layers) {
            layer.mask.apply(g);
        }
        Ok((loss, grads))
    }

    /// Summed dense gradients over a batch, reduced over a fixed number of
    /// chunks in order so the result does not depend on the thread count.
    pub fn batch_gradients(
        &self,
        inputs: &[&EventTensor],
        classes: &[usize],
    ) -> Result<BatchGradients> {
        if inputs.len() != classes.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} labels", inputs.len()),
                actual: classes.len().to_string(),
            });
        }
        let chunk = inputs.len().div_ceil(GRADIENT_CHUNKS).max(1);
        let parts: Vec<Result<(Vec<Matrix>, f64, usize)>> = inputs
            .par_chunks(chunk)
            .zip(classes.par_chunks(chunk))
            .map(|(xs, cs)| {
                let mut grads = self.zero_gradients();
                let (mut loss, mut correct) = (0.0, 0);
                for (x, &c) in xs.iter().zip(cs) {
                    let trace = self.forward(x)?;
                    loss += self.accumulate_gradients(&trace, c, &mut grads)?;
                    correct += usize::from(argmax(trace.readout.last().unwrap_or(&[])) == c);
                }
                Ok((grads, loss, correct))
            })
            .collect();
        let mut grads = self.zero_gradients();
        let (mut loss_sum, mut correct) = (0.0, 0);
        for part in parts {
            let (g, l, c) = part?;
            for (a, b) in grads.iter_mut().zip(&g) {
                a.add_assign(b);
            }
            loss_sum += l;
            correct += c;
        }
        Ok(BatchGradients {
            grads,
            loss_sum,
            correct,
        })
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lif::cross_entropy;

    fn mlp(sizes: &[usize], seed: u64) -> LifNetwork {
        let arch = LifArchitecture::Mlp {
            sizes: sizes.to_vec(),
        };
        let masks = arch
            .layer_shapes()
            .iter()
            .map(|&(r, c)| SparseMask::dense(r, c))
            .collect();
        arch.build(masks, LifConfig::default(), 1.0, seed).unwrap()
    }

    fn frames(steps: usize, values: &[f64]) -> EventTensor {
        let mut x = EventTensor::zeros(steps, 1, 1, values.len());
        for t in 0..steps {
            x.frame_mut(t).copy_from_slice(values);
        }
        x
    }

    #[test]
    fn readout_only_matches_softmax_gradient() {
        let net = mlp(&[3, 4], 5);
        let x = frames(1, &[0.5, 1.0, -0.25]);
        let (loss, grads) = net.bptt(&x, 2).unwrap();
        let logits: Vec<f64> = (0..4)
            .map(|j| {
                (0..3)
                    .map(|i| x.frame(0)[i] * net.layers[0].weights.get(i, j))
                    .sum()
            })
            .collect();
        let (ce, dlogits) = cross_entropy(&logits, 2).unwrap();
        assert!((loss - ce).abs() < 1e-12);
        for i in 0..3 {
            for j in 0..4 {
                assert!((grads[0].get(i, j) - x.frame(0)[i] * dlogits[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dead_window_blocks_upstream_gradient() {
        let mut net = mlp(&[2, 3, 2], 1);
        // drive far below threshold: every membrane sits outside the window
        net.layers[0].weights.fill(-10.0);
        let (_, grads) = net.bptt(&frames(3, &[1.0, 1.0]), 0).unwrap();
        assert!(grads[0].as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn masked_weights_get_no_gradient() {
        let arch = LifArchitecture::Mlp {
            sizes: vec![4, 5, 3],
        };
        let m0 = SparseMask::from_pairs(4, 5, [(0, 0), (1, 1), (2, 2), (3, 3), (0, 4)]).unwrap();
        let net = arch
            .build(
                vec![m0.clone(), SparseMask::dense(5, 3)],
                LifConfig::default(),
                3.0,
                2,
            )
            .unwrap();
        let (_, grads) = net.bptt(&frames(2, &[1.0, 0.5, 1.0, 0.8]), 1).unwrap();
        for (i, j) in m0.inactive() {
            assert_eq!(grads[0].get(i, j), 0.0);
        }
    }

    #[test]
    fn spikes_are_binary_and_reset_to_zero() {
        let net = mlp(&[6, 8, 3], 9);
        let trace = net
            .forward(&frames(4, &[1.0, 0.9, 0.2, 0.0, 0.7, 1.0]))
            .unwrap();
        let state = trace.states[0].as_ref().unwrap();
        for t in 0..4 {
            for (m, &a) in state.a[t].iter().enumerate() {
                assert!(a == 0.0 || a == 1.0);
                if a == 1.0 {
                    assert_eq!(state.u[t][m], 0.0);
                }
            }
        }
    }

    #[test]
    fn tiny_conv_shapes() {
        let arch = LifArchitecture::TinyConv {
            channels: 2,
            height: 8,
            width: 8,
            classes: 4,
        };
        assert_eq!(arch.layer_shapes(), vec![(18, 16), (144, 32), (128, 4)]);
        let masks = arch
            .layer_shapes()
            .iter()
            .map(|&(r, c)| SparseMask::dense(r, c))
            .collect();
        let net = arch.build(masks, LifConfig::default(), 1.0, 0).unwrap();
        let x = EventTensor::zeros(2, 2, 8, 8);
        assert_eq!(net.forward(&x).unwrap().readout.last().unwrap().len(), 4);
    }

    #[test]
    fn wrong_input_or_masks_are_rejected() {
        let net = mlp(&[3, 2], 0);
        assert!(net.forward(&frames(2, &[1.0, 2.0])).is_err());
        let arch = LifArchitecture::Mlp { sizes: vec![3, 2] };
        assert!(arch
            .build(vec![SparseMask::dense(2, 2)], LifConfig::default(), 1.0, 0)
            .is_err());
    }
}
