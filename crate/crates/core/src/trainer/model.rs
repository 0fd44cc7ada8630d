use super::config::{DatasetKind, LayerDensity, ModelPreset, RateEncoding, TrainingConfig};
use crate::datasets::{encode_rate, Dataset, EventTensor, RateMode, TemporalEncoding};
use crate::error::{Error, Result};
use crate::lif::{Connectivity, LifArchitecture, LifConfig, LifNetwork};
use crate::metrics::{LayerOps, OpCounts};
use crate::temporal::{BatchGradients, TemporalNetwork, ZSpikeVector};
use crate::tensor::Matrix;
use crate::topology::{er_init, ErdosRenyiConfig, SparseMask};

/// Shape of one input sample and the number of classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub classes: usize,
}

impl InputGeometry {
    pub fn of(cfg: &TrainingConfig) -> Self {
        match cfg.dataset {
            DatasetKind::Mnist => Self {
                channels: 1,
                height: 28,
                width: 28,
                classes: 10,
            },
            DatasetKind::SyntheticEvents => Self {
                channels: 1,
                height: cfg.synthetic_size,
                width: cfg.synthetic_size,
                classes: cfg.synthetic_classes,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Default weight initialisation scale of each preset.
pub fn default_init_scale(model: ModelPreset) -> f64 {
    match model {
        ModelPreset::TemporalMlp => 4.0,
        ModelPreset::LifMlp => 1.0,
        // pooled binary events leave unit-scale conv stages below threshold
        ModelPreset::TinyConv => 2.5,
    }
}

fn lif_architecture(cfg: &TrainingConfig, geo: &InputGeometry) -> Option<LifArchitecture> {
    match cfg.model {
        ModelPreset::TemporalMlp => None,
        ModelPreset::LifMlp => Some(LifArchitecture::Mlp {
            sizes: vec![geo.len(), cfg.hidden, geo.classes],
        }),
        ModelPreset::TinyConv => Some(LifArchitecture::TinyConv {
            channels: geo.channels,
            height: geo.height,
            width: geo.width,
            classes: geo.classes,
        }),
    }
}

/// `(n_pre, n_post)` of every weight matrix of the configured model.
pub fn layer_shapes(cfg: &TrainingConfig, geo: &InputGeometry) -> Vec<(usize, usize)> {
    match lif_architecture(cfg, geo) {
        Some(arch) => arch.layer_shapes(),
        None => vec![(geo.len(), cfg.hidden), (cfg.hidden, geo.classes)],
    }
}

/// Density setting of each layer: `epsilon` in order, the readout dense
/// unless `mask_readout`, unlisted layers dense.
pub fn layer_densities(cfg: &TrainingConfig, n_layers: usize) -> Vec<LayerDensity> {
    (0..n_layers)
        .map(|k| {
            if k + 1 == n_layers && !cfg.mask_readout {
                LayerDensity::Dense
            } else {
                cfg.epsilon.get(k).copied().unwrap_or(LayerDensity::Dense)
            }
        })
        .collect()
}

/// Seed of an independent random stream derived from the run seed.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) const STREAM_MASKS: u64 = 1;
pub(crate) const STREAM_WEIGHTS: u64 = 2;
pub(crate) const STREAM_SPLIT: u64 = 3;
pub(crate) const STREAM_SHUFFLE: u64 = 4;
pub(crate) const STREAM_REWIRE: u64 = 5;
pub(crate) const STREAM_ENCODING: u64 = 6;

/// Initial connection masks of the configured model.
pub fn initial_masks(cfg: &TrainingConfig, geo: &InputGeometry) -> Result<Vec<SparseMask>> {
    let shapes = layer_shapes(cfg, geo);
    let densities = layer_densities(cfg, shapes.len());
    shapes
        .iter()
        .zip(&densities)
        .enumerate()
        .map(|(k, (&(r, c), d))| match d {
            LayerDensity::Dense => Ok(SparseMask::dense(r, c)),
            LayerDensity::Epsilon(e) => er_init(
                r,
                c,
                &ErdosRenyiConfig::new(*e)?,
                derive_seed(cfg.seed, STREAM_MASKS + 16 * k as u64),
            ),
        })
        .collect()
}

/// A network of either family behind one interface.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Temporal(TemporalNetwork),
    Lif(LifNetwork),
}

impl Model {
    /// Builds the configured model over `masks` with freshly drawn weights.
    pub fn build(
        cfg: &TrainingConfig,
        geo: &InputGeometry,
        masks: Vec<SparseMask>,
    ) -> Result<Self> {
        let scale = cfg
            .init_scale
            .unwrap_or_else(|| default_init_scale(cfg.model));
        let seed = derive_seed(cfg.seed, STREAM_WEIGHTS);
        match lif_architecture(cfg, geo) {
            None => Ok(Self::Temporal(TemporalNetwork::new(masks, scale, seed)?)),
            Some(arch) => {
                let lif = LifConfig::new(cfg.lif_tau, cfg.lif_v_th, cfg.surrogate_width)?;
                Ok(Self::Lif(arch.build(masks, lif, scale, seed)?))
            }
        }
    }

    pub fn n_layers(&self) -> usize {
        match self {
            Self::Temporal(n) => n.layers.len(),
            Self::Lif(n) => n.layers.len(),
        }
    }

    pub fn weights(&self, k: usize) -> &Matrix {
        match self {
            Self::Temporal(n) => &n.layers[k].weights,
            Self::Lif(n) => &n.layers[k].weights,
        }
    }

    pub fn mask(&self, k: usize) -> &SparseMask {
        match self {
            Self::Temporal(n) => &n.layers[k].mask,
            Self::Lif(n) => &n.layers[k].mask,
        }
    }

    pub fn layer_mut(&mut self, k: usize) -> (&mut Matrix, &mut SparseMask) {
        match self {
            Self::Temporal(n) => {
                let l = &mut n.layers[k];
                (&mut l.weights, &mut l.mask)
            }
            Self::Lif(n) => {
                let l = &mut n.layers[k];
                (&mut l.weights, &mut l.mask)
            }
        }
    }

    /// `W := M ⊙ W` on every layer.
    pub fn apply_masks(&mut self) {
        for k in 0..self.n_layers() {
            let (w, m) = self.layer_mut(k);
            m.apply(w);
        }
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.n_layers())
            .map(|k| self.mask(k).density())
            .collect()
    }

    /// Active connections and per-step synaptic operations of each layer.
    pub fn op_counts(&self) -> OpCounts {
        let layers = (0..self.n_layers())
            .map(|k| {
                let connections = self.mask(k).cardinality() as u64;
                let positions = match self {
                    Self::Lif(n) => match &n.layers[k].connectivity {
                        Connectivity::Conv(s) => (s.out_height() * s.out_width()) as u64,
                        Connectivity::Dense => 1,
                    },
                    Self::Temporal(_) => 1,
                };
                LayerOps {
                    connections,
                    ops_per_step: connections * positions,
                }
            })
            .collect();
        OpCounts { layers }
    }
}

/// Turns dataset samples into model inputs.
#[derive(Clone, Copy, Debug)]
pub struct Encoder {
    temporal: TemporalEncoding,
    steps: usize,
    rate: RateEncoding,
    seed: u64,
}

/// A batch of encoded samples.
pub enum EncodedBatch {
    Spikes(Vec<ZSpikeVector>),
    Events(Vec<EventTensor>),
}

impl Encoder {
    pub fn new(cfg: &TrainingConfig) -> Self {
        Self {
            temporal: TemporalEncoding {
                threshold: cfg.spike_threshold,
                late_time: cfg.late_spike_time,
            },
            steps: cfg.time_steps,
            rate: cfg.rate_encoding,
            seed: derive_seed(cfg.seed, STREAM_ENCODING),
        }
    }

    pub fn encode(&self, model: &Model, data: &Dataset, indices: &[usize]) -> Result<EncodedBatch> {
        match (model, data) {
            (Model::Temporal(_), Dataset::Images(d)) => Ok(EncodedBatch::Spikes(
                indices
                    .iter()
                    .map(|&k| self.temporal.encode(&d.image(k)))
                    .collect(),
            )),
            (Model::Temporal(_), Dataset::Events(_)) => Err(Error::invalid(
                "the single-spike model takes images, not event streams",
            )),
            (Model::Lif(_), Dataset::Images(d)) => indices
                .iter()
                .map(|&k| {
                    let mode = match self.rate {
                        RateEncoding::Analog => RateMode::Analog,
                        RateEncoding::Bernoulli => RateMode::Bernoulli {
                            seed: derive_seed(self.seed, k as u64),
                        },
                    };
                    encode_rate(&d.image(k), d.rows(), d.cols(), self.steps, mode)
                })
                .collect::<Result<_>>()
                .map(EncodedBatch::Events),
            (Model::Lif(_), Dataset::Events(d)) => Ok(EncodedBatch::Events(
                indices.iter().map(|&k| d.sample(k)).collect(),
            )),
        }
    }
}

impl Model {
    pub fn batch_gradients(
        &self,
        batch: &EncodedBatch,
        classes: &[usize],
    ) -> Result<BatchGradients> {
        match (self, batch) {
            (Self::Temporal(n), EncodedBatch::Spikes(xs)) => {
                n.batch_gradients(&xs.iter().collect::<Vec<_>>(), classes)
            }
            (Self::Lif(n), EncodedBatch::Events(xs)) => {
                n.batch_gradients(&xs.iter().collect::<Vec<_>>(), classes)
            }
            _ => Err(Error::invalid("batch encoding does not match the model")),
        }
    }

    pub fn predict(&self, batch: &EncodedBatch) -> Result<Vec<usize>> {
        match (self, batch) {
            (Self::Temporal(n), EncodedBatch::Spikes(xs)) => n.predict_many(xs),
            (Self::Lif(n), EncodedBatch::Events(xs)) => n.predict_many(xs),
            _ => Err(Error::invalid("batch encoding does not match the model")),
        }
    }

    /// Adds the weight-sum penalty gradient (single-spike model only) and
    /// returns the penalty.
    pub fn regularize(&self, coef: f64, grads: &mut [Matrix]) -> f64 {
        match self {
            Self::Temporal(n) => n.weight_sum_penalty(coef, grads),
            Self::Lif(_) => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn readout_stays_dense_unless_masked() {
        let cfg = TrainingConfig {
            epsilon: vec![LayerDensity::Epsilon(60.0), LayerDensity::Epsilon(5.0)],
            ..TrainingConfig::default()
        };
        assert_eq!(
            layer_densities(&cfg, 2),
            vec![LayerDensity::Epsilon(60.0), LayerDensity::Dense]
        );
        let masked = TrainingConfig {
            mask_readout: true,
            ..cfg
        };
        assert_eq!(layer_densities(&masked, 3)[2], LayerDensity::Dense);
        assert_eq!(layer_densities(&masked, 2)[1], LayerDensity::Epsilon(5.0));
    }

    #[test]
    fn dense_mlp_counts_every_connection() {
        let cfg = TrainingConfig {
            epsilon: vec![],
            ..TrainingConfig::default()
        };
        let geo = InputGeometry::of(&cfg);
        let model = Model::build(&cfg, &geo, initial_masks(&cfg, &geo).unwrap()).unwrap();
        assert_eq!(model.op_counts().total_connections(), 635_200);
    }

    #[test]
    fn derived_streams_differ() {
        assert_ne!(derive_seed(0, STREAM_MASKS), derive_seed(0, STREAM_WEIGHTS));
        assert_ne!(derive_seed(0, STREAM_MASKS), derive_seed(1, STREAM_MASKS));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
