use std::path::Path;

use rand_chacha::ChaCha8Rng;

use super::config::TrainingConfig;
use super::model::{InputGeometry, Model};
use super::Optimizer;
use crate::container::{put_f64s, put_u64, Container, Reader};
use crate::error::{Error, Result};
use crate::tensor::Matrix;
use crate::topology::{EverActive, SparseMask};

/// Exact position of a ChaCha8 stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }

    fn to_bytes(self) -> Vec<u8> {
        let mut out = self.seed.to_vec();
        put_u64(&mut out, self.stream);
        out.extend_from_slice(&self.word_pos.to_le_bytes());
        out
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
        if !r.is_done() {
            return Err(Error::Corrupt("trailing rng bytes".into()));
        }
        Ok(Self {
            seed,
            stream,
            word_pos,
        })
    }
}

/// Snapshot of a run: the model with the best validation accuracy together
/// with the optimizer and sampler state at that moment.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainingConfig,
    /// Epochs completed when the snapshot was taken.
    pub epoch: u64,
    pub iteration: u64,
    pub best_val_accuracy: f64,
    pub model: Model,
    pub ever_active: Vec<EverActive>,
    pub optimizer: Optimizer,
    pub rng: RngState,
}

impl Checkpoint {
    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        c.insert("config", self.config.to_text().into_bytes());
        let mut meta = self.config.hash().to_vec();
        put_u64(&mut meta, self.epoch);
        put_u64(&mut meta, self.iteration);
        put_f64s(&mut meta, &[self.best_val_accuracy]);
        c.insert("meta", meta);
        for k in 0..self.model.n_layers() {
            let w = self.model.weights(k);
            let mut bytes = Vec::with_capacity(16 + 8 * w.as_slice().len());
            put_u64(&mut bytes, w.rows() as u64);
            put_u64(&mut bytes, w.cols() as u64);
            put_f64s(&mut bytes, w.as_slice());
            c.insert(format!("weights.{k}"), bytes);
            c.insert(format!("mask.{k}"), self.model.mask(k).to_bytes(k));
            let seen = self.ever_active[k]
                .bits()
                .iter()
                .map(|&b| u8::from(b))
                .collect();
            c.insert(format!("ever_active.{k}"), seen);
        }
        c.insert("optimizer", self.optimizer.to_bytes());
        c.insert("rng", self.rng.to_bytes());
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let text = std::str::from_utf8(c.require("config")?)
            .map_err(|_| Error::Corrupt("config section is not UTF-8".into()))?;
        let config = TrainingConfig::from_text(text)?;
        let mut meta = Reader::new(c.require("meta")?);
        if meta.take(32)? != config.hash() {
            return Err(Error::Corrupt(
                "config hash does not match the stored config".into(),
            ));
        }
        let epoch = meta.u64()?;
        let iteration = meta.u64()?;
        let best_val_accuracy = meta.f64()?;
        if !meta.is_done() {
            return Err(Error::Corrupt("trailing meta bytes".into()));
        }
        let geo = InputGeometry::of(&config);
        let shapes = super::model::layer_shapes(&config, &geo);
        let mut masks = Vec::with_capacity(shapes.len());
        let mut weights = Vec::with_capacity(shapes.len());
        let mut ever_active = Vec::with_capacity(shapes.len());
        for (k, &(rows, cols)) in shapes.iter().enumerate() {
            let (id, mask) = SparseMask::from_bytes(c.require(&format!("mask.{k}"))?)?;
            if id != k || (mask.n_pre(), mask.n_post()) != (rows, cols) {
                return Err(Error::Corrupt(format!(
                    "mask {k} has the wrong id or shape"
                )));
            }
            let mut r = Reader::new(c.require(&format!("weights.{k}"))?);
            if (r.u64()? as usize, r.u64()? as usize) != (rows, cols) {
                return Err(Error::Corrupt(format!("weights {k} have the wrong shape")));
            }
            let w = Matrix::from_vec(rows, cols, r.f64s(rows * cols)?)?;
            if !r.is_done() {
                return Err(Error::Corrupt(format!("trailing bytes in weights {k}")));
            }
            let seen = c.require(&format!("ever_active.{k}"))?;
            if seen.len() != rows * cols || seen.iter().any(|&b| b > 1) {
                return Err(Error::Corrupt(format!("bad ever-active bitmap {k}")));
            }
            ever_active.push(EverActive::from_bits(
                seen.iter().map(|&b| b == 1).collect(),
            ));
            masks.push(mask);
            weights.push(w);
        }
        let mut model = Model::build(&config, &geo, masks)?;
        for (k, w) in weights.into_iter().enumerate() {
            *model.layer_mut(k).0 = w;
        }
        let optimizer = Optimizer::from_bytes(c.require("optimizer")?)?;
        if optimizer.layer_count() != shapes.len() {
            return Err(Error::Corrupt(
                "optimizer state does not match the model".into(),
            ));
        }
        let rng = RngState::from_bytes(c.require("rng")?)?;
        Ok(Self {
            config,
            epoch,
            iteration,
            best_val_accuracy,
            model,
            ever_active,
            optimizer,
            rng,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_container().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_container(&Container::from_bytes(bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::config::{LayerDensity, ModelPreset};
    use crate::trainer::model::initial_masks;
    use crate::trainer::OptimizerKind;
    use rand::{RngCore, SeedableRng};

    fn small(model: ModelPreset) -> Checkpoint {
        let config = TrainingConfig {
            model,
            hidden: 12,
            epsilon: vec![LayerDensity::Epsilon(3.0)],
            dataset: if model.is_lif() {
                crate::trainer::config::DatasetKind::SyntheticEvents
            } else {
                crate::trainer::config::DatasetKind::Mnist
            },
            ..TrainingConfig::default()
        };
        let geo = InputGeometry::of(&config);
        let masks = initial_masks(&config, &geo).unwrap();
        let model = Model::build(&config, &geo, masks).unwrap();
        let sizes: Vec<usize> = (0..model.n_layers())
            .map(|k| model.weights(k).as_slice().len())
            .collect();
        let mut optimizer = Optimizer::new(OptimizerKind::default(), &sizes);
        optimizer.begin_step();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        rng.next_u64();
        Checkpoint {
            config,
            epoch: 3,
            iteration: 1620,
            best_val_accuracy: 0.875,
            ever_active: (0..model.n_layers())
                .map(|k| EverActive::new(model.mask(k)))
                .collect(),
            model,
            optimizer,
            rng: RngState::capture(&rng),
        }
    }

    #[test]
    fn bytes_round_trip_exactly() {
        for preset in [
            ModelPreset::TemporalMlp,
            ModelPreset::LifMlp,
            ModelPreset::TinyConv,
        ] {
            let ck = small(preset);
            let bytes = ck.to_bytes();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn rng_state_resumes_the_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        rng.next_u32();
        let state = RngState::capture(&rng);
        let expected = rng.next_u64();
        assert_eq!(state.restore().next_u64(), expected);
    }

    #[test]
    fn tampering_is_detected() {
        let ck = small(ModelPreset::LifMlp);
        let mut c = ck.to_container();
        c.insert(
            "config",
            ck.config
                .to_text()
                .replace("epochs = 30", "epochs = 31")
                .into_bytes(),
        );
        assert!(matches!(
            Checkpoint::from_container(&c),
            Err(Error::Corrupt(_))
        ));
        let mut bytes = ck.to_bytes();
        bytes.truncate(bytes.len() - 3);
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}
