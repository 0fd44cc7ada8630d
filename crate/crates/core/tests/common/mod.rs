//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use eslsnn::datasets::{Dataset, ImageDataset};
use eslsnn::topology::EverActive;
use eslsnn::trainer::{
    initial_masks, Checkpoint, DataSplits, InputGeometry, Model, Optimizer, RngState,
    TrainingConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 28x28 images in ten balanced classes: class `c` lights a 7x7 block at
/// a class-specific position, plus sparse random pixels.
pub fn blocks(n: usize, seed: u64) -> ImageDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = vec![0u8; n * 784];
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let c = k % 10;
        labels.push(c as u8);
        let (r0, c0) = (
            2 + 7 * (c / 4) + rng.gen_range(0..2),
            2 + 6 * (c % 4) + rng.gen_range(0..2),
        );
        let img = &mut pixels[k * 784..(k + 1) * 784];
        for r in r0..r0 + 7 {
            for col in c0..c0 + 7 {
                img[r * 28 + col] = 230;
            }
        }
        for _ in 0..20 {
            img[rng.gen_range(0..784)] = rng.gen_range(100..=255);
        }
    }
    ImageDataset::from_parts(28, 28, pixels, labels).unwrap()
}

pub fn block_splits(n_train: usize, n_test: usize, seed: u64) -> DataSplits {
    DataSplits {
        train: Dataset::Images(blocks(n_train, seed)),
        test: Dataset::Images(blocks(n_test, seed + 1)),
    }
}

/// A checkpoint of a freshly initialised model, for code paths that only
/// look at topology.
pub fn untrained_checkpoint(config: TrainingConfig) -> Checkpoint {
    let geo = InputGeometry::of(&config);
    let masks = initial_masks(&config, &geo).unwrap();
    let model = Model::build(&config, &geo, masks).unwrap();
    let sizes: Vec<usize> = (0..model.n_layers())
        .map(|k| model.weights(k).as_slice().len())
        .collect();
    Checkpoint {
        optimizer: Optimizer::new(config.optimizer, &sizes),
        ever_active: (0..model.n_layers())
            .map(|k| EverActive::new(model.mask(k)))
            .collect(),
        epoch: 0,
        iteration: 0,
        best_val_accuracy: 0.0,
        rng: RngState::capture(&ChaCha8Rng::seed_from_u64(config.seed)),
        config,
        model,
    }
}
