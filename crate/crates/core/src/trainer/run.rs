use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{Checkpoint, RngState};
use super::config::{DatasetKind, LayerDensity, TrainingConfig};
use super::model::{
    derive_seed, initial_masks, layer_densities, Encoder, InputGeometry, Model, STREAM_REWIRE,
    STREAM_SHUFFLE, STREAM_SPLIT,
};
use super::Optimizer;
use crate::datasets::{
    load_mnist_dir, synthetic_events, Dataset, EventDataset, MnistSplit, SyntheticConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{MetricsRecord, OpCounts};
use crate::topology::{rewire_step, EverActive, GrowthSignals, RewireEvent};

/// Environment variable naming the default dataset root.
pub const DATA_DIR_ENV: &str = "ESLSNN_DATA_DIR";

/// Samples evaluated per encoded chunk.
const EVAL_CHUNK: usize = 1000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataSplits {
    pub train: Dataset,
    pub test: Dataset,
}

/// `cfg.data_dir`, else `$ESLSNN_DATA_DIR`.
pub fn resolve_data_dir(cfg: &TrainingConfig) -> Option<PathBuf> {
    cfg.data_dir
        .clone()
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
}

fn mnist_root(dir: &Path) -> PathBuf {
    let nested = dir.join("mnist");
    if !dir.join("train-images-idx3-ubyte").exists() && nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

fn limit(data: Dataset, n: Option<usize>) -> Dataset {
    match n {
        Some(n) if n < data.len() => data.subset(&(0..n).collect::<Vec<_>>()),
        _ => data,
    }
}

fn synthetic_config(cfg: &TrainingConfig, per_class: usize, stream: u64) -> SyntheticConfig {
    SyntheticConfig {
        n_per_class: per_class,
        n_classes: cfg.synthetic_classes,
        steps: cfg.time_steps,
        height: cfg.synthetic_size,
        width: cfg.synthetic_size,
        noise: cfg.synthetic_noise,
        seed: derive_seed(cfg.seed, stream),
    }
}

/// Generates the train and test event sets described by `cfg`.
pub fn synthetic_splits(cfg: &TrainingConfig) -> Result<(EventDataset, EventDataset)> {
    Ok((
        synthetic_events(&synthetic_config(cfg, cfg.synthetic_per_class, 101))?,
        synthetic_events(&synthetic_config(cfg, cfg.synthetic_test_per_class, 102))?,
    ))
}

/// File names of saved event splits inside a data directory.
pub const EVENT_FILES: [&str; 2] = ["train.events", "test.events"];

/// Loads the configured dataset. MNIST is read from the resolved data
/// directory (or its `mnist/` subdirectory); event data is read from
/// `data_dir` when it holds saved splits and generated otherwise.
pub fn load_data(cfg: &TrainingConfig) -> Result<DataSplits> {
    let (train, test) = match cfg.dataset {
        DatasetKind::Mnist => {
            let dir = resolve_data_dir(cfg).ok_or_else(|| {
                Error::DatasetNotFound(PathBuf::from(format!("<set data_dir or {DATA_DIR_ENV}>")))
            })?;
            let root = mnist_root(&dir);
            (
                Dataset::Images(load_mnist_dir(&root, MnistSplit::Train)?),
                Dataset::Images(load_mnist_dir(&root, MnistSplit::Test)?),
            )
        }
        DatasetKind::SyntheticEvents => match &cfg.data_dir {
            Some(dir) => (
                Dataset::Events(EventDataset::load(&dir.join(EVENT_FILES[0]))?),
                Dataset::Events(EventDataset::load(&dir.join(EVENT_FILES[1]))?),
            ),
            None => {
                let (train, test) = synthetic_splits(cfg)?;
                (Dataset::Events(train), Dataset::Events(test))
            }
        },
    };
    Ok(DataSplits {
        train: limit(train, cfg.train_limit),
        test: limit(test, cfg.test_limit),
    })
}

fn check_geometry(cfg: &TrainingConfig, data: &Dataset) -> Result<()> {
    let geo = InputGeometry::of(cfg);
    let (frame, classes) = match data {
        Dataset::Images(d) => (d.pixels_per_image(), 10),
        Dataset::Events(d) => (d.channels * d.height * d.width, d.n_classes),
    };
    let kind_ok = matches!(
        (cfg.dataset, data),
        (DatasetKind::Mnist, Dataset::Images(_))
            | (DatasetKind::SyntheticEvents, Dataset::Events(_))
    );
    if !kind_ok || frame != geo.len() || classes != geo.classes {
        return Err(Error::ShapeMismatch {
            expected: format!(
                "{} data with {} inputs and {} classes",
                cfg.dataset.name(),
                geo.len(),
                geo.classes
            ),
            actual: format!("{frame} inputs and {classes} classes"),
        });
    }
    Ok(())
}

/// Training and validation indices of a run: a seeded random
/// `validation_fraction` of the training set is held out.
pub fn split_indices(cfg: &TrainingConfig, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.seed,
        STREAM_SPLIT,
    )));
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).max(1);
    if n_val >= n {
        return Err(Error::invalid(format!(
            "{n} samples leave nothing to train on"
        )));
    }
    let mut val = perm[..n_val].to_vec();
    let mut train = perm[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

/// Predictions of `model` on `indices` of `data`.
pub fn predict_indices(
    model: &Model,
    encoder: &Encoder,
    data: &Dataset,
    indices: &[usize],
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_CHUNK) {
        out.extend(model.predict(&encoder.encode(model, data, chunk)?)?);
    }
    Ok(out)
}

fn accuracy(model: &Model, encoder: &Encoder, data: &Dataset, indices: &[usize]) -> Result<f64> {
    let preds = predict_indices(model, encoder, data, indices)?;
    let correct = preds
        .iter()
        .zip(indices)
        .filter(|(&p, &k)| p == data.label(k))
        .count();
    Ok(correct as f64 / indices.len().max(1) as f64)
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Snapshot at the epoch with the best validation accuracy.
    pub checkpoint: Checkpoint,
    /// State after the last iteration.
    pub final_model: Model,
    pub metrics: Vec<MetricsRecord>,
    pub rewires: Vec<RewireEvent>,
}

/// Runs training as configured; see [`train_with`].
pub fn train(cfg: &TrainingConfig, data: &DataSplits) -> Result<TrainOutcome> {
    train_with(cfg, data, |_, _| {})
}

/// Trains `cfg` on `data.train`, calling `on_record` with each metrics
/// record and the model at that iteration.
///
/// Each iteration computes dense gradients over one batch, feeds them to
/// the optimizer and re-applies the masks; every `t_iter` iterations up to
/// `t_end`, each sparse layer is rewired from this batch's gradient or the
/// optimizer momentum. The model is validated after every epoch and the
/// best one is kept.
pub fn train_with<F>(
    cfg: &TrainingConfig,
    data: &DataSplits,
    mut on_record: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&MetricsRecord, &Model),
{
    cfg.validate()?;
    check_geometry(cfg, &data.train)?;
    check_geometry(cfg, &data.test)?;
    let geo = InputGeometry::of(cfg);
    let (train_idx, val_idx) = split_indices(cfg, data.train.len())?;
    let masks = initial_masks(cfg, &geo)?;
    let mut model = Model::build(cfg, &geo, masks)?;
    let n_layers = model.n_layers();
    let sparse: Vec<bool> = layer_densities(cfg, n_layers)
        .iter()
        .map(|d| matches!(d, LayerDensity::Epsilon(_)))
        .collect();
    let sizes: Vec<usize> = (0..n_layers)
        .map(|k| model.weights(k).as_slice().len())
        .collect();
    let mut optimizer = Optimizer::new(cfg.optimizer, &sizes);
    let schedule = cfg.schedule(train_idx.len())?;
    let mut ever_active: Vec<EverActive> = (0..n_layers)
        .map(|k| EverActive::new(model.mask(k)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_SHUFFLE));
    let encoder = Encoder::new(cfg);
    let start = Instant::now();

    let mut iteration = 0u64;
    let mut rewires_cum = 0u64;
    let mut records = Vec::new();
    let mut events = Vec::new();
    let mut best: Option<Checkpoint> = None;
    let (mut loss_sum, mut loss_count) = (0.0, 0usize);

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_schedule.at_epoch(epoch, cfg.epochs);
        let mut order = train_idx.clone();
        order.shuffle(&mut rng);
        let n_batches = order.len().div_ceil(cfg.batch_size);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            iteration += 1;
            let batch = encoder.encode(&model, &data.train, chunk)?;
            let classes: Vec<usize> = chunk.iter().map(|&k| data.train.label(k)).collect();
            let result = model.batch_gradients(&batch, &classes)?;
            if !result.loss_sum.is_finite() {
                return Err(Error::NonFiniteLoss { iteration });
            }
            loss_sum += result.loss_sum;
            loss_count += chunk.len();
            let mut grads = result.grads;
            let inv = 1.0 / chunk.len() as f64;
            grads.iter_mut().for_each(|g| g.scale(inv));
            model.regularize(cfg.weight_sum_reg, &mut grads);
            if let Some(cap) = cfg.grad_clip {
                for g in grads.iter_mut() {
                    let norm = g.norm();
                    if norm > cap {
                        g.scale(cap / norm);
                    }
                }
            }
            optimizer.begin_step();
            for (k, g) in grads.iter().enumerate() {
                let (w, _) = model.layer_mut(k);
                optimizer.update(k, w.as_mut_slice(), g.as_slice(), lr);
            }
            if cfg.mask_every_step {
                model.apply_masks();
            }
            if schedule.is_rewire_iteration(iteration) {
                for k in (0..n_layers).filter(|&k| sparse[k]) {
                    let signals = GrowthSignals {
                        gradient: Some(grads[k].as_slice()),
                        momentum: Some(optimizer.momentum(k)),
                        ever_active: Some(ever_active[k].bits()),
                    };
                    let seed = derive_seed(cfg.seed, STREAM_REWIRE ^ (iteration << 8) ^ k as u64);
                    let (w, m) = model.layer_mut(k);
                    let event = rewire_step(m, w, &schedule, iteration, k, &signals, seed)?;
                    ever_active[k].mark(m);
                    rewires_cum += event.n_grown as u64;
                    events.push(event);
                }
                if !cfg.mask_every_step {
                    model.apply_masks();
                }
            }

            let epoch_end = b + 1 == n_batches;
            if epoch_end || iteration % cfg.log_every == 0 {
                let val_accuracy = if epoch_end {
                    Some(accuracy(&model, &encoder, &data.train, &val_idx)?)
                } else {
                    None
                };
                let record = MetricsRecord {
                    iteration,
                    epoch,
                    train_loss: loss_sum / loss_count.max(1) as f64,
                    val_accuracy,
                    layer_densities: model.densities(),
                    rewires_cum,
                    seconds: if cfg.wall_clock {
                        start.elapsed().as_secs_f64()
                    } else {
                        0.0
                    },
                };
                on_record(&record, &model);
                records.push(record);
                (loss_sum, loss_count) = (0.0, 0);
                if let Some(acc) = val_accuracy {
                    if best.as_ref().is_none_or(|b| acc > b.best_val_accuracy) {
                        best = Some(Checkpoint {
                            config: cfg.clone(),
                            epoch: epoch as u64 + 1,
                            iteration,
                            best_val_accuracy: acc,
                            model: model.clone(),
                            ever_active: ever_active.clone(),
                            optimizer: optimizer.clone(),
                            rng: RngState::capture(&rng),
                        });
                    }
                }
            }
        }
    }
    Ok(TrainOutcome {
        checkpoint: best.expect("at least one epoch ran"),
        final_model: model,
        metrics: records,
        rewires: events,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalSplit {
    Train,
    Validation,
    Test,
}

impl std::str::FromStr for EvalSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "validation" | "val" => Ok(Self::Validation),
            "test" => Ok(Self::Test),
            other => Err(Error::invalid(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Accuracy per class; `NaN` for classes absent from the split.
    pub per_class: Vec<f64>,
    pub samples: usize,
    pub ops: OpCounts,
}

/// Top-1 accuracy of a checkpoint on one split.
pub fn evaluate(
    checkpoint: &Checkpoint,
    data: &DataSplits,
    split: EvalSplit,
) -> Result<EvalReport> {
    let cfg = &checkpoint.config;
    let (dataset, indices) = match split {
        EvalSplit::Test => {
            check_geometry(cfg, &data.test)?;
            (&data.test, (0..data.test.len()).collect())
        }
        EvalSplit::Train | EvalSplit::Validation => {
            check_geometry(cfg, &data.train)?;
            let (train, val) = split_indices(cfg, data.train.len())?;
            (
                &data.train,
                if split == EvalSplit::Train {
                    train
                } else {
                    val
                },
            )
        }
    };
    let preds = predict_indices(&checkpoint.model, &Encoder::new(cfg), dataset, &indices)?;
    let classes = InputGeometry::of(cfg).classes;
    let mut hits = vec![0usize; classes];
    let mut totals = vec![0usize; classes];
    for (&p, &k) in preds.iter().zip(&indices) {
        let y = dataset.label(k);
        totals[y] += 1;
        hits[y] += usize::from(p == y);
    }
    let correct: usize = hits.iter().sum();
    Ok(EvalReport {
        accuracy: correct as f64 / indices.len().max(1) as f64,
        per_class: hits
            .iter()
            .zip(&totals)
            .map(|(&h, &t)| {
                if t == 0 {
                    f64::NAN
                } else {
                    h as f64 / t as f64
                }
            })
            .collect(),
        samples: indices.len(),
        ops: checkpoint.model.op_counts(),
    })
}

/// One row of an ε sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub seed: u64,
    /// Measured density of the first layer's mask in the selected checkpoint.
    pub density: f64,
    pub test_accuracy: f64,
}

/// Trains one run per `(ε, seed)` with the first layer's sparsity factor
/// replaced by ε and seeds `cfg.seed .. cfg.seed + seeds`. `on_run` sees
/// each finished run.
pub fn sweep_epsilon<F>(
    cfg: &TrainingConfig,
    epsilons: &[f64],
    seeds: usize,
    data: &DataSplits,
    mut on_run: F,
) -> Result<Vec<SweepRow>>
where
    F: FnMut(&SweepRow, &TrainOutcome) -> Result<()>,
{
    if epsilons.is_empty() || seeds == 0 {
        return Err(Error::invalid(
            "a sweep needs at least one epsilon and one seed",
        ));
    }
    let mut rows = Vec::new();
    for &eps in epsilons {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!(
                "epsilon must be positive, got {eps}"
            )));
        }
        for s in 0..seeds as u64 {
            let mut run = cfg.clone();
            run.seed = cfg.seed.wrapping_add(s);
            if run.epsilon.is_empty() {
                run.epsilon.push(LayerDensity::Epsilon(eps));
            } else {
                run.epsilon[0] = LayerDensity::Epsilon(eps);
            }
            let outcome = train(&run, data)?;
            let report = evaluate(&outcome.checkpoint, data, EvalSplit::Test)?;
            let row = SweepRow {
                epsilon: eps,
                seed: run.seed,
                density: outcome.checkpoint.model.mask(0).density(),
                test_accuracy: report.accuracy,
            };
            on_run(&row, &outcome)?;
            rows.push(row);
        }
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "epsilon,seed,density,test_acc";

impl SweepRow {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.epsilon, self.seed, self.density, self.test_accuracy
        )
    }
}
