//! End-to-end behaviour of the training loop on small in-memory datasets.

mod common;

use common::{block_splits, untrained_checkpoint};
use eslsnn::datasets::Dataset;
use eslsnn::metrics::{estimate_energy, write_csv, EnergyModel};
use eslsnn::topology::SparseMask;
use eslsnn::trainer::{
    evaluate, initial_masks, load_data, train, train_with, Checkpoint, DataSplits, DatasetKind,
    EvalSplit, InputGeometry, LayerDensity, LrSchedule, Model, ModelPreset, TrainingConfig,
};

fn temporal_config() -> TrainingConfig {
    TrainingConfig {
        model: ModelPreset::TemporalMlp,
        hidden: 24,
        epochs: 5,
        batch_size: 20,
        t_iter: 3,
        alpha: 0.3,
        epsilon: vec![LayerDensity::Epsilon(4.0)],
        log_every: 2,
        wall_clock: false,
        seed: 7,
        ..TrainingConfig::default()
    }
}

fn lif_config(model: ModelPreset) -> TrainingConfig {
    TrainingConfig {
        model,
        dataset: DatasetKind::SyntheticEvents,
        hidden: 32,
        epochs: 5,
        batch_size: 16,
        t_iter: 4,
        alpha: 0.3,
        epsilon: vec![LayerDensity::Epsilon(3.0), LayerDensity::Epsilon(3.0)],
        lr_schedule: LrSchedule::Constant(0.003),
        synthetic_per_class: 40,
        synthetic_test_per_class: 10,
        log_every: 3,
        wall_clock: false,
        seed: 3,
        ..TrainingConfig::default()
    }
}

fn csv_bytes(cfg: &TrainingConfig, data: &DataSplits) -> Vec<u8> {
    let outcome = train(cfg, data).unwrap();
    let mut bytes = Vec::new();
    write_csv(&mut bytes, &outcome.metrics).unwrap();
    bytes
}

pub fn identical_config_and_seed_give_identical_metrics_bytes() {
    let images = block_splits(200, 50, 1);
    let cfg = temporal_config();
    let first = csv_bytes(&cfg, &images);
    assert_eq!(first, csv_bytes(&cfg, &images));
    let other = TrainingConfig { seed: 8, ..cfg };
    assert_ne!(first, csv_bytes(&other, &images));

    let cfg = lif_config(ModelPreset::LifMlp);
    let events = load_data(&cfg).unwrap();
    assert_eq!(csv_bytes(&cfg, &events), csv_bytes(&cfg, &events));
}

fn assert_masked(model: &Model, context: &str) {
    for k in 0..model.n_layers() {
        let (w, m) = (model.weights(k), model.mask(k));
        for i in 0..m.n_pre() {
            for j in 0..m.n_post() {
                if !m.contains(i, j) {
                    assert_eq!(w.get(i, j), 0.0, "{context}: layer {k} weight ({i}, {j})");
                }
            }
        }
    }
}

pub fn inactive_weights_are_zero_at_every_logged_iteration() {
    let images = block_splits(200, 50, 2);
    for (cfg, data) in [
        (temporal_config(), images),
        (
            lif_config(ModelPreset::LifMlp),
            load_data(&lif_config(ModelPreset::LifMlp)).unwrap(),
        ),
        (
            lif_config(ModelPreset::TinyConv),
            load_data(&lif_config(ModelPreset::TinyConv)).unwrap(),
        ),
    ] {
        let mut logged = 0;
        let outcome = train_with(&cfg, &data, |record, model| {
            assert_masked(
                model,
                &format!("{} iteration {}", cfg.model.name(), record.iteration),
            );
            logged += 1;
        })
        .unwrap();
        assert_eq!(logged, outcome.metrics.len());
        assert!(
            outcome.rewires.iter().any(|e| e.n_grown > 0),
            "{} never rewired",
            cfg.model.name()
        );
        assert!(outcome.metrics.last().unwrap().rewires_cum > 0);
        assert_masked(&outcome.checkpoint.model, "checkpoint");
    }
}

pub fn zero_alpha_keeps_masks_static() {
    let data = block_splits(200, 50, 3);
    let cfg = TrainingConfig {
        alpha: 0.0,
        ..temporal_config()
    };
    let initial = initial_masks(&cfg, &InputGeometry::of(&cfg)).unwrap();
    let mut checks = 0;
    let outcome = train_with(&cfg, &data, |_, model| {
        for (k, mask) in initial.iter().enumerate() {
            assert_eq!(model.mask(k), mask);
        }
        checks += 1;
    })
    .unwrap();
    assert!(checks > 5);
    assert!(outcome.rewires.is_empty());
    assert!(outcome.metrics.iter().all(|r| r.rewires_cum == 0));
}

pub fn saturated_epsilon_reproduces_the_dense_run() {
    let data = block_splits(200, 50, 4);
    let sparse = TrainingConfig {
        epsilon: vec![LayerDensity::Epsilon(1e6)],
        alpha: 0.0,
        epochs: 3,
        ..temporal_config()
    };
    let dense = TrainingConfig {
        epsilon: vec![LayerDensity::Dense],
        ..sparse.clone()
    };
    let a = train(&sparse, &data).unwrap();
    let b = train(&dense, &data).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.final_model, b.final_model);
    assert!(a.final_model.mask(0).density() == 1.0);
}

pub fn training_learns_the_block_task() {
    let data = block_splits(400, 100, 5);
    let cfg = TrainingConfig {
        epochs: 20,
        hidden: 64,
        epsilon: vec![LayerDensity::Epsilon(20.0)],
        lr_schedule: LrSchedule::Constant(0.001),
        // small readouts fall silent without a firm push on the weight sums
        weight_sum_reg: 1.0,
        ..temporal_config()
    };
    let outcome = train(&cfg, &data).unwrap();
    let report = evaluate(&outcome.checkpoint, &data, EvalSplit::Test).unwrap();
    assert!(report.accuracy > 0.8, "test accuracy {}", report.accuracy);
    let again = evaluate(&outcome.checkpoint, &data, EvalSplit::Test).unwrap();
    assert_eq!(report, again);
}

pub fn untrained_networks_sit_at_chance() {
    // Labels are drawn independently of the images, so every classifier
    // has expected accuracy 1/10 on this split.
    let data = block_splits(100, 2000, 6);
    let shuffled = match &data.test {
        Dataset::Images(d) => {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(99);
            let labels: Vec<u8> = (0..d.len())
                .map(|_| rand::Rng::gen_range(&mut rng, 0..10))
                .collect();
            let pixels: Vec<u8> = (0..d.len()).flat_map(|k| d.raw_image(k).to_vec()).collect();
            eslsnn::datasets::ImageDataset::from_parts(28, 28, pixels, labels).unwrap()
        }
        Dataset::Events(_) => unreachable!(),
    };
    let data = DataSplits {
        train: data.train,
        test: Dataset::Images(shuffled),
    };
    let mut total = 0.0;
    for seed in 0..10 {
        let cfg = TrainingConfig {
            seed,
            hidden: 64,
            ..temporal_config()
        };
        let acc = evaluate(&untrained_checkpoint(cfg), &data, EvalSplit::Test)
            .unwrap()
            .accuracy;
        assert!((0.05..=0.15).contains(&acc), "seed {seed}: {acc}");
        total += acc;
    }
    assert!((0.07..=0.13).contains(&(total / 10.0)));
}

pub fn op_counts_follow_the_masks() {
    let dense = untrained_checkpoint(TrainingConfig {
        epsilon: vec![LayerDensity::Dense],
        ..TrainingConfig::default()
    });
    let ops = dense.model.op_counts();
    assert_eq!(ops.total_connections(), 784 * 800 + 800 * 10);
    let energy = estimate_energy(ops.total_connections(), &EnergyModel::default());
    assert!((energy.joules_gpu / 1.13e-5 - 1.0).abs() < 0.02);
    assert!((energy.joules_neuromorphic / 7.95e-6 - 1.0).abs() < 0.02);

    let sparse = untrained_checkpoint(TrainingConfig::default());
    let total = sparse.model.op_counts().total_connections() as f64;
    // 95,040 expected first-layer synapses plus the dense 8,000 readout
    assert!(
        (total - 103_040.0).abs() < 4.0 * (95_040.0f64 * (1.0 - 0.1515)).sqrt(),
        "{total}"
    );

    let mut model = sparse.model.clone();
    let weights_before = model.op_counts();
    for k in 0..model.n_layers() {
        let (w, _) = model.layer_mut(k);
        w.as_mut_slice().iter_mut().for_each(|x| *x = 3.0);
    }
    assert_eq!(
        model.op_counts(),
        weights_before,
        "counts depend on masks only"
    );
    for k in 0..model.n_layers() {
        let (_, m) = model.layer_mut(k);
        *m = SparseMask::empty(m.n_pre(), m.n_post());
    }
    assert_eq!(model.op_counts().total_connections(), 0);

    let conv = untrained_checkpoint(TrainingConfig {
        epsilon: vec![LayerDensity::Dense, LayerDensity::Dense],
        ..lif_config(ModelPreset::TinyConv)
    });
    let layers = conv.model.op_counts().layers;
    // 8x8 input: same-padded 3x3 kernels over 8x8 and 4x4 maps
    assert_eq!(layers[0].ops_per_step, layers[0].connections * 64);
    assert_eq!(layers[1].ops_per_step, layers[1].connections * 16);
    assert_eq!(layers[2].ops_per_step, layers[2].connections);
}

pub fn trained_checkpoint_survives_a_file_round_trip() {
    let cfg = lif_config(ModelPreset::LifMlp);
    let data = load_data(&cfg).unwrap();
    let outcome = train(&cfg, &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.bin");
    outcome.checkpoint.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, outcome.checkpoint);
    assert_eq!(
        evaluate(&back, &data, EvalSplit::Test).unwrap(),
        evaluate(&outcome.checkpoint, &data, EvalSplit::Test).unwrap()
    );
}

/// Test entry points; the bodies above are shared with the acceptance suite.
mod checks {
    #[test]
    fn identical_config_and_seed_give_identical_metrics_bytes() {
        super::identical_config_and_seed_give_identical_metrics_bytes()
    }

    #[test]
    fn inactive_weights_are_zero_at_every_logged_iteration() {
        super::inactive_weights_are_zero_at_every_logged_iteration()
    }

    #[test]
    fn zero_alpha_keeps_masks_static() {
        super::zero_alpha_keeps_masks_static()
    }

    #[test]
    fn saturated_epsilon_reproduces_the_dense_run() {
        super::saturated_epsilon_reproduces_the_dense_run()
    }

    #[test]
    fn training_learns_the_block_task() {
        super::training_learns_the_block_task()
    }

    #[test]
    fn untrained_networks_sit_at_chance() {
        super::untrained_networks_sit_at_chance()
    }

    #[test]
    fn op_counts_follow_the_masks() {
        super::op_counts_follow_the_masks()
    }

    #[test]
    fn trained_checkpoint_survives_a_file_round_trip() {
        super::trained_checkpoint_survives_a_file_round_trip()
    }
}
