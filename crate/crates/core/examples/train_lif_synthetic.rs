//! Trains a sparse LIF network on the synthetic event dataset, once as an
//! MLP and once as the small convolutional net. Classes that sweep the same
//! positions in opposite directions differ only in timing, so accuracy
//! above one half needs the membrane to carry state across steps.

use eslsnn::trainer::{
    evaluate, load_data, train, DatasetKind, EvalSplit, LayerDensity, LrSchedule, ModelPreset,
    TrainingConfig,
};

fn main() -> eslsnn::Result<()> {
    for model in [ModelPreset::LifMlp, ModelPreset::TinyConv] {
        let cfg = TrainingConfig {
            model,
            dataset: DatasetKind::SyntheticEvents,
            hidden: 64,
            epochs: 8,
            batch_size: 16,
            t_iter: 10,
            lr_schedule: LrSchedule::Constant(0.003),
            epsilon: vec![LayerDensity::Epsilon(3.0), LayerDensity::Epsilon(3.0)],
            synthetic_classes: 4,
            ..TrainingConfig::default()
        };
        let data = load_data(&cfg)?;
        let outcome = train(&cfg, &data)?;
        for r in outcome.metrics.iter().filter(|r| r.val_accuracy.is_some()) {
            println!(
                "{} epoch {} loss {:.4}",
                model.name(),
                r.epoch,
                r.train_loss
            );
        }
        let report = evaluate(&outcome.checkpoint, &data, EvalSplit::Test)?;
        let densities: Vec<String> = outcome
            .checkpoint
            .model
            .densities()
            .iter()
            .map(|d| format!("{d:.3}"))
            .collect();
        println!(
            "{}: test accuracy {:.3}, layer densities {}, {} rewire events",
            model.name(),
            report.accuracy,
            densities.join(" "),
            outcome.rewires.len()
        );
    }
    Ok(())
}
