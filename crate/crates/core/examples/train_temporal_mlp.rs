//! Trains the single-spike 784-800-10 MLP with sparse, evolving first-layer
//! connectivity on a subset of MNIST.
//!
//! Usage: `cargo run --release --example train_temporal_mlp -- [epochs] [epsilon]`
//! with MNIST under `$ESLSNN_DATA_DIR`.

use eslsnn::trainer::{
    evaluate, load_data, train_with, DatasetKind, EvalSplit, LayerDensity, TrainingConfig,
};

fn main() -> eslsnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().and_then(|a| a.parse().ok()).unwrap_or(3);
    let epsilon = args.next().and_then(|a| a.parse().ok()).unwrap_or(60.0);
    let cfg = TrainingConfig {
        dataset: DatasetKind::Mnist,
        train_limit: Some(10_000),
        test_limit: Some(2_000),
        epochs,
        epsilon: vec![LayerDensity::Epsilon(epsilon)],
        ..TrainingConfig::default()
    };
    let data = match load_data(&cfg) {
        Ok(data) => data,
        Err(e) => {
            eprintln!("{e}\nset ESLSNN_DATA_DIR to a directory holding the MNIST idx files");
            std::process::exit(1);
        }
    };
    let outcome = train_with(&cfg, &data, |r, model| {
        if let Some(acc) = r.val_accuracy {
            println!(
                "epoch {} loss {:.4} val {acc:.4} density {:.4} rewired {}",
                r.epoch,
                r.train_loss,
                model.mask(0).density(),
                r.rewires_cum
            );
        }
    })?;
    let report = evaluate(&outcome.checkpoint, &data, EvalSplit::Test)?;
    println!(
        "test accuracy {:.4} with {} connections",
        report.accuracy,
        report.ops.total_connections()
    );
    Ok(())
}
