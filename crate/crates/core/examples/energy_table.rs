//! Connection counts and inference energy of the 784-800-10 MLP as the
//! first layer is sparsified. Counts depend only on the masks.

use eslsnn::metrics::{estimate_energy, EnergyModel};
use eslsnn::trainer::{initial_masks, InputGeometry, LayerDensity, Model, TrainingConfig};

fn main() -> eslsnn::Result<()> {
    let energy = EnergyModel::default();
    println!(
        "{:>8} {:>12} {:>12} {:>14}",
        "epsilon", "connections", "gpu (J)", "neuromorphic (J)"
    );
    let mut rows = vec![LayerDensity::Dense];
    rows.extend([200.0, 60.0, 20.0, 5.0].map(LayerDensity::Epsilon));
    for density in rows {
        let cfg = TrainingConfig {
            epsilon: vec![density],
            ..TrainingConfig::default()
        };
        let geo = InputGeometry::of(&cfg);
        let model = Model::build(&cfg, &geo, initial_masks(&cfg, &geo)?)?;
        let connections = model.op_counts().total_connections();
        let e = estimate_energy(connections, &energy);
        let label = match density {
            LayerDensity::Dense => "dense".to_string(),
            LayerDensity::Epsilon(eps) => eps.to_string(),
        };
        println!(
            "{label:>8} {connections:>12} {:>12.3e} {:>14.3e}",
            e.joules_gpu, e.joules_neuromorphic
        );
    }
    Ok(())
}
