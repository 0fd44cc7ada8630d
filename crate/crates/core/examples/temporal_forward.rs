//! Exact single-spike inference on a tiny network: first spike times, the
//! causal input set of each neuron, the loss and its weight gradients.

use eslsnn::temporal::{z_loss, TemporalNetwork, ZSpikeVector};
use eslsnn::topology::SparseMask;

fn main() -> eslsnn::Result<()> {
    let mut net = TemporalNetwork::new(
        vec![SparseMask::dense(3, 4), SparseMask::dense(4, 2)],
        1.0,
        0,
    )?;
    let w1 = [
        [1.2, 0.3, -0.4, 0.9],
        [0.8, 1.1, 0.5, -0.2],
        [-0.3, 0.6, 1.4, 0.7],
    ];
    for (i, row) in w1.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            net.layers[0].weights.set(i, j, w);
        }
    }
    for i in 0..4 {
        net.layers[1].weights.set(i, 0, 0.9 - 0.2 * i as f64);
        net.layers[1].weights.set(i, 1, 0.7 + 0.3 * i as f64);
    }

    let input = ZSpikeVector::from_times(&[Some(0.0), Some(0.4), None])?;
    let trace = net.forward(&input)?;
    for (k, layer) in trace.activations.iter().enumerate() {
        let times: Vec<String> = (0..layer.len())
            .map(|j| layer.time(j).map_or("silent".into(), |t| format!("{t:.4}")))
            .collect();
        println!("layer {k} spike times: {}", times.join(", "));
    }
    for j in 0..4 {
        println!(
            "hidden {j} fired after {} causal inputs",
            trace.causal[0].prefix_len(j)
        );
    }

    let target = 1;
    let (loss, _) = z_loss(trace.output(), target)?;
    println!(
        "loss for class {target}: {loss:.6}, prediction {}",
        net.predict(&input)?
    );
    let grads = net.batch_gradients(&[&input], &[target])?.grads;
    for (k, g) in grads.iter().enumerate() {
        println!("layer {k} gradient norm {:.6}", g.norm());
    }
    Ok(())
}
