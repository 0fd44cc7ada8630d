//! Erdős–Rényi sparse masks: connection probability, sampled cardinality
//! and the ε that targets a given density.

use eslsnn::topology::{er_init, ErdosRenyiConfig};

fn main() -> eslsnn::Result<()> {
    let (n_pre, n_post) = (784, 800);
    println!(
        "{:>8} {:>10} {:>12} {:>10}",
        "epsilon", "p", "expected", "sampled"
    );
    for eps in [2.0, 10.0, 60.0, 200.0, 1e4] {
        let cfg = ErdosRenyiConfig::new(eps)?;
        let mask = er_init(n_pre, n_post, &cfg, 0)?;
        println!(
            "{eps:>8} {:>10.5} {:>12.0} {:>10}",
            cfg.probability(n_pre, n_post),
            cfg.expected_cardinality(n_pre, n_post),
            mask.cardinality()
        );
    }

    for density in [0.1, 0.3] {
        let cfg = ErdosRenyiConfig::for_density(density, n_pre, n_post)?;
        let mask = er_init(n_pre, n_post, &cfg, 1)?;
        println!(
            "density {density}: epsilon {:.3}, sampled density {:.4}",
            cfg.epsilon(),
            mask.density()
        );
    }
    Ok(())
}
