//! Prune-and-regrow over a cosine-decayed schedule. The number of active
//! synapses never changes; only their positions do.

use eslsnn::tensor::Matrix;
use eslsnn::topology::{
    cosine_decay, er_init, rewire_step, ErdosRenyiConfig, EvolutionSchedule, GrowthRule,
    GrowthSignals, PruneRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> eslsnn::Result<()> {
    let (n_pre, n_post) = (100, 50);
    let mut mask = er_init(n_pre, n_post, &ErdosRenyiConfig::new(10.0)?, 0)?;
    let mut weights = Matrix::zeros(n_pre, n_post);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (i, j) in mask.active().collect::<Vec<_>>() {
        weights.set(i, j, rng.gen_range(-1.0..1.0));
    }

    let schedule =
        EvolutionSchedule::new(0.3, 100, 1000, PruneRule::SetSigned, GrowthRule::Gradient)?;
    let initial = mask.clone();
    println!(
        "{:>9} {:>8} {:>8} {:>10}",
        "iteration", "fraction", "rewired", "active"
    );
    for iteration in (0..=schedule.t_end).step_by(schedule.t_iter as usize) {
        let gradient: Vec<f64> = (0..n_pre * n_post)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let aux = GrowthSignals {
            gradient: Some(&gradient),
            ..GrowthSignals::default()
        };
        let event = rewire_step(
            &mut mask,
            &mut weights,
            &schedule,
            iteration,
            0,
            &aux,
            iteration,
        )?;
        let fraction = cosine_decay(iteration, schedule.alpha, schedule.t_end)?;
        println!(
            "{iteration:>9} {fraction:>8.4} {:>8} {:>10}",
            event.n_pruned,
            mask.cardinality()
        );
    }
    let kept = initial
        .active()
        .filter(|&(i, j)| mask.contains(i, j))
        .count();
    println!(
        "{kept} of {} initial synapses survived",
        initial.cardinality()
    );
    Ok(())
}
