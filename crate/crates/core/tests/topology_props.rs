//! Properties of mask initialization, the rewiring schedule and
//! prune-and-regrow steps.

use eslsnn::tensor::Matrix;
use eslsnn::topology::{
    cosine_decay, er_init, rewire_step, ErdosRenyiConfig, EvolutionSchedule, GrowthRule,
    GrowthSignals, PruneRule,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rewiring_conserves_cardinality_over_1000_random_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let prunes = [PruneRule::Magnitude, PruneRule::SetSigned];
    let growths = [
        GrowthRule::RandomUnfired,
        GrowthRule::Gradient,
        GrowthRule::Momentum,
    ];
    let mut total_rewired = 0;
    for step in 0..1000u64 {
        let (n_pre, n_post) = (rng.gen_range(1..30), rng.gen_range(1..30));
        let eps = rng.gen_range(0.2..20.0);
        let mut mask = er_init(
            n_pre,
            n_post,
            &ErdosRenyiConfig::new(eps).unwrap(),
            rng.gen(),
        )
        .unwrap();
        let mut w = Matrix::zeros(n_pre, n_post);
        for (i, j) in mask.active().collect::<Vec<_>>() {
            w.set(i, j, rng.gen_range(-1.0..1.0));
        }
        let len = n_pre * n_post;
        let gradient: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let momentum: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ever: Vec<bool> = (0..len).map(|_| rng.gen_bool(0.3)).collect();
        let aux = GrowthSignals {
            gradient: Some(&gradient),
            momentum: Some(&momentum),
            ever_active: Some(&ever),
        };
        let t_iter = rng.gen_range(1..50);
        let t_end = t_iter * rng.gen_range(1..20);
        let schedule = EvolutionSchedule::new(
            rng.gen_range(0.0..0.99),
            t_iter,
            t_end,
            prunes[rng.gen_range(0..2)],
            growths[rng.gen_range(0..3)],
        )
        .unwrap();
        let iteration = t_iter * rng.gen_range(0..=t_end / t_iter);
        let before = mask.clone();
        let event = rewire_step(&mut mask, &mut w, &schedule, iteration, 0, &aux, step).unwrap();

        assert_eq!(mask.cardinality(), before.cardinality(), "step {step}");
        assert_eq!(event.n_pruned, event.n_grown);
        let expected_k = (cosine_decay(iteration, schedule.alpha, t_end).unwrap()
            * before.cardinality() as f64)
            .round() as usize;
        assert_eq!(event.n_pruned, expected_k.min(before.inactive_count()));
        let removed = before
            .active()
            .filter(|&(i, j)| !mask.contains(i, j))
            .count();
        let added: Vec<_> = mask
            .active()
            .filter(|&(i, j)| !before.contains(i, j))
            .collect();
        assert_eq!((removed, added.len()), (event.n_pruned, event.n_grown));
        for (i, j) in added {
            assert_eq!(w.get(i, j), 0.0, "grown synapse starts at zero");
        }
        for i in 0..n_pre {
            for j in 0..n_post {
                if !mask.contains(i, j) {
                    assert_eq!(w.get(i, j), 0.0, "inactive weight at ({i}, {j})");
                }
            }
        }
        total_rewired += event.n_pruned;
    }
    assert!(total_rewired > 1000);
}

pub fn er_cardinality_stays_within_three_sigma_over_100_seeds() {
    for &(n_pre, n_post, eps) in &[(784, 800, 60.0), (800, 10, 2.0), (50, 40, 5.0)] {
        let cfg = ErdosRenyiConfig::new(eps).unwrap();
        let p = cfg.probability(n_pre, n_post);
        let n = (n_pre * n_post) as f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        let mut total = 0.0;
        for seed in 0..100 {
            let count = er_init(n_pre, n_post, &cfg, seed).unwrap().cardinality() as f64;
            assert!(
                (count - n * p).abs() <= 3.0 * sigma,
                "{n_pre}x{n_post} eps {eps} seed {seed}: {count} vs {}",
                n * p
            );
            total += count;
        }
        let mean = total / 100.0;
        assert!(
            (mean - n * p).abs() <= 3.0 * sigma / 10.0,
            "mean {mean} vs {}",
            n * p
        );
    }
}

pub fn table_scale_first_layer_has_about_95k_connections() {
    let cfg = ErdosRenyiConfig::new(60.0).unwrap();
    assert!((cfg.expected_cardinality(784, 800) - 95_040.0).abs() < 1e-6);
    assert!((cfg.probability(784, 800) - 0.151_530_612_244_897_96).abs() < 1e-12);
}

pub fn cosine_decay_endpoints() {
    TestRunner::new(Config {
        failure_persistence: None,
        ..Config::default()
    })
    .run(&(0.0f64..1.0, 1u64..100_000), |(alpha, t_end)| {
        prop_assert_eq!(cosine_decay(0, alpha, t_end).unwrap(), alpha);
        prop_assert_eq!(cosine_decay(t_end, alpha, t_end).unwrap(), 0.0);
        Ok(())
    })
    .unwrap();
}

proptest! {
    #[test]
    fn cosine_decay_is_non_increasing(alpha in 0.0f64..1.0, t_end in 2u64..10_000, a in 0u64..10_000, b in 0u64..10_000) {
        let (lo, hi) = (a.min(b) % (t_end + 1), a.max(b) % (t_end + 1));
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let f = |t| cosine_decay(t, alpha, t_end).unwrap();
        prop_assert!(f(lo) >= f(hi));
        prop_assert!(f(lo) <= alpha && f(hi) >= 0.0);
    }

    #[test]
    fn er_probability_is_clamped_and_monotone(eps in 0.01f64..1000.0, n_pre in 1usize..2000, n_post in 1usize..2000) {
        let lo = ErdosRenyiConfig::new(eps).unwrap().probability(n_pre, n_post);
        let hi = ErdosRenyiConfig::new(eps * 2.0).unwrap().probability(n_pre, n_post);
        prop_assert!(lo > 0.0 && lo <= hi && hi <= 1.0);
    }
}

/// Test entry points; the bodies above are shared with the acceptance suite.
mod checks {
    #[test]
    fn rewiring_conserves_cardinality_over_1000_random_steps() {
        super::rewiring_conserves_cardinality_over_1000_random_steps()
    }

    #[test]
    fn er_cardinality_stays_within_three_sigma_over_100_seeds() {
        super::er_cardinality_stays_within_three_sigma_over_100_seeds()
    }

    #[test]
    fn table_scale_first_layer_has_about_95k_connections() {
        super::table_scale_first_layer_has_about_95k_connections()
    }

    #[test]
    fn cosine_decay_endpoints() {
        super::cosine_decay_endpoints()
    }
}
