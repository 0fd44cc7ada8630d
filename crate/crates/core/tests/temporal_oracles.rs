//! Independent checks of the exact single-spike layer: spike times against a
//! time-domain simulation and gradients against central finite differences.

use eslsnn::temporal::{
    backward_layer, forward_layer, z_loss, TemporalLayer, TemporalNetwork, ZSpikeVector,
};
use eslsnn::tensor::Matrix;
use eslsnn::topology::SparseMask;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Simulation window; later spikes are treated as silent on both sides.
const HORIZON: f64 = 12.0;
const DT: f64 = 1e-2;

/// First time the membrane `V(t) = Σ w_i (1 - exp(-(t - t_i)))` reaches 1.
///
/// Marches the synaptic current `I` and potential `V` in steps of at most
/// `DT`, stopping at every input arrival. Within a step `I` decays without
/// changing sign, so `V` is monotone there and a crossing is bracketed and
/// bisected.
fn simulate_first_spike(inputs: &[(f64, f64)]) -> Option<f64> {
    let mut events: Vec<(f64, f64)> = inputs.to_vec();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut t, mut v, mut current) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut next = 0;
    while t < HORIZON {
        while next < events.len() && events[next].0 <= t {
            current += events[next].1;
            next += 1;
        }
        let stop = events.get(next).map_or(HORIZON, |e| e.0.min(HORIZON));
        let h = DT.min(stop - t);
        let at = |s: f64| v + current * (1.0 - (-s).exp());
        if at(h) >= 1.0 {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if at(mid) >= 1.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(t + hi);
        }
        v = at(h);
        current *= (-h).exp();
        t += h;
    }
    None
}

fn random_layer(rng: &mut ChaCha8Rng) -> (TemporalLayer, ZSpikeVector) {
    let n_pre = rng.gen_range(2..10);
    let n_post = rng.gen_range(1..6);
    let pairs: Vec<(usize, usize)> = (0..n_pre)
        .flat_map(|i| (0..n_post).map(move |j| (i, j)))
        .filter(|_| rng.gen_bool(0.8))
        .collect();
    let mask = SparseMask::from_pairs(n_pre, n_post, pairs).unwrap();
    let mut w = Matrix::zeros(n_pre, n_post);
    for (i, j) in mask.active().collect::<Vec<_>>() {
        w.set(i, j, rng.gen_range(-0.6..1.2));
    }
    let times: Vec<Option<f64>> = (0..n_pre)
        .map(|_| rng.gen_bool(0.85).then(|| rng.gen_range(0.0..2.0)))
        .collect();
    (
        TemporalLayer::new(w, mask).unwrap(),
        ZSpikeVector::from_times(&times).unwrap(),
    )
}

pub fn exact_spike_times_match_time_stepped_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut fired, mut silent) = (0, 0);
    for _ in 0..200 {
        let (layer, z_in) = random_layer(&mut rng);
        let (z_out, _) = forward_layer(&z_in, &layer).unwrap();
        for j in 0..layer.n_post() {
            let inputs: Vec<(f64, f64)> = (0..layer.n_pre())
                .filter(|&i| layer.mask.contains(i, j))
                .filter_map(|i| z_in.time(i).map(|t| (t, layer.weights.get(i, j))))
                .collect();
            let simulated = simulate_first_spike(&inputs);
            let exact = z_out.time(j).filter(|&t| t < HORIZON);
            match (exact, simulated) {
                (Some(a), Some(b)) => {
                    assert!(
                        (a - b).abs() < 1e-3,
                        "spike at {a} but simulation gives {b}"
                    );
                    fired += 1;
                }
                (None, None) => silent += 1,
                other => {
                    panic!("exact and simulated firing disagree: {other:?} for inputs {inputs:?}")
                }
            }
        }
    }
    assert!(fired > 100 && silent > 20, "fired {fired}, silent {silent}");
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Loss of a network together with every neuron's causal prefix and firing
/// state; the loss is differentiable where that structure does not change.
fn loss_and_structure(
    net: &TemporalNetwork,
    z_in: &ZSpikeVector,
    class: usize,
) -> (f64, Vec<Vec<usize>>) {
    let trace = net.forward(z_in).unwrap();
    let structure = trace
        .causal
        .iter()
        .zip(&trace.activations[1..])
        .map(|(c, z)| {
            (0..z.len())
                .map(|j| 2 * c.prefix_len(j) + usize::from(z.as_slice()[j].is_finite()))
                .collect()
        })
        .collect();
    (z_loss(trace.output(), class).unwrap().0, structure)
}

pub fn network_gradients_match_central_differences() {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 100 {
        attempts += 1;
        assert!(attempts < 2000, "too few differentiable instances");
        let sizes = [
            rng.gen_range(3..8),
            rng.gen_range(3..7),
            rng.gen_range(2..5),
        ];
        let masks = vec![
            SparseMask::dense(sizes[0], sizes[1]),
            SparseMask::dense(sizes[1], sizes[2]),
        ];
        let mut net = TemporalNetwork::new(masks, 1.0, rng.gen()).unwrap();
        for layer in &mut net.layers {
            for w in layer.weights.as_mut_slice() {
                *w = rng.gen_range(-0.3..1.5);
            }
        }
        let times: Vec<Option<f64>> = (0..sizes[0])
            .map(|_| Some(rng.gen_range(0.0..1.5)))
            .collect();
        let z_in = ZSpikeVector::from_times(&times).unwrap();
        let class = rng.gen_range(0..sizes[2]);
        let trace = net.forward(&z_in).unwrap();
        if trace.output().firing_count() < 2 {
            continue;
        }
        let (_, grad_out) = z_loss(trace.output(), class).unwrap();
        let mut grads = net.zero_gradients();
        net.accumulate_gradients(&trace, &grad_out, &mut grads);
        let analytic: Vec<Matrix> = grads.into_iter().map(|g| g.into_matrix()).collect();
        let (_, base) = loss_and_structure(&net, &z_in, class);

        let mut instance_ok = true;
        let mut compared = 0;
        'layers: for k in 0..net.layers.len() {
            for idx in 0..net.layers[k].weights.as_slice().len() {
                let mut plus = net.clone();
                plus.layers[k].weights.as_mut_slice()[idx] += h;
                let mut minus = net.clone();
                minus.layers[k].weights.as_mut_slice()[idx] -= h;
                let (lp, sp) = loss_and_structure(&plus, &z_in, class);
                let (lm, sm) = loss_and_structure(&minus, &z_in, class);
                if sp != base || sm != base {
                    instance_ok = false;
                    break 'layers;
                }
                let numeric = (lp - lm) / (2.0 * h);
                let a = analytic[k].as_slice()[idx];
                assert!(
                    rel_err(a, numeric) < 1e-4,
                    "layer {k} weight {idx}: analytic {a} numeric {numeric}"
                );
                compared += 1;
            }
        }
        if instance_ok && compared > 0 {
            checked += 1;
        }
    }
}

pub fn input_gradients_match_central_differences() {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut checked = 0;
    for _ in 0..500 {
        let (layer, z_in) = random_layer(&mut rng);
        let (z_out, causal) = forward_layer(&z_in, &layer).unwrap();
        let upstream: Vec<f64> = (0..layer.n_post())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        // Silent outputs contribute nothing, matching their zero gradient.
        let objective = |z: &ZSpikeVector| -> f64 {
            z.as_slice()
                .iter()
                .zip(&upstream)
                .filter(|(v, _)| v.is_finite())
                .map(|(v, g)| v * g)
                .sum()
        };
        let (grad_z, grad_w) = backward_layer(&upstream, &z_in, &z_out, &causal, &layer).unwrap();
        let prefixes = |l: &TemporalLayer, z: &ZSpikeVector| {
            let (out, c) = forward_layer(z, l).unwrap();
            let p: Vec<usize> = (0..l.n_post()).map(|j| c.prefix_len(j)).collect();
            (objective(&out), p, out.firing_count())
        };
        let (_, base, base_fired) = prefixes(&layer, &z_in);
        let mut stable = true;
        for i in 0..layer.n_pre() {
            if !z_in.as_slice()[i].is_finite() {
                continue;
            }
            let mut zp = z_in.as_slice().to_vec();
            zp[i] += h;
            let mut zm = z_in.as_slice().to_vec();
            zm[i] -= h;
            let (fp, pp, cp) = prefixes(&layer, &ZSpikeVector::new(zp).unwrap());
            let (fm, pm, cm) = prefixes(&layer, &ZSpikeVector::new(zm).unwrap());
            if pp != base || pm != base || cp != base_fired || cm != base_fired {
                stable = false;
                break;
            }
            let numeric = (fp - fm) / (2.0 * h);
            assert!(
                rel_err(grad_z[i], numeric) < 1e-4,
                "input {i}: {} vs {numeric}",
                grad_z[i]
            );
        }
        for i in 0..layer.n_pre() {
            for j in 0..layer.n_post() {
                if !layer.mask.contains(i, j) {
                    assert_eq!(grad_w.get(i, j), 0.0);
                }
            }
        }
        if stable && base_fired > 0 {
            checked += 1;
        }
    }
    assert!(checked >= 100, "only {checked} differentiable instances");
}

/// Test entry points; the bodies above are shared with the acceptance suite.
mod checks {
    #[test]
    fn exact_spike_times_match_time_stepped_simulation() {
        super::exact_spike_times_match_time_stepped_simulation()
    }

    #[test]
    fn network_gradients_match_central_differences() {
        super::network_gradients_match_central_differences()
    }

    #[test]
    fn input_gradients_match_central_differences() {
        super::input_gradients_match_central_differences()
    }
}
