use std::cmp::Ordering;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{cosine_decay, EvolutionSchedule, GrowthRule, PruneRule, SparseMask, Synapse};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Dense per-synapse signals consulted by the growth rules. Each slice is
/// row-major over the full `n_pre x n_post` grid.
#[derive(Clone, Copy, Debug, Default)]
pub struct GrowthSignals<'a> {
    pub gradient: Option<&'a [f64]>,
    pub momentum: Option<&'a [f64]>,
    pub ever_active: Option<&'a [bool]>,
}

/// Record of one prune-and-regrow step on one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RewireEvent {
    pub iteration: u64,
    pub layer_id: usize,
    pub n_pruned: usize,
    pub n_grown: usize,
    pub density_after: f64,
}

// Ascending by key, ties broken by (i, j).
fn by_key_then_index(a: &(f64, Synapse), b: &(f64, Synapse)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Selects `k` active synapses to remove. The mask is not modified.
///
/// Under [`PruneRule::SetSigned`] zero weights count as non-negative.
pub fn prune(
    mask: &SparseMask,
    weights: &Matrix,
    k: usize,
    rule: PruneRule,
) -> Result<Vec<Synapse>> {
    mask.check_shape(weights)?;
    if k > mask.cardinality() {
        return Err(Error::InsufficientCandidates {
            requested: k,
            available: mask.cardinality(),
        });
    }
    let mut chosen: Vec<Synapse> = match rule {
        PruneRule::Magnitude => {
            let mut ranked: Vec<(f64, Synapse)> = mask
                .active()
                .map(|(i, j)| (weights.get(i, j).abs(), (i, j)))
                .collect();
            ranked.sort_by(by_key_then_index);
            ranked.into_iter().take(k).map(|(_, s)| s).collect()
        }
        PruneRule::SetSigned => {
            let (mut neg, mut pos): (Vec<_>, Vec<_>) = mask
                .active()
                .map(|(i, j)| (weights.get(i, j).abs(), (i, j)))
                .partition(|&(_, (i, j))| weights.get(i, j) < 0.0);
            neg.sort_by(by_key_then_index);
            pos.sort_by(by_key_then_index);
            let mut want_neg = k.div_ceil(2);
            let mut want_pos = k / 2;
            if neg.len() < want_neg {
                want_pos += want_neg - neg.len();
                want_neg = neg.len();
            } else if pos.len() < want_pos {
                want_neg += want_pos - pos.len();
                want_pos = pos.len();
            }
            neg.iter()
                .take(want_neg)
                .chain(pos.iter().take(want_pos))
                .map(|&(_, s)| s)
                .collect()
        }
    };
    chosen.sort_unstable();
    Ok(chosen)
}

/// Selects `k` inactive synapses to activate. The mask is not modified.
pub fn grow(
    mask: &SparseMask,
    k: usize,
    rule: GrowthRule,
    aux: &GrowthSignals<'_>,
    seed: u64,
) -> Result<Vec<Synapse>> {
    if k > mask.inactive_count() {
        return Err(Error::InsufficientCandidates {
            requested: k,
            available: mask.inactive_count(),
        });
    }
    let check_len = |len: usize, signal: &str| -> Result<()> {
        if len != mask.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} {signal} entries", mask.len()),
                actual: len.to_string(),
            });
        }
        Ok(())
    };
    let mut chosen = match rule {
        GrowthRule::RandomUnfired => {
            let ever = aux.ever_active.ok_or(Error::MissingSignal {
                rule: rule.name(),
                signal: "ever-active",
            })?;
            check_len(ever.len(), "ever-active")?;
            let n_post = mask.n_post();
            let (unfired, fired): (Vec<Synapse>, Vec<Synapse>) =
                mask.inactive().partition(|&(i, j)| !ever[i * n_post + j]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if k <= unfired.len() {
                index::sample(&mut rng, unfired.len(), k)
                    .into_iter()
                    .map(|x| unfired[x])
                    .collect::<Vec<_>>()
            } else {
                let rest = k - unfired.len();
                let mut out = unfired;
                out.extend(
                    index::sample(&mut rng, fired.len(), rest)
                        .into_iter()
                        .map(|x| fired[x]),
                );
                out
            }
        }
        GrowthRule::Gradient | GrowthRule::Momentum => {
            let (signal, name) = if rule == GrowthRule::Gradient {
                (aux.gradient, "gradient")
            } else {
                (aux.momentum, "momentum")
            };
            let signal = signal.ok_or(Error::MissingSignal {
                rule: rule.name(),
                signal: name,
            })?;
            check_len(signal.len(), name)?;
            let n_post = mask.n_post();
            // descending magnitude: rank by the negated key
            let mut ranked: Vec<(f64, Synapse)> = mask
                .inactive()
                .map(|(i, j)| (-signal[i * n_post + j].abs(), (i, j)))
                .collect();
            if k < ranked.len() && k > 0 {
                ranked.select_nth_unstable_by(k - 1, by_key_then_index);
                ranked.truncate(k);
            }
            ranked.sort_by(by_key_then_index);
            ranked.into_iter().take(k).map(|(_, s)| s).collect()
        }
    };
    chosen.sort_unstable();
    Ok(chosen)
}

/// One prune-and-regrow step on a single layer.
///
/// The rewire count is `round(cosine_decay(iteration) * |active|)`, capped by
/// the number of inactive synapses so a saturated mask rewires nothing.
/// Pruned and grown synapses both end with weight exactly zero.
#[allow(clippy::too_many_arguments)]
pub fn rewire_step(
    mask: &mut SparseMask,
    weights: &mut Matrix,
    schedule: &EvolutionSchedule,
    iteration: u64,
    layer_id: usize,
    aux: &GrowthSignals<'_>,
    seed: u64,
) -> Result<RewireEvent> {
    schedule.validate()?;
    mask.check_shape(weights)?;
    if iteration % schedule.t_iter != 0 || iteration > schedule.t_end {
        return Err(Error::invalid(format!(
            "iteration {iteration} is not a rewire point (t_iter {}, t_end {})",
            schedule.t_iter, schedule.t_end
        )));
    }
    let fraction = cosine_decay(iteration, schedule.alpha, schedule.t_end)?;
    let k = ((fraction * mask.cardinality() as f64).round() as usize).min(mask.inactive_count());

    let (pruned, grown) = if k == 0 {
        (Vec::new(), Vec::new())
    } else {
        let pruned = prune(mask, weights, k, schedule.prune_rule)?;
        let grown = grow(mask, k, schedule.growth_rule, aux, seed)?;
        (pruned, grown)
    };
    for &(i, j) in &pruned {
        mask.remove(i, j);
        weights.set(i, j, 0.0);
    }
    for &(i, j) in &grown {
        mask.insert(i, j);
        weights.set(i, j, 0.0);
    }
    Ok(RewireEvent {
        iteration,
        layer_id,
        n_pruned: pruned.len(),
        n_grown: grown.len(),
        density_after: mask.density(),
    })
}
