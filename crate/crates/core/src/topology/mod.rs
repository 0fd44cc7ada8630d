//! Connection masks and their evolution.
//!
//! A layer's topology starts as an Erdős–Rényi random graph ([`er_init`]) and
//! is periodically rewired by pruning weak synapses and growing an equal number
//! of new ones ([`rewire_step`]), which keeps each layer's connection count
//! fixed for the whole run.

mod evolve;
mod init;
mod mask;

pub use evolve::{grow, prune, rewire_step, GrowthSignals, RewireEvent};
pub use init::{cosine_decay, er_init, ErdosRenyiConfig, EvolutionSchedule, GrowthRule, PruneRule};
pub use mask::{EverActive, SparseMask, Synapse};
