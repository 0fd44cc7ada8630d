//! Training metrics records and synaptic-operation energy accounting.

mod energy;
mod record;

pub use energy::{estimate_energy, EnergyEstimate, EnergyModel, LayerOps, OpCounts};
pub use record::{read_csv, write_csv, MetricsRecord, CSV_HEADER};
