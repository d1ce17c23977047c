//! Derivation tree of graph states, propagation-step grouping, metrics and exports.

mod export;
mod metrics;
mod persist;
mod tree;

pub use export::ExportFormat;
pub use metrics::{compare_table, MetricSeries, StepMetrics};
pub use persist::{PersistError, StateRecord, TreeDocument};
pub use tree::{Derivation, DerivationTree, ElementSnapshot, Event, GroupId, StateId, StepGroup, StepState, TreeError};
