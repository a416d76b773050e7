//! Retraining against an evolved graph: warm starts, the neighborhood
//! formula for new nodes, L2 anchoring and drift reports.

mod drift;
mod retrain;
mod warm;

pub use drift::{drift_report, DecileDrift, DriftReport};
pub use retrain::{retrain, RetrainOutcome};
pub use warm::{
    neighborhood_init, warm_start_init, warm_start_with_map, NewNodeInit, PreviousRows, RelationTerm, RetrainMode,
    RetrainPolicy, VersionMap, DEFAULT_ALPHA,
};

#[cfg(test)]
mod tests;
