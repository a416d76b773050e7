use super::drift::{drift_report, DriftReport};
use super::warm::{warm_start_with_map, PreviousRows, RetrainMode, RetrainPolicy, VersionMap};
use crate::error::Result;
use crate::hin::{partition, HinGraph, IdMap};
use crate::store::EmbeddingStore;
use crate::trainer::{TrainConfig, TrainReport, Trainer};

#[derive(Debug, Clone)]
pub struct RetrainOutcome {
    pub store: EmbeddingStore,
    pub report: TrainReport,
    pub drift: DriftReport,
}

/// Train on `new_graph` starting from `prev` according to `policy`, then
/// measure drift over the entities both versions share.
pub fn retrain(
    new_graph: &HinGraph,
    prev: &EmbeddingStore,
    prev_ids: &IdMap,
    policy: &RetrainPolicy,
    config: &TrainConfig,
) -> Result<RetrainOutcome> {
    policy.validate()?;
    config.validate()?;
    let map = VersionMap::new(new_graph, prev, prev_ids)?;
    let init = match policy.mode {
        RetrainMode::ColdStart => EmbeddingStore::init(new_graph, prev.dim(), config.seed, policy.init_scale)?,
        RetrainMode::WarmStart | RetrainMode::L2Anchored => {
            warm_start_with_map(new_graph, prev, &map, policy, config.seed)?
        }
    };
    let parts = partition(new_graph, config.num_partitions, config.seed)?;
    let anchor = PreviousRows::new(new_graph, prev, &map, policy.alpha);
    let mut trainer = Trainer::new(new_graph, &parts, config.clone());
    if policy.mode == RetrainMode::L2Anchored {
        trainer = trainer.with_anchor(&anchor);
    }
    let (store, report) = trainer.run(init)?;
    let drift = drift_report(prev, &store, new_graph, &map)?;
    Ok(RetrainOutcome { store, report, drift })
}
