//! Offline evaluation: ranking metrics, relative cross entropy, the
//! link-prediction protocol and synthetic networks.

mod linkpred;
mod metrics;
mod synth;

pub use linkpred::{
    edge_scoring_auc, evaluate_linkpred, rank_targets, split_edges, EvalSplit, LinkPredOptions, LinkPredResult,
};
pub use metrics::{
    mrr, rce, recall_at_k, recall_at_k_single, reciprocal_rank, roc_auc, MetricSummary, RankedQuery, RceInput,
    RceResult, CE_CLIP,
};
pub use synth::{
    follow_graph_spec, generate_synthetic_hin, modularity, type_id, GroundTruth, SyntheticRelation, SyntheticSpec,
};
