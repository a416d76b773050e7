//! Carrying parameters from one graph version to the next.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{EntityRef, HinGraph, IdMap};
use crate::store::EmbeddingStore;
use crate::trainer::Anchor;
use crate::vecmath::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainMode {
    ColdStart,
    #[default]
    WarmStart,
    L2Anchored,
}

impl std::str::FromStr for RetrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cold" | "cold_start" => Ok(RetrainMode::ColdStart),
            "warm" | "warm_start" => Ok(RetrainMode::WarmStart),
            "anchor" | "anchored" | "l2_anchored" => Ok(RetrainMode::L2Anchored),
            other => Err(Error::Config(format!("unknown retrain mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewNodeInit {
    Random,
    #[default]
    NeighborhoodFormula,
}

/// Sign of the relation term in the neighborhood formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationTerm {
    /// `θ_v' + θ_r` for every incident edge
    #[default]
    Additive,
    /// `θ_v' − θ_r` when the new node is the edge's source, `+θ_r` otherwise
    Directional,
}

pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrainPolicy {
    pub mode: RetrainMode,
    pub alpha: f64,
    pub new_node_init: NewNodeInit,
    pub relation_term: RelationTerm,
    /// half-width of the uniform init for rows without a previous value
    pub init_scale: f32,
}

impl Default for RetrainPolicy {
    fn default() -> Self {
        RetrainPolicy {
            mode: RetrainMode::WarmStart,
            alpha: DEFAULT_ALPHA,
            new_node_init: NewNodeInit::NeighborhoodFormula,
            relation_term: RelationTerm::Additive,
            init_scale: crate::store::DEFAULT_INIT_SCALE,
        }
    }
}

impl RetrainPolicy {
    pub fn mode(mode: RetrainMode) -> Self {
        RetrainPolicy {
            mode,
            ..Self::default()
        }
    }

    pub fn anchored(alpha: f64) -> Self {
        RetrainPolicy {
            mode: RetrainMode::L2Anchored,
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == RetrainMode::L2Anchored && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("anchored retraining needs alpha > 0, got {}", self.alpha)));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config("init_scale must be positive".into()));
        }
        Ok(())
    }
}

/// For every entity of the new graph, its row in the previous store, matched
/// by entity type name and external id.
#[derive(Debug, Clone, PartialEq)]
pub struct VersionMap {
    /// per new type: index of the same-named type in the previous store
    prev_type: Vec<Option<usize>>,
    /// per new type, per local id
    prev_local: Vec<Vec<Option<u32>>>,
    /// per new relation: previous relation row
    prev_relation: Vec<Option<usize>>,
}

impl VersionMap {
    pub fn new(new_graph: &HinGraph, prev: &EmbeddingStore, prev_ids: &IdMap) -> Result<Self> {
        let prev_types = prev.entity_type_names();
        if prev_ids.num_types() != prev_types.len() {
            return Err(Error::Shape(format!(
                "previous id map has {} entity types, previous store {}",
                prev_ids.num_types(),
                prev_types.len()
            )));
        }
        let schema = new_graph.schema();
        let mut prev_type = Vec::new();
        let mut prev_local = Vec::new();
        for t in schema.entity_type_ids() {
            let pt = prev.entity_type_index(&schema.entity_type(t).name);
            prev_type.push(pt);
            let locals = match pt {
                None => vec![None; new_graph.entity_count(t)],
                Some(pt) => {
                    let ptid = crate::hin::EntityTypeId(pt as u32);
                    if prev_ids.count(ptid) != prev.entity_count(ptid) {
                        return Err(Error::Shape(format!(
                            "previous id map lists {} {} entities, store holds {}",
                            prev_ids.count(ptid),
                            prev_types[pt],
                            prev.entity_count(ptid)
                        )));
                    }
                    new_graph
                        .ids()
                        .ids(t)
                        .iter()
                        .map(|ext| prev_ids.get(ptid, ext))
                        .collect()
                }
            };
            prev_local.push(locals);
        }
        let prev_relation = schema.relations().iter().map(|r| prev.relation_index(&r.name)).collect();
        Ok(VersionMap {
            prev_type,
            prev_local,
            prev_relation,
        })
    }

    /// Identity map for two stores over the same graph.
    pub fn identity(graph: &HinGraph) -> Self {
        VersionMap {
            prev_type: (0..graph.schema().num_entity_types()).map(Some).collect(),
            prev_local: graph
                .entity_counts()
                .iter()
                .map(|&n| (0..n as u32).map(Some).collect())
                .collect(),
            prev_relation: (0..graph.schema().num_relations()).map(Some).collect(),
        }
    }

    pub fn previous(&self, e: EntityRef) -> Option<EntityRef> {
        let pt = self.prev_type.get(e.entity_type.index()).copied().flatten()?;
        let local = self.prev_local[e.entity_type.index()].get(e.local()).copied().flatten()?;
        Some(EntityRef::new(crate::hin::EntityTypeId(pt as u32), local))
    }

    pub fn previous_relation(&self, r: crate::hin::RelationId) -> Option<crate::hin::RelationId> {
        self.prev_relation
            .get(r.index())
            .copied()
            .flatten()
            .map(|i| crate::hin::RelationId(i as u32))
    }

    pub fn shared_count(&self) -> usize {
        self.prev_local.iter().flatten().filter(|p| p.is_some()).count()
    }
}

/// Previous rows re-indexed by the new graph's entities.
#[derive(Debug, Clone, PartialEq)]
pub struct PreviousRows {
    alpha: f64,
    rows: Vec<Matrix>,
    present: Vec<Vec<bool>>,
}

impl PreviousRows {
    pub fn new(new_graph: &HinGraph, prev: &EmbeddingStore, map: &VersionMap, alpha: f64) -> Self {
        let dim = prev.dim();
        let mut rows = Vec::new();
        let mut present = Vec::new();
        for t in new_graph.schema().entity_type_ids() {
            let n = new_graph.entity_count(t);
            let mut m = Matrix::zeros(n, dim);
            let mut p = vec![false; n];
            for e in new_graph.entities_of_type(t) {
                if let Some(old) = map.previous(e) {
                    m.row_mut(e.local()).copy_from_slice(prev.entity_row(old));
                    p[e.local()] = true;
                }
            }
            rows.push(m);
            present.push(p);
        }
        PreviousRows { alpha, rows, present }
    }
}

impl Anchor for PreviousRows {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn previous(&self, e: EntityRef) -> Option<&[f32]> {
        let t = e.entity_type.index();
        (*self.present.get(t)?.get(e.local())?).then(|| self.rows[t].row(e.local()))
    }
}

/// Initial store for the new graph: shared entities and relations copy their
/// previous rows and accumulators; new entities follow `policy`.
pub fn warm_start_init(
    new_graph: &HinGraph,
    prev: &EmbeddingStore,
    prev_ids: &IdMap,
    policy: &RetrainPolicy,
    seed: u64,
) -> Result<EmbeddingStore> {
    let map = VersionMap::new(new_graph, prev, prev_ids)?;
    warm_start_with_map(new_graph, prev, &map, policy, seed)
}

pub fn warm_start_with_map(
    new_graph: &HinGraph,
    prev: &EmbeddingStore,
    map: &VersionMap,
    policy: &RetrainPolicy,
    seed: u64,
) -> Result<EmbeddingStore> {
    policy.validate()?;
    let dim = prev.dim();
    let mut store = EmbeddingStore::init(new_graph, dim, seed, policy.init_scale)?;
    for r in new_graph.schema().relation_ids() {
        if let Some(pr) = map.previous_relation(r) {
            store.relation_row_mut(r).copy_from_slice(prev.relation_row(pr));
            store
                .relation_accum_row_mut(r)
                .copy_from_slice(prev.relation_accum_table().row(pr.index()));
        }
    }
    let mut new_nodes = Vec::new();
    for e in new_graph.entities() {
        match map.previous(e) {
            Some(old) => {
                if prev.entity_count(old.entity_type) <= old.local() {
                    return Err(Error::Shape(format!("previous row for {} missing", new_graph.describe(e))));
                }
                store.entity_row_mut(e).copy_from_slice(prev.entity_row(old));
                store
                    .entity_accum_row_mut(e)
                    .copy_from_slice(prev.entity_accum_table(old.entity_type).row(old.local()));
            }
            None => new_nodes.push(e),
        }
    }
    if policy.new_node_init == NewNodeInit::NeighborhoodFormula {
        for v in new_nodes {
            if let Some(init) = neighborhood_init(new_graph, prev, map, &store, v, policy.relation_term) {
                store.entity_row_mut(v).copy_from_slice(&init);
            }
        }
    }
    Ok(store)
}

/// `(1/|N_v|) Σ (θ_v' ± θ_r)` over incident edges whose other endpoint
/// existed before, using previous-version vectors; `None` without such edges.
pub fn neighborhood_init(
    graph: &HinGraph,
    prev: &EmbeddingStore,
    map: &VersionMap,
    warm: &EmbeddingStore,
    v: EntityRef,
    term: RelationTerm,
) -> Option<Vec<f32>> {
    let dim = prev.dim();
    let mut acc = vec![0.0f64; dim];
    let mut n = 0usize;
    let mut last = None;
    for &idx in graph.incident_edges(v) {
        if last == Some(idx) {
            continue;
        }
        last = Some(idx);
        let e = graph.edges()[idx as usize];
        let Some(other) = e.other(v) else { continue };
        let Some(old) = map.previous(other) else { continue };
        let sign = match term {
            RelationTerm::Directional if e.source == v => -1.0,
            _ => 1.0,
        };
        let rel = warm.relation_row(e.relation);
        for ((a, &x), &r) in acc.iter_mut().zip(prev.entity_row(old)).zip(rel) {
            *a += x as f64 + sign * r as f64;
        }
        n += 1;
    }
    (n > 0).then(|| acc.into_iter().map(|a| (a / n as f64) as f32).collect())
}
