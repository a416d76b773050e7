//! Link-prediction protocol: per-source held-out targets, ranked against
//! every entity of the relation's target type.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;

use super::metrics::{mrr, recall_at_k, RankedQuery};
use crate::error::{Error, Result};
use crate::hin::{Edge, EntityRef, HinGraph, RelationId};
use crate::rng;
use crate::store::EmbeddingStore;
use crate::trainer::translated_dot;

/// A train graph plus held-out positives for one relation.
#[derive(Debug, Clone)]
pub struct EvalSplit {
    pub relation: RelationId,
    pub train: HinGraph,
    /// source -> distinct held-out targets
    pub held_out: BTreeMap<EntityRef, Vec<EntityRef>>,
}

impl EvalSplit {
    pub fn held_out_edges(&self) -> Vec<Edge> {
        self.held_out
            .iter()
            .flat_map(|(&s, ts)| ts.iter().map(move |&t| Edge::new(s, self.relation, t)))
            .collect()
    }

    /// Build a split from a train graph and separately stored held-out edges.
    pub fn from_edges(train: HinGraph, relation: RelationId, held_out: &[Edge]) -> Result<Self> {
        let mut map: BTreeMap<EntityRef, BTreeSet<EntityRef>> = BTreeMap::new();
        for e in held_out {
            if e.relation != relation {
                return Err(Error::Eval("held-out edge with a different relation".into()));
            }
            if !train.contains(e.source) || !train.contains(e.target) {
                return Err(Error::Eval("held-out edge references an entity unknown to the train graph".into()));
            }
            map.entry(e.source).or_default().insert(e.target);
        }
        let split = EvalSplit {
            relation,
            train,
            held_out: map.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect(),
        };
        split.check_disjoint()?;
        Ok(split)
    }

    fn check_disjoint(&self) -> Result<()> {
        for e in self.train.edges().iter().filter(|e| e.relation == self.relation) {
            if self.held_out.get(&e.source).is_some_and(|ts| ts.contains(&e.target)) {
                return Err(Error::Eval("held-out edge also present in the train graph".into()));
            }
        }
        Ok(())
    }
}

/// Hold out about `fraction` of each source's distinct targets in `relation`.
///
/// Sources with a single distinct target keep it in train. All parallel
/// edges to a held-out target leave the train graph.
pub fn split_edges(graph: &HinGraph, relation: RelationId, fraction: f64, seed: u64) -> Result<EvalSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("holdout fraction must be in (0, 1), got {fraction}")));
    }
    let mut by_source: BTreeMap<EntityRef, BTreeSet<EntityRef>> = BTreeMap::new();
    for e in graph.edges().iter().filter(|e| e.relation == relation) {
        by_source.entry(e.source).or_default().insert(e.target);
    }
    let mut rng = rng::rng_for(seed, &[0x73706c74]);
    let mut held_out = BTreeMap::new();
    let mut removed: HashSet<(EntityRef, EntityRef)> = HashSet::new();
    for (s, targets) in by_source {
        if targets.len() < 2 {
            continue;
        }
        let mut ts: Vec<EntityRef> = targets.into_iter().collect();
        ts.shuffle(&mut rng);
        let k = ((ts.len() as f64 * fraction).round() as usize).clamp(1, ts.len() - 1);
        let mut out: Vec<EntityRef> = ts[..k].to_vec();
        out.sort();
        for &t in &out {
            removed.insert((s, t));
        }
        held_out.insert(s, out);
    }
    let train_edges = graph
        .edges()
        .iter()
        .filter(|e| e.relation != relation || !removed.contains(&(e.source, e.target)))
        .copied()
        .collect();
    Ok(EvalSplit {
        relation,
        train: graph.with_edges(train_edges)?,
        held_out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkPredOptions {
    /// drop the source's train targets from its candidate list
    pub filter_train: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkPredResult {
    pub recall: Vec<(usize, f64)>,
    pub mrr: f64,
    pub queries: usize,
}

impl LinkPredResult {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.recall.iter().find(|(kk, _)| *kk == k).map(|(_, r)| *r)
    }
}

/// Rank every candidate target by `(θ_s + θ_r)·θ_t`, ties to the lower id.
pub fn rank_targets(
    store: &EmbeddingStore,
    source: EntityRef,
    relation: RelationId,
    target_type: crate::hin::EntityTypeId,
    exclude: &HashSet<EntityRef>,
) -> Vec<(EntityRef, f64)> {
    let s = store.entity_row(source);
    let r = store.relation_row(relation);
    let table = store.entity_table(target_type);
    let mut scored: Vec<(EntityRef, f64)> = table
        .iter_rows()
        .enumerate()
        .map(|(i, t)| (EntityRef::new(target_type, i as u32), translated_dot(s, r, t)))
        .filter(|(e, _)| !exclude.contains(e))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

pub fn evaluate_linkpred(
    store: &EmbeddingStore,
    split: &EvalSplit,
    ks: &[usize],
    options: LinkPredOptions,
) -> Result<LinkPredResult> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Eval("k values must be positive".into()));
    }
    store.check_shape(&split.train)?;
    let target_type = split.train.schema().relation(split.relation).target_type;
    let mut train_targets: BTreeMap<EntityRef, HashSet<EntityRef>> = BTreeMap::new();
    if options.filter_train {
        for e in split.train.edges().iter().filter(|e| e.relation == split.relation) {
            train_targets.entry(e.source).or_default().insert(e.target);
        }
    }
    let empty = HashSet::new();
    let queries: Vec<RankedQuery<EntityRef>> = split
        .held_out
        .iter()
        .map(|(&s, positives)| {
            let exclude = train_targets.get(&s).unwrap_or(&empty);
            let ranked = rank_targets(store, s, split.relation, target_type, exclude)
                .into_iter()
                .map(|(e, _)| e)
                .collect();
            RankedQuery::new(ranked, positives.iter().copied())
        })
        .collect();
    if queries.is_empty() {
        return Err(Error::Eval("split has no held-out queries".into()));
    }
    let recall = ks
        .iter()
        .map(|&k| recall_at_k(&queries, k).map(|m| (k, m.value)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LinkPredResult {
        recall,
        mrr: mrr(&queries)?.value,
        queries: queries.len(),
    })
}

/// AUC of separating `positives` from `negatives` by edge score.
pub fn edge_scoring_auc(store: &EmbeddingStore, positives: &[Edge], negatives: &[Edge]) -> Result<f64> {
    let score = |e: &Edge| translated_dot(store.entity_row(e.source), store.relation_row(e.relation), store.entity_row(e.target));
    let mut scores = Vec::with_capacity(positives.len() + negatives.len());
    let mut labels = Vec::with_capacity(scores.capacity());
    for e in positives {
        scores.push(score(e));
        labels.push(1);
    }
    for e in negatives {
        scores.push(score(e));
        labels.push(0);
    }
    super::metrics::roc_auc(&scores, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::{Coverage, GraphBuilder, Schema};
    use proptest::prelude::*;

    fn schema() -> Schema {
        let mut s = Schema::new();
        s.add_entity_type("n").unwrap();
        s.add_relation("r", "n", "n", Coverage::High).unwrap();
        s.add_relation("q", "n", "n", Coverage::Low).unwrap();
        s
    }

    fn graph(edges: &[(&str, &str, &str)]) -> HinGraph {
        let mut b = GraphBuilder::new(schema());
        for id in ["s", "a", "b", "c", "d"] {
            b.entity("n", id).unwrap();
        }
        for (s, r, t) in edges {
            b.add_edge("n", s, r, "n", t).unwrap();
        }
        b.build().unwrap()
    }

    /// One dimension, zero relation: every source ranks a > b > c > {s, d}.
    fn store(g: &HinGraph) -> EmbeddingStore {
        let mut st = EmbeddingStore::zeros(g, 1).unwrap();
        for (id, v) in [("s", 1.0), ("a", 4.0), ("b", 3.0), ("c", 2.0), ("d", 1.0)] {
            st.entity_row_mut(g.lookup("n", id).unwrap())[0] = v;
        }
        st
    }

    fn hand_split() -> EvalSplit {
        let g = graph(&[("s", "r", "a"), ("s", "r", "b")]);
        let held = [
            Edge::new(g.lookup("n", "s").unwrap(), RelationId(0), g.lookup("n", "c").unwrap()),
            Edge::new(g.lookup("n", "s").unwrap(), RelationId(0), g.lookup("n", "d").unwrap()),
        ];
        EvalSplit::from_edges(g, RelationId(0), &held).unwrap()
    }

    #[test]
    fn ranking_breaks_ties_to_the_lower_id() {
        let split = hand_split();
        let st = store(&split.train);
        let s = split.train.lookup("n", "s").unwrap();
        let ranked: Vec<&str> = rank_targets(&st, s, RelationId(0), s.entity_type, &HashSet::new())
            .into_iter()
            .map(|(e, _)| split.train.ids().external(e))
            .collect();
        assert_eq!(ranked, ["a", "b", "c", "s", "d"]);
    }

    #[test]
    fn hand_computed_recall_and_mrr() {
        let split = hand_split();
        let st = store(&split.train);
        let raw = evaluate_linkpred(&st, &split, &[2, 3, 5], LinkPredOptions::default()).unwrap();
        assert_eq!(raw.queries, 1);
        assert_eq!(raw.recall, vec![(2, 0.0), (3, 0.5), (5, 1.0)]);
        assert_eq!(raw.mrr, 1.0 / 3.0);
        let filtered = evaluate_linkpred(&st, &split, &[2, 3], LinkPredOptions { filter_train: true }).unwrap();
        assert_eq!(filtered.recall, vec![(2, 0.5), (3, 1.0)]);
        assert_eq!(filtered.mrr, 1.0);
        assert_eq!(filtered.recall_at(3), Some(1.0));
        assert!(evaluate_linkpred(&st, &split, &[0], LinkPredOptions::default()).is_err());
    }

    #[test]
    fn overlapping_held_out_edges_are_rejected() {
        let g = graph(&[("s", "r", "a")]);
        let e = g.edges()[0];
        assert!(EvalSplit::from_edges(g.clone(), RelationId(0), &[e]).is_err());
        let other = Edge::new(e.source, RelationId(1), e.target);
        assert!(EvalSplit::from_edges(g, RelationId(0), &[other]).is_err());
    }

    #[test]
    fn perfect_separation_has_unit_auc() {
        let split = hand_split();
        let st = store(&split.train);
        let pos = split.train.edges().to_vec();
        let s = pos[0].source;
        let neg = [Edge::new(s, RelationId(0), split.train.lookup("n", "d").unwrap())];
        assert_eq!(edge_scoring_auc(&st, &pos, &neg).unwrap(), 1.0);
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let g = graph(&[("s", "r", "a"), ("s", "r", "b")]);
        for f in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(split_edges(&g, RelationId(0), f, 1).is_err());
        }
    }

    proptest! {
        #[test]
        fn split_partitions_the_relation_and_spares_others(
            pairs in prop::collection::vec((0usize..5, 0usize..5, 0usize..2), 1..40),
            fraction in 0.05f64..0.95,
            seed in 0u64..1000,
        ) {
            let ids = ["s", "a", "b", "c", "d"];
            let edges: Vec<(&str, &str, &str)> = pairs.iter().map(|&(s, t, r)| (ids[s], ["r", "q"][r], ids[t])).collect();
            let g = graph(&edges);
            let split = split_edges(&g, RelationId(0), fraction, seed).unwrap();
            let distinct = |g: &HinGraph, r: u32| -> BTreeSet<(EntityRef, EntityRef)> {
                g.edges().iter().filter(|e| e.relation == RelationId(r)).map(|e| (e.source, e.target)).collect()
            };
            let before = distinct(&g, 0);
            let kept = distinct(&split.train, 0);
            let held: BTreeSet<_> = split.held_out_edges().iter().map(|e| (e.source, e.target)).collect();
            prop_assert!(kept.is_disjoint(&held));
            prop_assert_eq!(kept.union(&held).copied().collect::<BTreeSet<_>>(), before);
            prop_assert_eq!(distinct(&split.train, 1), distinct(&g, 1));
            for (s, ts) in &split.held_out {
                prop_assert!(!ts.is_empty());
                prop_assert!(kept.iter().any(|(ks, _)| ks == s));
            }
        }
    }
}
