//! Cluster-engagement mixtures and inductive placement of new targets.
//!
//! A source's mixture is `P(c | u) = count(u, c) / Σ_{c'} count(u, c')`
//! restricted to its `m` most engaged clusters, where `count(u, c)` is the
//! number of edges between `u` and targets assigned to cluster `c`.

use std::collections::BTreeMap;

use super::kmeans::ClusterModel;
use crate::error::{Error, Result};
use crate::hin::{EntityRef, EntityTypeId, HinGraph, RelationId};
use crate::store::EmbeddingStore;
use crate::vecmath::{mean_of_rows, nearest_row};

pub const DEFAULT_TOP_M: usize = 3;
pub const DEFAULT_CLUSTERS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    /// `None` marks the unimodal fallback
    pub cluster: Option<usize>,
    pub count: u64,
    pub weight: f64,
    pub centroid: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureRepresentation {
    pub components: Vec<MixtureComponent>,
    /// sum of the kept counts; weight `i` is exactly `count_i / kept_total`
    pub kept_total: u64,
}

impl MixtureRepresentation {
    /// Single component carrying the entity's own trained embedding.
    pub fn unimodal(embedding: &[f32]) -> Self {
        MixtureRepresentation {
            components: vec![MixtureComponent {
                cluster: None,
                count: 1,
                weight: 1.0,
                centroid: embedding.to_vec(),
            }],
            kept_total: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn is_fallback(&self) -> bool {
        self.components.iter().any(|c| c.cluster.is_none())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    /// Weight of component `i` as the exact fraction `(count, kept_total)`.
    pub fn fraction(&self, i: usize) -> (u64, u64) {
        (self.components[i].count, self.kept_total)
    }
}

/// Which edges count as engagements with the clustered targets.
#[derive(Debug, Clone, PartialEq)]
pub struct EngagementScope {
    pub target_type: EntityTypeId,
    /// `None` counts every relation touching the target type
    pub relations: Option<Vec<RelationId>>,
}

impl EngagementScope {
    pub fn new(target_type: EntityTypeId) -> Self {
        EngagementScope {
            target_type,
            relations: None,
        }
    }

    pub fn relations(mut self, relations: Vec<RelationId>) -> Self {
        self.relations = Some(relations);
        self
    }

    fn admits(&self, r: RelationId) -> bool {
        self.relations.as_ref().is_none_or(|rs| rs.contains(&r))
    }
}

/// Per-cluster engagement counts of `source`; edges are counted in either
/// direction, targets outside the model are ignored.
pub fn engagement_counts(
    source: EntityRef,
    graph: &HinGraph,
    model: &ClusterModel,
    scope: &EngagementScope,
) -> BTreeMap<usize, u64> {
    let mut counts = BTreeMap::new();
    let mut last = None;
    for &idx in graph.incident_edges(source) {
        // a self-loop is listed twice in a row
        if last == Some(idx) {
            continue;
        }
        last = Some(idx);
        let e = graph.edges()[idx as usize];
        if !scope.admits(e.relation) {
            continue;
        }
        let Some(other) = e.other(source) else { continue };
        if other.entity_type != scope.target_type {
            continue;
        }
        if let Some(c) = model.cluster_of(other.local()) {
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    counts
}

/// Keep the `m` largest counts (ties to the lower cluster index) and
/// renormalize over the kept set.
pub fn distribution_from_counts(
    counts: &BTreeMap<usize, u64>,
    model: &ClusterModel,
    m: usize,
) -> Result<MixtureRepresentation> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let mut ranked: Vec<(usize, u64)> = counts.iter().map(|(&c, &n)| (c, n)).filter(|&(_, n)| n > 0).collect();
    if ranked.is_empty() {
        return Err(Error::NoEngagements("no engagements with clustered targets".into()));
    }
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(m);
    let kept_total: u64 = ranked.iter().map(|&(_, n)| n).sum();
    let components = ranked
        .into_iter()
        .map(|(c, n)| {
            if c >= model.k() {
                return Err(Error::InvalidArgument(format!("cluster {c} outside model of {}", model.k())));
            }
            Ok(MixtureComponent {
                cluster: Some(c),
                count: n,
                weight: n as f64 / kept_total as f64,
                centroid: model.centroid(c).to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MixtureRepresentation { components, kept_total })
}

pub fn engagement_distribution(
    source: EntityRef,
    graph: &HinGraph,
    model: &ClusterModel,
    scope: &EngagementScope,
    m: usize,
) -> Result<MixtureRepresentation> {
    let counts = engagement_counts(source, graph, model, scope);
    distribution_from_counts(&counts, model, m).map_err(|e| match e {
        Error::NoEngagements(_) => Error::NoEngagements(graph.describe(source)),
        other => other,
    })
}

/// Mixtures for every entity of `source_type`; sources without engagements
/// fall back to their own embedding from `store`.
pub fn build_mixtures(
    graph: &HinGraph,
    store: &EmbeddingStore,
    model: &ClusterModel,
    source_type: EntityTypeId,
    scope: &EngagementScope,
    m: usize,
) -> Result<Vec<MixtureRepresentation>> {
    graph
        .entities_of_type(source_type)
        .map(|u| match engagement_distribution(u, graph, model, scope, m) {
            Err(Error::NoEngagements(_)) => Ok(MixtureRepresentation::unimodal(store.entity_row(u))),
            other => other,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OovAssignment {
    pub cluster: usize,
    pub centroid: Vec<f32>,
    /// mean of the known neighbors' embeddings
    pub neighbor_mean: Vec<f32>,
}

/// Place a vector-free entity at the centroid nearest to the mean of its
/// neighbors that have embeddings in `store`.
pub fn embed_oov_target(
    neighbors: &[EntityRef],
    store: &EmbeddingStore,
    model: &ClusterModel,
) -> Result<OovAssignment> {
    if store.dim() != model.dim() {
        return Err(Error::Shape(format!(
            "store dim {} differs from centroid dim {}",
            store.dim(),
            model.dim()
        )));
    }
    let known = neighbors
        .iter()
        .filter(|e| e.entity_type.index() < store.entity_type_names().len() && e.local() < store.entity_count(e.entity_type))
        .map(|&e| store.entity_row(e));
    let mean = mean_of_rows(known, store.dim()).ok_or(Error::NoKnownNeighbors)?;
    let (cluster, _) = nearest_row(&model.centroids, &mean);
    Ok(OovAssignment {
        cluster,
        centroid: model.centroid(cluster).to_vec(),
        neighbor_mean: mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::{Coverage, GraphBuilder, Schema};
    use crate::vecmath::Matrix;

    fn model(k: usize) -> ClusterModel {
        let centroids = Matrix::from_rows(1, &(0..k).map(|c| [c as f32]).collect::<Vec<_>>());
        ClusterModel {
            centroids,
            assignment: Vec::new(),
            inertia_history: vec![0.0],
        }
    }

    fn counts(pairs: &[(usize, u64)]) -> BTreeMap<usize, u64> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn normalization_and_truncation_examples() {
        let md = model(4);
        let d = distribution_from_counts(&counts(&[(1, 3), (2, 1)]), &md, 2).unwrap();
        assert_eq!(d.weights(), vec![0.75, 0.25]);
        assert_eq!(d.components[0].cluster, Some(1));
        let d = distribution_from_counts(&counts(&[(1, 3), (2, 1)]), &md, 1).unwrap();
        assert_eq!(d.weights(), vec![1.0]);
        let d = distribution_from_counts(&counts(&[(1, 2), (2, 2), (3, 1)]), &md, 2).unwrap();
        assert_eq!(d.components.iter().map(|c| c.cluster.unwrap()).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(d.weights(), vec![0.5, 0.5]);
        assert!(matches!(distribution_from_counts(&counts(&[]), &md, 2), Err(Error::NoEngagements(_))));
        assert!(distribution_from_counts(&counts(&[(0, 1)]), &md, 0).is_err());
    }

    fn engagement_graph() -> (HinGraph, ClusterModel) {
        let mut s = Schema::new();
        s.add_entity_type("user").unwrap();
        s.add_entity_type("tweet").unwrap();
        s.add_relation("fav", "user", "tweet", Coverage::High).unwrap();
        s.add_relation("authored", "tweet", "user", Coverage::Low).unwrap();
        let mut b = GraphBuilder::new(s);
        for t in ["t0", "t1", "t2", "t3"] {
            b.entity("tweet", t).unwrap();
        }
        b.add_edge("user", "u", "fav", "tweet", "t0").unwrap();
        b.add_edge("user", "u", "fav", "tweet", "t0").unwrap();
        b.add_edge("user", "u", "fav", "tweet", "t1").unwrap();
        b.add_edge("tweet", "t2", "authored", "user", "u").unwrap();
        b.entity("user", "idle").unwrap();
        let g = b.build().unwrap();
        let m = ClusterModel {
            centroids: Matrix::from_rows(2, &[[0.0f32, 0.0], [1.0, 1.0]]),
            assignment: vec![0, 0, 1, 1],
            inertia_history: vec![0.0],
        };
        (g, m)
    }

    #[test]
    fn counts_cover_both_directions_and_multi_edges() {
        let (g, m) = engagement_graph();
        let u = g.lookup("user", "u").unwrap();
        let scope = EngagementScope::new(g.schema().entity_type_id("tweet").unwrap());
        assert_eq!(engagement_counts(u, &g, &m, &scope), counts(&[(0, 3), (1, 1)]));
        let fav_only = scope.clone().relations(vec![g.schema().relation_id("fav").unwrap()]);
        assert_eq!(engagement_counts(u, &g, &m, &fav_only), counts(&[(0, 3)]));
        let d = engagement_distribution(u, &g, &m, &scope, 3).unwrap();
        assert_eq!(d.fraction(0), (3, 4));
        assert_eq!(d.fraction(1), (1, 4));
    }

    #[test]
    fn idle_sources_fall_back_to_their_embedding() {
        let (g, m) = engagement_graph();
        let store = EmbeddingStore::init(&g, 2, 1, 0.1).unwrap();
        let user = g.schema().entity_type_id("user").unwrap();
        let scope = EngagementScope::new(g.schema().entity_type_id("tweet").unwrap());
        let idle = g.lookup("user", "idle").unwrap();
        assert!(matches!(
            engagement_distribution(idle, &g, &m, &scope, 3),
            Err(Error::NoEngagements(_))
        ));
        let all = build_mixtures(&g, &store, &m, user, &scope, 3).unwrap();
        let fb = &all[idle.local()];
        assert!(fb.is_fallback());
        assert_eq!(fb.components[0].centroid, store.entity_row(idle));
        assert_eq!(fb.weights(), vec![1.0]);
    }

    #[test]
    fn oov_nearest_centroid() {
        let (g, _) = engagement_graph();
        let mut store = EmbeddingStore::zeros(&g, 2).unwrap();
        let u = g.lookup("user", "u").unwrap();
        let idle = g.lookup("user", "idle").unwrap();
        let m = ClusterModel {
            centroids: Matrix::from_rows(2, &[[0.0f32, 0.0], [4.0, 0.0], [0.0, 3.0]]),
            assignment: vec![],
            inertia_history: vec![0.0],
        };
        store.entity_row_mut(u).copy_from_slice(&[0.0, 3.0]);
        let a = embed_oov_target(&[u], &store, &m).unwrap();
        assert_eq!(a.cluster, 2);
        assert_eq!(a.centroid, vec![0.0, 3.0]);

        store.entity_row_mut(u).copy_from_slice(&[4.0, 0.5]);
        store.entity_row_mut(idle).copy_from_slice(&[0.0, 2.5]);
        let before = store.clone();
        let a = embed_oov_target(&[u, idle], &store, &m).unwrap();
        let mean = [2.0f64, 1.5];
        let brute = (0..3)
            .map(|c| {
                let r = m.centroid(c);
                ((r[0] as f64 - mean[0]).powi(2) + (r[1] as f64 - mean[1]).powi(2), c)
            })
            .fold((f64::INFINITY, 0), |best, x| if x.0 < best.0 { x } else { best });
        assert_eq!(a.cluster, brute.1);
        assert!(store.bitwise_eq(&before));
        assert!(matches!(embed_oov_target(&[], &store, &m), Err(Error::NoKnownNeighbors)));
        let unknown = EntityRef::new(u.entity_type, 99);
        assert!(matches!(embed_oov_target(&[unknown], &store, &m), Err(Error::NoKnownNeighbors)));
    }
}
