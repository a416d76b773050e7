//! Type-consistent corruption of positive edges.
//!
//! Candidates for a corrupted endpoint are the entities of the required type
//! in that endpoint's partition, so a corrupted edge stays inside the bucket
//! of its positive. With a single partition this is the whole graph.

use super::config::{CorruptSide, TrainConfig};
use crate::error::{Error, Result};
use crate::hin::{Edge, EntityRef, EntityTypeId, HinGraph, Partitioning};

#[derive(Debug, Clone)]
struct Pool {
    members: Vec<u32>,
    /// inclusive prefix sums of member degrees
    cumulative: Vec<u64>,
}

impl Pool {
    fn mass_before(&self, pos: usize) -> u64 {
        if pos == 0 {
            0
        } else {
            self.cumulative[pos - 1]
        }
    }

    fn total(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }
}

/// Sampling tables per (entity type, partition).
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    num_partitions: usize,
    pools: Vec<Vec<Pool>>,
    /// per type, per local id: (partition, position inside pool)
    position: Vec<Vec<(u32, u32)>>,
}

impl NegativeSampler {
    pub fn new(graph: &HinGraph, partitioning: &Partitioning) -> Result<Self> {
        if !partitioning.covers(graph) {
            return Err(Error::InvalidArgument("partitioning does not cover the graph".into()));
        }
        let p = partitioning.num_partitions();
        let mut pools = Vec::new();
        let mut position = Vec::new();
        for t in graph.schema().entity_type_ids() {
            let mut type_pools: Vec<Pool> = (0..p)
                .map(|_| Pool {
                    members: Vec::new(),
                    cumulative: Vec::new(),
                })
                .collect();
            let mut pos = Vec::with_capacity(graph.entity_count(t));
            for (local, &deg) in graph.degrees_of_type(t).iter().enumerate() {
                let part = partitioning.assignment()[t.index()][local];
                let pool = &mut type_pools[part as usize];
                pos.push((part, pool.members.len() as u32));
                let prev = pool.total();
                pool.members.push(local as u32);
                pool.cumulative.push(prev + deg as u64);
            }
            pools.push(type_pools);
            position.push(pos);
        }
        Ok(NegativeSampler {
            num_partitions: p,
            pools,
            position,
        })
    }

    /// Graph-wide sampler (single partition).
    pub fn global(graph: &HinGraph) -> Result<Self> {
        let part = Partitioning::from_assignment(1, graph.entity_counts().iter().map(|&n| vec![0; n]).collect())?;
        Self::new(graph, &part)
    }

    pub fn num_partitions(&self) -> usize {
        self.num_partitions
    }

    /// Draw a replacement for `original` from its pool, never `original` itself.
    pub fn replacement(&self, original: EntityRef, negative_mix: f64, rng: &mut impl rand::Rng) -> Result<EntityRef> {
        self.replacement_within(original, None, negative_mix, rng)
    }

    /// Like [`replacement`](Self::replacement); when `original`'s own pool has
    /// a single member the pool of the same type in `fallback` partition
    /// joins the candidates.
    pub fn replacement_within(
        &self,
        original: EntityRef,
        fallback: Option<u32>,
        negative_mix: f64,
        rng: &mut impl rand::Rng,
    ) -> Result<EntityRef> {
        let t = original.entity_type;
        let (part, pos) = self.locate(original)?;
        let pool = &self.pools[t.index()][part as usize];
        let total_of_type: usize = self.pools[t.index()].iter().map(|p| p.members.len()).sum();
        if total_of_type < 2 {
            return Err(Error::Sampling(format!("entity type {} has fewer than two entities", t.0)));
        }
        let proportional = negative_mix > 0.0 && (negative_mix >= 1.0 || rng.gen_bool(negative_mix));
        if pool.members.len() < 2 {
            let other = fallback
                .filter(|&f| f != part)
                .map(|f| &self.pools[t.index()][f as usize])
                .filter(|p| !p.members.is_empty())
                .ok_or_else(|| {
                    Error::Sampling(format!(
                        "entity type {} has fewer than two candidates in partition {part}",
                        t.0
                    ))
                })?;
            return Ok(EntityRef::new(t, draw(other, None, proportional, rng)));
        }
        Ok(EntityRef::new(t, draw(pool, Some(pos as usize), proportional, rng)))
    }

    fn locate(&self, e: EntityRef) -> Result<(u32, u32)> {
        self.position
            .get(e.entity_type.index())
            .and_then(|p| p.get(e.local()))
            .copied()
            .ok_or_else(|| Error::Sampling(format!("entity {}:{} unknown to sampler", e.entity_type.0, e.local_id)))
    }

    /// `config.num_negatives` corruptions of `edge`.
    pub fn sample(&self, edge: &Edge, config: &TrainConfig, rng: &mut impl rand::Rng) -> Result<Vec<Edge>> {
        (0..config.num_negatives)
            .map(|_| {
                let corrupt_source = match config.corrupt_side {
                    CorruptSide::Both => rng.gen_bool(0.5),
                    CorruptSide::SourceOnly => true,
                    CorruptSide::TargetOnly => false,
                };
                let mut neg = *edge;
                if corrupt_source {
                    let alt = self.locate(edge.target)?.0;
                    neg.source = self.replacement_within(edge.source, Some(alt), config.negative_mix, rng)?;
                } else {
                    let alt = self.locate(edge.source)?.0;
                    neg.target = self.replacement_within(edge.target, Some(alt), config.negative_mix, rng)?;
                }
                Ok(neg)
            })
            .collect()
    }

    pub fn pool_size(&self, t: EntityTypeId, partition: u32) -> usize {
        self.pools[t.index()][partition as usize].members.len()
    }
}

/// Index into `pool.members`, skipping `exclude`, uniform or degree-weighted.
fn draw(pool: &Pool, exclude: Option<usize>, proportional: bool, rng: &mut impl rand::Rng) -> u32 {
    let n = pool.members.len();
    let (own, before) = match exclude {
        Some(pos) => (pool.cumulative[pos] - pool.mass_before(pos), pool.mass_before(pos)),
        None => (0, u64::MAX),
    };
    let rest = pool.total() - own;
    let idx = if proportional && rest > 0 {
        let mut u = rng.gen_range(0..rest);
        if u >= before {
            u += own;
        }
        pool.cumulative.partition_point(|&c| c <= u)
    } else {
        let span = if exclude.is_some() { n - 1 } else { n };
        let i = rng.gen_range(0..span);
        match exclude {
            Some(pos) if i >= pos => i + 1,
            _ => i,
        }
    };
    pool.members[idx]
}

/// Graph-wide corruption of one edge.
pub fn sample_negatives(
    edge: &Edge,
    graph: &HinGraph,
    config: &TrainConfig,
    rng: &mut impl rand::Rng,
) -> Result<Vec<Edge>> {
    NegativeSampler::global(graph)?.sample(edge, config, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::{Coverage, GraphBuilder, Schema};
    use crate::rng;

    // users A, B, C with deg(A)=4, deg(B)=5, deg(C)=1
    fn graph() -> HinGraph {
        let mut s = Schema::new();
        s.add_entity_type("user").unwrap();
        s.add_entity_type("tweet").unwrap();
        s.add_relation("follows", "user", "user", Coverage::High).unwrap();
        s.add_relation("fav", "user", "tweet", Coverage::High).unwrap();
        let mut b = GraphBuilder::new(s);
        b.add_edge("user", "A", "follows", "user", "B").unwrap();
        for _ in 0..3 {
            b.add_edge("user", "A", "follows", "user", "B").unwrap();
        }
        b.add_edge("user", "C", "follows", "user", "B").unwrap();
        b.add_edge("user", "B", "fav", "tweet", "T").unwrap();
        b.build().unwrap()
    }

    fn config(mix: f64, side: CorruptSide, n: usize) -> TrainConfig {
        TrainConfig {
            negative_mix: mix,
            corrupt_side: side,
            num_negatives: n,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn uniform_target_corruption_excludes_original() {
        let g = graph();
        let pos = g.edges()[0];
        let cfg = config(0.0, CorruptSide::TargetOnly, 1);
        let mut rng = rng::rng_for(1, &[]);
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            let neg = sample_negatives(&pos, &g, &cfg, &mut rng).unwrap()[0];
            assert_eq!(neg.source, pos.source);
            seen[neg.target.local()] += 1;
        }
        assert_eq!(seen[1], 0);
        assert!(seen[0] > 1300 && seen[2] > 1300, "{seen:?}");
    }

    #[test]
    fn structural_validity() {
        let g = graph();
        let pos = g.edges()[4];
        let cfg = config(0.5, CorruptSide::Both, 5);
        let mut rng = rng::rng_for(2, &[]);
        let negs = NegativeSampler::global(&g).unwrap().sample(&pos, &cfg, &mut rng).unwrap();
        assert_eq!(negs.len(), 5);
        for n in negs {
            assert_eq!(n.relation, pos.relation);
            assert_eq!(n.source.entity_type, pos.source.entity_type);
            assert_eq!(n.target.entity_type, pos.target.entity_type);
            assert_eq!((n.source != pos.source) as u8 + (n.target != pos.target) as u8, 1);
        }
    }

    #[test]
    fn single_candidate_type_is_an_error() {
        let g = graph();
        // only one tweet exists
        let pos = g.edges()[5];
        let cfg = config(0.0, CorruptSide::TargetOnly, 1);
        let mut rng = rng::rng_for(3, &[]);
        assert!(matches!(sample_negatives(&pos, &g, &cfg, &mut rng), Err(Error::Sampling(_))));
    }

    #[test]
    fn partitioned_pools_stay_in_partition() {
        let g = graph();
        let part = Partitioning::from_assignment(2, vec![vec![0, 1, 0], vec![1]]).unwrap();
        let sampler = NegativeSampler::new(&g, &part).unwrap();
        assert_eq!(sampler.pool_size(EntityTypeId(0), 0), 2);
        let a = g.lookup("user", "A").unwrap();
        let mut rng = rng::rng_for(4, &[]);
        for _ in 0..100 {
            let r = sampler.replacement(a, 0.5, &mut rng).unwrap();
            assert_eq!(r, g.lookup("user", "C").unwrap());
        }
    }

    #[test]
    fn singleton_pool_borrows_the_other_bucket_partition() {
        let g = graph();
        // B alone in partition 1, A and C in partition 0
        let part = Partitioning::from_assignment(2, vec![vec![0, 1, 0], vec![0]]).unwrap();
        let sampler = NegativeSampler::new(&g, &part).unwrap();
        let pos = g.edges()[0];
        let cfg = config(0.5, CorruptSide::TargetOnly, 50);
        let mut rng = rng::rng_for(5, &[]);
        for n in sampler.sample(&pos, &cfg, &mut rng).unwrap() {
            assert_ne!(n.target, pos.target);
            assert_eq!(part.of(n.target), 0);
        }
        let b = g.lookup("user", "B").unwrap();
        assert!(matches!(sampler.replacement(b, 0.0, &mut rng), Err(Error::Sampling(_))));
    }
}
