use rand::seq::SliceRandom;
use rand::Rng as _;

use super::graph::{EntityRef, HinGraph};
use crate::error::{Error, Result};
use crate::rng;

/// How entities are spread over partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assigner {
    /// Seeded shuffle then round-robin: each entity's partition is uniform
    /// and per-type partition sizes differ by at most one.
    #[default]
    Balanced,
    /// Independent uniform draw per entity.
    Independent,
}

/// Entity to partition map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partitioning {
    num_partitions: usize,
    assignment: Vec<Vec<u32>>,
}

impl Partitioning {
    pub fn from_assignment(num_partitions: usize, assignment: Vec<Vec<u32>>) -> Result<Self> {
        if num_partitions == 0 {
            return Err(Error::InvalidArgument("number of partitions must be positive".into()));
        }
        if assignment.iter().flatten().any(|&p| p as usize >= num_partitions) {
            return Err(Error::InvalidArgument("partition index out of range".into()));
        }
        Ok(Partitioning {
            num_partitions,
            assignment,
        })
    }

    pub fn num_partitions(&self) -> usize {
        self.num_partitions
    }

    /// Partition of `e`, or `None` if the assignment does not cover it.
    pub fn get(&self, e: EntityRef) -> Option<u32> {
        self.assignment.get(e.entity_type.index())?.get(e.local()).copied()
    }

    #[inline]
    pub fn of(&self, e: EntityRef) -> u32 {
        self.assignment[e.entity_type.index()][e.local()]
    }

    pub fn assignment(&self) -> &[Vec<u32>] {
        &self.assignment
    }

    /// Entities per partition, all types together.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_partitions];
        for &p in self.assignment.iter().flatten() {
            sizes[p as usize] += 1;
        }
        sizes
    }

    pub fn sizes_of_type(&self, t: usize) -> Vec<usize> {
        let mut sizes = vec![0; self.num_partitions];
        for &p in &self.assignment[t] {
            sizes[p as usize] += 1;
        }
        sizes
    }

    pub fn covers(&self, graph: &HinGraph) -> bool {
        self.assignment.len() == graph.schema().num_entity_types()
            && graph
                .schema()
                .entity_type_ids()
                .all(|t| self.assignment[t.index()].len() == graph.entity_count(t))
    }
}

pub fn partition(graph: &HinGraph, num_partitions: usize, seed: u64) -> Result<Partitioning> {
    partition_with(graph, num_partitions, seed, Assigner::Balanced)
}

pub fn partition_with(
    graph: &HinGraph,
    num_partitions: usize,
    seed: u64,
    assigner: Assigner,
) -> Result<Partitioning> {
    if num_partitions == 0 {
        return Err(Error::InvalidArgument("number of partitions must be positive".into()));
    }
    let p = num_partitions as u32;
    let mut rng = rng::rng_for(seed, &[0x7061_7274]);
    let mut assignment = Vec::with_capacity(graph.schema().num_entity_types());
    let mut offset = 0usize;
    for t in graph.schema().entity_type_ids() {
        let n = graph.entity_count(t);
        let mut parts = vec![0u32; n];
        match assigner {
            Assigner::Balanced => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                for (pos, &local) in order.iter().enumerate() {
                    parts[local] = ((pos + offset) % num_partitions) as u32;
                }
                offset = (offset + n) % num_partitions;
            }
            Assigner::Independent => {
                for slot in parts.iter_mut() {
                    *slot = rng.gen_range(0..p);
                }
            }
        }
        assignment.push(parts);
    }
    Ok(Partitioning {
        num_partitions,
        assignment,
    })
}

/// Edges whose source lies in partition `source_partition` and target in `target_partition`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bucket {
    pub source_partition: u32,
    pub target_partition: u32,
    pub edge_indices: Vec<u32>,
}

impl Bucket {
    pub fn len(&self) -> usize {
        self.edge_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_indices.is_empty()
    }

    pub fn partitions(&self) -> (u32, u32) {
        (self.source_partition, self.target_partition)
    }
}

/// All `P²` buckets in row-major `(i, j)` order, possibly empty.
pub fn bucketize(graph: &HinGraph, partitioning: &Partitioning) -> Result<Vec<Bucket>> {
    let p = partitioning.num_partitions();
    let mut buckets: Vec<Bucket> = (0..p * p)
        .map(|k| Bucket {
            source_partition: (k / p) as u32,
            target_partition: (k % p) as u32,
            edge_indices: Vec::new(),
        })
        .collect();
    for (idx, e) in graph.edges().iter().enumerate() {
        let lookup = |x: EntityRef| {
            partitioning.get(x).ok_or_else(|| Error::InvalidArgument(format!(
                "entity {} has no partition assignment",
                graph.describe(x)
            )))
        };
        let i = lookup(e.source)? as usize;
        let j = lookup(e.target)? as usize;
        buckets[i * p + j].edge_indices.push(idx as u32);
    }
    Ok(buckets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::graph::GraphBuilder;
    use crate::hin::schema::{Coverage, Schema};

    fn ring(n: usize) -> HinGraph {
        let mut s = Schema::new();
        s.add_entity_type("user").unwrap();
        s.add_relation("follows", "user", "user", Coverage::High).unwrap();
        let mut b = GraphBuilder::new(s);
        for i in 0..n {
            b.add_edge("user", &format!("u{i}"), "follows", "user", &format!("u{}", (i + 1) % n))
                .unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn single_partition_is_one_bucket() {
        let g = ring(10);
        let part = partition(&g, 1, 3).unwrap();
        assert!(part.assignment()[0].iter().all(|&p| p == 0));
        let b = bucketize(&g, &part).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].edge_indices, (0..10).collect::<Vec<u32>>());
    }

    #[test]
    fn zero_partitions_rejected() {
        assert!(partition(&ring(3), 0, 1).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let g = ring(8);
        let a = partition(&g, 2, 42).unwrap();
        assert_eq!(a, partition(&g, 2, 42).unwrap());
        assert!(a.assignment()[0].iter().all(|&p| p < 2));
        let ind = partition_with(&g, 2, 42, Assigner::Independent).unwrap();
        assert_eq!(ind, partition_with(&g, 2, 42, Assigner::Independent).unwrap());
    }

    #[test]
    fn balanced_sizes_differ_by_at_most_one() {
        let g = ring(1003);
        let part = partition(&g, 4, 9).unwrap();
        let sizes = part.sizes_of_type(0);
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1003 % 4, "{sizes:?}");
    }

    #[test]
    fn cross_bucket_membership() {
        let g = ring(2);
        // u0 -> 0, u1 -> 1; edge 0 is u0->u1
        let part = Partitioning::from_assignment(2, vec![vec![0, 1]]).unwrap();
        let b = bucketize(&g, &part).unwrap();
        assert_eq!(b[1].partitions(), (0, 1));
        assert_eq!(b[1].edge_indices, vec![0]);
        assert_eq!(b[2].edge_indices, vec![1]);
        assert!(b[0].is_empty() && b[3].is_empty());
    }

    #[test]
    fn missing_assignment_is_an_error() {
        let g = ring(4);
        let part = Partitioning::from_assignment(2, vec![vec![0, 1]]).unwrap();
        assert!(!part.covers(&g));
        assert!(bucketize(&g, &part).is_err());
    }
}
