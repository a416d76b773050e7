//! Partition-sharded view of an [`EmbeddingStore`] with exclusive leases.
//!
//! Rows are regrouped into one shard per partition. A [`BucketView`] holds
//! the locks of its one or two partitions; asking for a partition already
//! held fails immediately instead of blocking. Relation vectors live in a
//! separate block that callers lock briefly per batch.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, MutexGuard, TryLockError};

use super::{EmbeddingStore, Params, ParamsMut, StoreParts};
use crate::error::{Error, Result};
use crate::hin::{Bucket, EntityRef, Partitioning, RelationId};
use crate::vecmath::Matrix;

#[derive(Debug)]
struct Shard {
    rows: Vec<f32>,
    accum: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationBlock {
    pub vectors: Matrix,
    pub accum: Matrix,
}

#[derive(Debug)]
pub struct ShardedStore {
    dim: usize,
    entity_types: Vec<String>,
    relation_names: Vec<String>,
    counts: Vec<usize>,
    partitioning: Partitioning,
    /// per type, per local id: row slot inside its partition's shard
    slots: Vec<Vec<u32>>,
    shards: Vec<Mutex<Shard>>,
    relations: Mutex<RelationBlock>,
    outstanding: AtomicUsize,
}

impl ShardedStore {
    pub fn new(store: EmbeddingStore, partitioning: &Partitioning) -> Result<Self> {
        let parts = store.into_parts();
        let counts: Vec<usize> = parts.entities.iter().map(Matrix::rows).collect();
        let assignment = partitioning.assignment();
        if assignment.len() != counts.len() || assignment.iter().zip(&counts).any(|(a, &c)| a.len() != c) {
            return Err(Error::Shape("partitioning does not cover the store's entities".into()));
        }
        let dim = parts.dim;
        let p = partitioning.num_partitions();
        let mut shards: Vec<Shard> = (0..p).map(|_| Shard { rows: Vec::new(), accum: Vec::new() }).collect();
        let mut slots = Vec::with_capacity(counts.len());
        for (t, table) in parts.entities.iter().enumerate() {
            let acc = &parts.entity_accum[t];
            let mut type_slots = Vec::with_capacity(table.rows());
            for local in 0..table.rows() {
                let shard = &mut shards[assignment[t][local] as usize];
                type_slots.push((shard.rows.len() / dim) as u32);
                shard.rows.extend_from_slice(table.row(local));
                shard.accum.extend_from_slice(acc.row(local));
            }
            slots.push(type_slots);
        }
        Ok(ShardedStore {
            dim,
            entity_types: parts.entity_types,
            relation_names: parts.relation_names,
            counts,
            partitioning: partitioning.clone(),
            slots,
            shards: shards.into_iter().map(Mutex::new).collect(),
            relations: Mutex::new(RelationBlock {
                vectors: parts.relations,
                accum: parts.relation_accum,
            }),
            outstanding: AtomicUsize::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn partitioning(&self) -> &Partitioning {
        &self.partitioning
    }

    pub fn outstanding_leases(&self) -> usize {
        self.outstanding.load(Ordering::SeqCst)
    }

    /// Lease the partitions of `bucket` for exclusive mutation.
    pub fn slice_for_bucket(&self, bucket: &Bucket) -> Result<BucketView<'_>> {
        self.lease(bucket.source_partition, bucket.target_partition)
    }

    pub fn lease(&self, i: u32, j: u32) -> Result<BucketView<'_>> {
        let p = self.shards.len() as u32;
        if i >= p || j >= p {
            return Err(Error::Lease(format!("bucket ({i},{j}) outside {p} partitions")));
        }
        let first = self.try_lock(i)?;
        let second = if j != i { Some(self.try_lock(j)?) } else { None };
        self.outstanding.fetch_add(1, Ordering::SeqCst);
        Ok(BucketView {
            store: self,
            partitions: (i, j),
            first,
            second,
        })
    }

    fn try_lock(&self, p: u32) -> Result<MutexGuard<'_, Shard>> {
        match self.shards[p as usize].try_lock() {
            Ok(g) => Ok(g),
            Err(TryLockError::WouldBlock) => Err(Error::Lease(format!("partition {p} is already leased"))),
            Err(TryLockError::Poisoned(_)) => Err(Error::Lease(format!("partition {p} lock poisoned"))),
        }
    }

    /// Lock the relation vectors. Hold only for the duration of one batch.
    pub fn relations(&self) -> MutexGuard<'_, RelationBlock> {
        self.relations.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Copy of an entity row; permitted only while no lease is outstanding.
    pub fn read_entity(&self, e: EntityRef) -> Result<Vec<f32>> {
        if self.outstanding_leases() > 0 {
            return Err(Error::Lease("unleased read while a lease is outstanding".into()));
        }
        self.check_bounds(e)?;
        let part = self.partitioning.of(e);
        let shard = self.try_lock(part)?;
        let slot = self.slots[e.entity_type.index()][e.local()] as usize;
        Ok(shard.rows[slot * self.dim..(slot + 1) * self.dim].to_vec())
    }

    fn check_bounds(&self, e: EntityRef) -> Result<()> {
        if self.counts.get(e.entity_type.index()).is_some_and(|&c| e.local() < c) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                entity: format!("{}:{}", e.entity_type.0, e.local_id),
                detail: "not in store".into(),
            })
        }
    }

    pub fn into_store(self) -> EmbeddingStore {
        let dim = self.dim;
        let shards: Vec<Shard> = self
            .shards
            .into_iter()
            .map(|m| m.into_inner().unwrap_or_else(|p| p.into_inner()))
            .collect();
        let mut entities = Vec::with_capacity(self.counts.len());
        let mut entity_accum = Vec::with_capacity(self.counts.len());
        for (t, &n) in self.counts.iter().enumerate() {
            let mut rows = Matrix::zeros(n, dim);
            let mut acc = Matrix::zeros(n, dim);
            for local in 0..n {
                let shard = &shards[self.partitioning.assignment()[t][local] as usize];
                let s = self.slots[t][local] as usize * dim;
                rows.row_mut(local).copy_from_slice(&shard.rows[s..s + dim]);
                acc.row_mut(local).copy_from_slice(&shard.accum[s..s + dim]);
            }
            entities.push(rows);
            entity_accum.push(acc);
        }
        let rel = self.relations.into_inner().unwrap_or_else(|p| p.into_inner());
        EmbeddingStore::from_parts(StoreParts {
            dim,
            entity_types: self.entity_types,
            relation_names: self.relation_names,
            entities,
            entity_accum,
            relations: rel.vectors,
            relation_accum: rel.accum,
        })
    }
}

/// Exclusive working set for one bucket: the rows of its partitions.
#[derive(Debug)]
pub struct BucketView<'a> {
    store: &'a ShardedStore,
    partitions: (u32, u32),
    first: MutexGuard<'a, Shard>,
    second: Option<MutexGuard<'a, Shard>>,
}

impl<'a> BucketView<'a> {
    pub fn partitions(&self) -> (u32, u32) {
        self.partitions
    }

    pub fn dim(&self) -> usize {
        self.store.dim
    }

    pub fn contains(&self, e: EntityRef) -> bool {
        self.store.check_bounds(e).is_ok() && {
            let p = self.store.partitioning.of(e);
            p == self.partitions.0 || p == self.partitions.1
        }
    }

    /// Number of entity rows reachable through this view.
    pub fn addressable_rows(&self) -> usize {
        let d = self.store.dim;
        self.first.rows.len() / d + self.second.as_ref().map_or(0, |s| s.rows.len() / d)
    }

    fn locate(&self, e: EntityRef) -> Result<(bool, usize)> {
        self.store.check_bounds(e)?;
        let p = self.store.partitioning.of(e);
        let slot = self.store.slots[e.entity_type.index()][e.local()] as usize * self.store.dim;
        if p == self.partitions.0 {
            Ok((true, slot))
        } else if p == self.partitions.1 {
            Ok((false, slot))
        } else {
            Err(Error::Lease(format!(
                "entity {}:{} lives in partition {p}, outside leased bucket {:?}",
                e.entity_type.0, e.local_id, self.partitions
            )))
        }
    }

    pub fn entity(&self, e: EntityRef) -> Result<&[f32]> {
        let (first, s) = self.locate(e)?;
        let shard: &Shard = if first { &self.first } else { self.second.as_ref().expect("two partitions") };
        Ok(&shard.rows[s..s + self.store.dim])
    }

    pub fn entity_slot(&mut self, e: EntityRef) -> Result<(&mut [f32], &mut [f32])> {
        let (first, s) = self.locate(e)?;
        let d = self.store.dim;
        let shard: &mut Shard = if first { &mut self.first } else { self.second.as_mut().expect("two partitions") };
        Ok((&mut shard.rows[s..s + d], &mut shard.accum[s..s + d]))
    }

    /// Pair this view with locked relation vectors for one batch.
    pub fn with_relations<'v>(&'v mut self, relations: &'v mut RelationBlock) -> BatchParams<'v, 'a> {
        BatchParams { view: self, relations }
    }
}

impl Drop for BucketView<'_> {
    fn drop(&mut self) {
        self.store.outstanding.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Entity rows of a leased bucket plus the relation vectors, as seen by one batch.
pub struct BatchParams<'v, 'a> {
    view: &'v mut BucketView<'a>,
    relations: &'v mut RelationBlock,
}

impl Params for BatchParams<'_, '_> {
    fn dim(&self) -> usize {
        self.view.dim()
    }

    fn entity(&self, e: EntityRef) -> Result<&[f32]> {
        self.view.entity(e)
    }

    fn relation(&self, r: RelationId) -> Result<&[f32]> {
        if r.index() >= self.relations.vectors.rows() {
            return Err(Error::OutOfBounds {
                entity: format!("relation {}", r.0),
                detail: "not in store".into(),
            });
        }
        Ok(self.relations.vectors.row(r.index()))
    }
}

impl ParamsMut for BatchParams<'_, '_> {
    fn entity_slot(&mut self, e: EntityRef) -> Result<(&mut [f32], &mut [f32])> {
        self.view.entity_slot(e)
    }

    fn relation_slot(&mut self, r: RelationId) -> Result<(&mut [f32], &mut [f32])> {
        self.relation(r)?;
        let i = r.index();
        Ok((self.relations.vectors.row_mut(i), self.relations.accum.row_mut(i)))
    }
}
