//! The bucket sweep: every epoch visits all `P²` buckets once in a seeded
//! shuffled order, leasing the bucket's partitions and running Adagrad over
//! shuffled mini-batches of its edges.

use std::io::Write;
use std::sync::{Condvar, Mutex};

use rand::seq::SliceRandom;

use super::config::TrainConfig;
use super::negatives::NegativeSampler;
use super::objective::{adagrad_step, anchored_loss_and_grads, batch_loss_and_grads, Anchor, TripletBatch};
use crate::error::{Error, Result};
use crate::hin::{bucketize, Bucket, HinGraph, Partitioning};
use crate::rng;
use crate::store::{EmbeddingStore, ShardedStore};

#[derive(Debug, Clone, PartialEq)]
pub struct BucketLoss {
    pub epoch: usize,
    pub source_partition: u32,
    pub target_partition: u32,
    pub edges: usize,
    /// loss per positive edge, negatives and anchor penalty included
    pub mean_loss: f64,
}

/// Per-epoch, per-bucket losses in the order buckets were trained.
/// Empty buckets produce no row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<BucketLoss>,
}

impl TrainReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn epochs(&self) -> usize {
        self.rows.iter().map(|r| r.epoch + 1).max().unwrap_or(0)
    }

    /// Edge-weighted mean loss of one epoch.
    pub fn epoch_mean_loss(&self, epoch: usize) -> Option<f64> {
        let (sum, n) = self
            .rows
            .iter()
            .filter(|r| r.epoch == epoch)
            .fold((0.0, 0usize), |(s, n), r| (s + r.mean_loss * r.edges as f64, n + r.edges));
        (n > 0).then(|| sum / n as f64)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch\tbucket_i\tbucket_j\tmean_loss")?;
        for r in &self.rows {
            writeln!(
                w,
                "{}\t{}\t{}\t{:.9}",
                r.epoch, r.source_partition, r.target_partition, r.mean_loss
            )?;
        }
        Ok(())
    }
}

/// Bucket-sweep trainer over one graph and partitioning.
pub struct Trainer<'g> {
    graph: &'g HinGraph,
    partitioning: &'g Partitioning,
    config: TrainConfig,
    anchor: Option<&'g dyn Anchor>,
}

impl<'g> Trainer<'g> {
    pub fn new(graph: &'g HinGraph, partitioning: &'g Partitioning, config: TrainConfig) -> Self {
        Trainer {
            graph,
            partitioning,
            config,
            anchor: None,
        }
    }

    /// Pull touched entities toward previous-version rows.
    pub fn with_anchor(mut self, anchor: &'g dyn Anchor) -> Self {
        self.anchor = Some(anchor);
        self
    }

    pub fn run(&self, store: EmbeddingStore) -> Result<(EmbeddingStore, TrainReport)> {
        self.config.validate()?;
        store.check_shape(self.graph)?;
        if !self.partitioning.covers(self.graph) {
            return Err(Error::InvalidArgument("partitioning does not cover the graph".into()));
        }
        if self.partitioning.num_partitions() != self.config.num_partitions {
            return Err(Error::Config(format!(
                "partitioning has {} partitions, config asks for {}",
                self.partitioning.num_partitions(),
                self.config.num_partitions
            )));
        }
        if self.config.epochs == 0 {
            return Ok((store, TrainReport::default()));
        }
        let buckets = bucketize(self.graph, self.partitioning)?;
        let sampler = NegativeSampler::new(self.graph, self.partitioning)?;
        let sharded = store.shard(self.partitioning)?;
        let mut report = TrainReport::default();
        for epoch in 0..self.config.epochs {
            let mut order: Vec<usize> = (0..buckets.len()).collect();
            order.shuffle(&mut rng::rng_for(self.config.seed, &[0x6570_6f63, epoch as u64]));
            let rows = if self.config.workers <= 1 {
                let mut rows = Vec::new();
                for &b in &order {
                    if let Some(row) = self.train_bucket(&sharded, &sampler, &buckets[b], epoch)? {
                        rows.push(row);
                    }
                }
                rows
            } else {
                self.parallel_epoch(&sharded, &sampler, &buckets, &order, epoch)?
            };
            report.rows.extend(rows);
        }
        Ok((sharded.into_store(), report))
    }

    fn train_bucket(
        &self,
        sharded: &ShardedStore,
        sampler: &NegativeSampler,
        bucket: &Bucket,
        epoch: usize,
    ) -> Result<Option<BucketLoss>> {
        if bucket.is_empty() {
            return Ok(None);
        }
        let (i, j) = bucket.partitions();
        let mut view = sharded.slice_for_bucket(bucket)?;
        let mut rng = rng::rng_for(self.config.seed, &[0x6275_636b, epoch as u64, i as u64, j as u64]);
        let mut order = bucket.edge_indices.clone();
        order.shuffle(&mut rng);
        let edges = self.graph.edges();
        let mut total = 0.0;
        for chunk in order.chunks(self.config.batch_size) {
            let mut batch = TripletBatch {
                positives: Vec::with_capacity(chunk.len()),
                negatives: Vec::with_capacity(chunk.len()),
            };
            for &idx in chunk {
                let e = edges[idx as usize];
                batch.negatives.push(sampler.sample(&e, &self.config, &mut rng)?);
                batch.positives.push(e);
            }
            let mut relations = sharded.relations();
            let mut params = view.with_relations(&mut relations);
            let (loss, grads) = match self.anchor {
                Some(a) => anchored_loss_and_grads(&params, &batch, a)?,
                None => batch_loss_and_grads(&params, &batch)?,
            };
            adagrad_step(&mut params, &grads, self.config.learning_rate)?;
            total += loss;
        }
        Ok(Some(BucketLoss {
            epoch,
            source_partition: i,
            target_partition: j,
            edges: order.len(),
            mean_loss: total / order.len() as f64,
        }))
    }

    /// Workers take the first pending bucket whose partitions are both idle.
    fn parallel_epoch(
        &self,
        sharded: &ShardedStore,
        sampler: &NegativeSampler,
        buckets: &[Bucket],
        order: &[usize],
        epoch: usize,
    ) -> Result<Vec<BucketLoss>> {
        struct Sched {
            pending: Vec<usize>,
            busy: Vec<bool>,
            rows: Vec<BucketLoss>,
            error: Option<Error>,
        }
        let state = Mutex::new(Sched {
            pending: order.iter().copied().filter(|&b| !buckets[b].is_empty()).collect(),
            busy: vec![false; self.partitioning.num_partitions()],
            rows: Vec::new(),
            error: None,
        });
        let cv = Condvar::new();
        std::thread::scope(|scope| {
            for _ in 0..self.config.workers {
                scope.spawn(|| loop {
                    let mut st = state.lock().unwrap_or_else(|p| p.into_inner());
                    let picked = loop {
                        if st.error.is_some() || st.pending.is_empty() {
                            break None;
                        }
                        let free = st.pending.iter().position(|&b| {
                            let (i, j) = buckets[b].partitions();
                            !st.busy[i as usize] && !st.busy[j as usize]
                        });
                        match free {
                            Some(pos) => break Some(st.pending.remove(pos)),
                            None => st = cv.wait(st).unwrap_or_else(|p| p.into_inner()),
                        }
                    };
                    let Some(b) = picked else {
                        cv.notify_all();
                        return;
                    };
                    let (i, j) = buckets[b].partitions();
                    st.busy[i as usize] = true;
                    st.busy[j as usize] = true;
                    drop(st);
                    let res = self.train_bucket(sharded, sampler, &buckets[b], epoch);
                    let mut st = state.lock().unwrap_or_else(|p| p.into_inner());
                    st.busy[i as usize] = false;
                    st.busy[j as usize] = false;
                    match res {
                        Ok(Some(row)) => st.rows.push(row),
                        Ok(None) => {}
                        Err(e) => {
                            st.error.get_or_insert(e);
                        }
                    }
                    drop(st);
                    cv.notify_all();
                });
            }
        });
        let st = state.into_inner().unwrap_or_else(|p| p.into_inner());
        match st.error {
            Some(e) => Err(e),
            None => Ok(st.rows),
        }
    }
}

pub fn train(
    graph: &HinGraph,
    partitioning: &Partitioning,
    store: EmbeddingStore,
    config: &TrainConfig,
) -> Result<(EmbeddingStore, TrainReport)> {
    Trainer::new(graph, partitioning, config.clone()).run(store)
}
