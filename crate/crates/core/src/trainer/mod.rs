//! Scoring, negative sampling, Adagrad and partitioned training.

mod coembed;
mod config;
mod negatives;
mod objective;
mod train;

pub use coembed::{build_coembedding_graphs, coembedding_groups, CoembeddedGraph, CoembeddingPlan};
pub use config::{CorruptSide, TrainConfig};
pub use negatives::{sample_negatives, NegativeSampler};
pub use objective::{
    adagrad_step, anchored_loss_and_grads, batch_loss_and_grads, log_sigmoid, score, sigmoid, translated_dot,
    Anchor, Gradients, TripletBatch, ADAGRAD_EPS,
};
pub use train::{train, BucketLoss, TrainReport, Trainer};
