//! Product quantization of embedding tables.

mod parity;
mod pq;

pub use parity::{fit_logistic, knn_retention, scorer_parity, LinearScorer};
pub use pq::{
    compression_report, decode, encode, train_codebook, train_codebook_with, CompressionReport, PqCodebook, PqCodes,
    PqTrainConfig, CENTROIDS_PER_SUBQUANTIZER, DEFAULT_TRAIN_ITERS, DEFAULT_TRAIN_SAMPLE,
};
