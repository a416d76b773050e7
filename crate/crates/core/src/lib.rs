//! Embeddings for heterogeneous information networks.
//!
//! The crate covers the full offline lifecycle of a translating dot-product
//! knowledge-graph embedding over a typed multigraph:
//!
//! - [`hin`]: schema, edge ingestion, partitioning into `P²` edge buckets
//! - [`store`]: parameter tables, checkpoints and partition leases
//! - [`trainer`]: scoring, negative sampling, Adagrad and the bucket sweep
//! - [`mixture`]: k-means over targets and per-entity cluster-engagement mixtures
//! - [`retrieval`]: exact and HNSW inner-product search, mixture multi-querying
//! - [`quantize`]: product quantization of embedding tables
//! - [`versioning`]: warm-started and anchored retraining, drift reports
//! - [`evalkit`]: recall@k, MRR, RCE, link-prediction protocol, synthetic networks
//! - [`cli`]: the `hin` command line and the end-to-end pipeline

pub mod cli;
pub mod error;
pub mod evalkit;
pub mod hin;
pub mod mixture;
pub mod quantize;
pub mod retrieval;
pub mod rng;
pub mod store;
pub mod trainer;
pub mod vecmath;
pub mod versioning;

pub use error::{Error, Result};
