//! Candidate generation by inner product: exact scan, HNSW, and mixture
//! multi-querying with proportional candidate allocation.

mod hnsw;
mod index;
mod multi;

pub use hnsw::{Hnsw, HnswParams};
pub use index::{build_index, query_topk, translate_query, AnnIndex, Candidate, CandidateList, IndexKind};
pub use multi::{allocate, multi_query, multi_query_excluding};
