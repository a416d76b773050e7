//! Heterogeneous information network model: typed schema, edge multiset,
//! file ingestion, partitioning and edge buckets.

mod graph;
mod io;
mod partition;
mod schema;

pub use graph::{Edge, EntityRef, GraphBuilder, HinGraph, IdMap};
pub use io::{
    load_edge_files, load_edges, load_id_map, read_edges_into, save_edges, save_id_map, write_edge_subset,
    write_edges,
};
pub use partition::{bucketize, partition, partition_with, Assigner, Bucket, Partitioning};
pub use schema::{Coverage, EntityType, EntityTypeId, RelationId, RelationType, Schema};
