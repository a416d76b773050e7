//! Load the bundled demo network, print per-type and per-relation counts,
//! then split it into `P = 4` entity partitions and list the busiest buckets.
//!
//! ```text
//! cargo run --example ingest_and_partition
//! ```

use std::path::Path;

use hin_embed::hin::{bucketize, load_edges, partition, Schema};

fn main() -> hin_embed::Result<()> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo");
    let schema = Schema::load(&demo.join("schema.txt"))?;
    let graph = load_edges(&demo.join("edges.tsv"), &schema)?;

    for t in schema.entity_type_ids() {
        println!("entity   {:<8} {:>6}", schema.entity_type(t).name, graph.entity_count(t));
    }
    for r in schema.relation_ids() {
        let rel = schema.relation(r);
        let n = graph.edges().iter().filter(|e| e.relation == r).count();
        println!("relation {:<8} {:>6}  {} -> {} ({})", rel.name, n,
            schema.entity_type(rel.source_type).name, schema.entity_type(rel.target_type).name, rel.coverage.as_str());
    }

    let parts = partition(&graph, 4, 7)?;
    println!("partition sizes {:?}", parts.sizes());
    let mut buckets = bucketize(&graph, &parts)?;
    buckets.sort_by_key(|b| std::cmp::Reverse(b.len()));
    for b in buckets.iter().take(4) {
        println!("bucket {:?}: {} edges", b.partitions(), b.len());
    }
    Ok(())
}
