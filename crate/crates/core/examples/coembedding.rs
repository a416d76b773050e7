//! Group the demo relations around their high-coverage anchors and build
//! one co-embedded graph per group.
//!
//! ```text
//! cargo run --example coembedding
//! ```

use std::path::Path;

use hin_embed::hin::{load_edges, Schema};
use hin_embed::trainer::{build_coembedding_graphs, coembedding_groups};

fn main() -> hin_embed::Result<()> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo");
    let schema = Schema::load(&demo.join("schema.txt"))?;
    for group in coembedding_groups(&schema)? {
        let names: Vec<&str> = group.iter().map(|&r| schema.relation(r).name.as_str()).collect();
        println!("group {names:?}");
    }

    let graph = load_edges(&demo.join("edges.tsv"), &schema)?;
    let plan = build_coembedding_graphs(&graph)?;
    for g in &plan.graphs {
        println!(
            "anchor {:<8} entities {:>5} edges {:>5}",
            g.anchor,
            g.graph.num_entities(),
            g.graph.num_edges()
        );
    }
    for w in &plan.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
