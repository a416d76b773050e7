//! Train translating dot-product embeddings on a planted two-community
//! network, print the loss curve, and round-trip the checkpoint.
//!
//! ```text
//! cargo run --release --example train_embeddings
//! ```

use hin_embed::evalkit::{generate_synthetic_hin, SyntheticRelation, SyntheticSpec};
use hin_embed::hin::{partition, Coverage};
use hin_embed::store::EmbeddingStore;
use hin_embed::trainer::{score, train, TrainConfig};

fn main() -> hin_embed::Result<()> {
    let spec = SyntheticSpec::new(2, 1)
        .entity_type("user", 300)
        .entity_type("item", 200)
        .relation(SyntheticRelation::new("follows", "user", "user", Coverage::High).densities(0.2, 0.01))
        .relation(SyntheticRelation::new("likes", "user", "item", Coverage::Low).densities(0.2, 0.01));
    let (graph, truth) = generate_synthetic_hin(&spec)?;
    println!("{} entities, {} edges", graph.num_entities(), graph.num_edges());

    let config = TrainConfig {
        epochs: 10,
        num_partitions: 2,
        seed: 1,
        ..TrainConfig::default()
    };
    let parts = partition(&graph, config.num_partitions, config.seed)?;
    let init = EmbeddingStore::init(&graph, 16, config.seed, 0.1)?;
    let (store, report) = train(&graph, &parts, init, &config)?;
    for epoch in 0..report.epochs() {
        println!("epoch {epoch:>2} mean loss {:.4}", report.epoch_mean_loss(epoch).unwrap_or(f64::NAN));
    }

    let (mut same, mut cross) = (Vec::new(), Vec::new());
    for e in graph.edges().iter().take(2000) {
        let s = score(&store, e)?;
        if truth.community_of(e.source) == truth.community_of(e.target) { same.push(s) } else { cross.push(s) }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!("mean score within communities {:.3}, across {:.3}", mean(&same), mean(&cross));

    let path = std::env::temp_dir().join("train_embeddings_example.ckpt");
    store.save(&path)?;
    let back = EmbeddingStore::load(&path)?;
    println!("checkpoint {} round-trips bitwise: {}", path.display(), back.bitwise_eq(&store));
    Ok(())
}
