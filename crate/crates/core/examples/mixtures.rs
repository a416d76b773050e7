//! Cluster trained item embeddings, build top-3 engagement mixtures for
//! multi-interest users, and place a brand-new item at a centroid from its
//! neighbors alone.
//!
//! ```text
//! cargo run --release --example mixtures
//! ```

use hin_embed::evalkit::{generate_synthetic_hin, type_id, SyntheticRelation, SyntheticSpec};
use hin_embed::hin::{partition, Coverage};
use hin_embed::mixture::{build_mixtures, embed_oov_target, kmeans_with, EngagementScope, KMeansConfig};
use hin_embed::store::EmbeddingStore;
use hin_embed::trainer::{train, TrainConfig};

fn main() -> hin_embed::Result<()> {
    let spec = SyntheticSpec::new(6, 3)
        .entity_type("user", 200)
        .entity_type("item", 300)
        .relation(SyntheticRelation::new("fav", "user", "item", Coverage::High).densities(0.1, 0.002))
        .multi_interest(0.5);
    let (graph, truth) = generate_synthetic_hin(&spec)?;
    let config = TrainConfig { epochs: 15, seed: 3, ..TrainConfig::default() };
    let parts = partition(&graph, 1, 3)?;
    let (store, _) = train(&graph, &parts, EmbeddingStore::init(&graph, 16, 3, 0.1)?, &config)?;

    let (user, item) = (type_id(&graph, "user"), type_id(&graph, "item"));
    let clusters = kmeans_with(store.entity_table(item), &KMeansConfig::new(12, 3))?;
    println!("k = {} clusters, sizes {:?}", clusters.k(), clusters.cluster_sizes());

    let mixes = build_mixtures(&graph, &store, &clusters, user, &EngagementScope::new(item), 3)?;
    for (u, mix) in graph.entities_of_type(user).zip(&mixes).take(5) {
        let parts: Vec<String> = mix
            .components
            .iter()
            .map(|c| format!("c{}:{}/{}", c.cluster.map_or(-1, |c| c as i64), c.count, mix.kept_total))
            .collect();
        println!("{:<8} interests {:?} mixture {}", graph.ids().external(u), truth.interests_of(u), parts.join(" "));
    }

    // a new item liked by the first five users
    let fans: Vec<_> = graph.entities_of_type(user).take(5).collect();
    let placed = embed_oov_target(&fans, &store, &clusters)?;
    println!("new item placed at cluster {}", placed.cluster);
    Ok(())
}
