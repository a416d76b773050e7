//! Retrain after new edges arrive with cold, warm and anchored starts and
//! print drift against the previous version by degree decile.
//!
//! ```text
//! cargo run --release --example retrain_drift
//! ```

use rand::seq::SliceRandom;

use hin_embed::evalkit::{generate_synthetic_hin, SyntheticRelation, SyntheticSpec};
use hin_embed::hin::{partition, Coverage};
use hin_embed::rng::rng_for;
use hin_embed::store::EmbeddingStore;
use hin_embed::trainer::{train, TrainConfig};
use hin_embed::versioning::{retrain, RetrainMode, RetrainPolicy};

fn main() -> hin_embed::Result<()> {
    let spec = SyntheticSpec::new(50, 2)
        .entity_type("user", 1000)
        .relation(SyntheticRelation::new("follows", "user", "user", Coverage::High).densities(0.3, 0.001));
    let (next, _) = generate_synthetic_hin(&spec)?;
    let mut edges = next.edges().to_vec();
    edges.shuffle(&mut rng_for(2, &[]));
    edges.truncate(edges.len() * 95 / 100);
    let prev_graph = next.with_edges(edges)?;

    let config = TrainConfig { epochs: 20, seed: 2, ..TrainConfig::default() };
    let parts = partition(&prev_graph, 1, 2)?;
    let (prev, _) = train(&prev_graph, &parts, EmbeddingStore::init(&prev_graph, 16, 2, 0.1)?, &config)?;

    let retrain_config = TrainConfig { epochs: 5, seed: 3, ..config };
    for (name, policy) in [
        ("cold", RetrainPolicy::mode(RetrainMode::ColdStart)),
        ("warm", RetrainPolicy::mode(RetrainMode::WarmStart)),
        ("anchored a=0.1", RetrainPolicy::anchored(0.1)),
        ("anchored a=1e6", RetrainPolicy::anchored(1e6)),
    ] {
        let out = retrain(&next, &prev, prev_graph.ids(), &policy, &retrain_config)?;
        let d = &out.drift;
        let by_decile: Vec<String> = d.deciles.iter().map(|x| format!("{:.3}", x.mean_l2)).collect();
        println!("{name:<15} mean {:.2e} max {:.2e} deciles [{}]", d.mean_l2, d.max_l2, by_decile.join(" "));
    }
    Ok(())
}
