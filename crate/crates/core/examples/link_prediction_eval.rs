//! Hold out a tenth of each user's follows, train on the rest, and report
//! recall@k and MRR against all users, plus RCE of sigmoid edge scores.
//!
//! ```text
//! cargo run --release --example link_prediction_eval
//! ```

use rand::Rng;

use hin_embed::evalkit::{
    evaluate_linkpred, generate_synthetic_hin, rce, split_edges, LinkPredOptions, RceInput, SyntheticRelation,
    SyntheticSpec,
};
use hin_embed::hin::{partition, Coverage, EntityRef, RelationId};
use hin_embed::rng::rng_for;
use hin_embed::store::EmbeddingStore;
use hin_embed::trainer::{sigmoid, translated_dot, train, TrainConfig};

fn main() -> hin_embed::Result<()> {
    let spec = SyntheticSpec::new(50, 4)
        .entity_type("user", 1000)
        .relation(SyntheticRelation::new("follows", "user", "user", Coverage::High).densities(0.3, 0.001));
    let (graph, _) = generate_synthetic_hin(&spec)?;
    let split = split_edges(&graph, RelationId(0), 0.1, 4)?;
    let config = TrainConfig { epochs: 20, seed: 4, ..TrainConfig::default() };
    let parts = partition(&split.train, 1, 4)?;
    let (store, _) = train(&split.train, &parts, EmbeddingStore::init(&split.train, 16, 4, 0.1)?, &config)?;

    let result = evaluate_linkpred(&store, &split, &[10, 20, 50], LinkPredOptions { filter_train: true })?;
    println!("{} queries", result.queries);
    for (k, r) in &result.recall {
        println!("recall@{k:<3} {r:.4}");
    }
    println!("mrr        {:.4}", result.mrr);

    let mut rng = rng_for(4, &[]);
    let (mut labels, mut preds) = (Vec::new(), Vec::new());
    let users = graph.entity_count(graph.schema().entity_type_ids().next().expect("one type")) as u32;
    for e in split.held_out_edges() {
        let p = |t: EntityRef| sigmoid(translated_dot(store.entity_row(e.source), store.relation_row(e.relation), store.entity_row(t)));
        labels.push(1);
        preds.push(p(e.target));
        labels.push(0);
        preds.push(p(EntityRef::new(e.target.entity_type, rng.gen_range(0..users))));
    }
    let r = rce(&RceInput::new(labels, preds))?;
    println!("rce {:.2} (cross entropy {:.4} vs prior {:.4})", r.rce, r.cross_entropy, r.reference_cross_entropy);
    Ok(())
}
