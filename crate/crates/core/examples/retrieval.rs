//! Build an HNSW inner-product index over item embeddings, then compare a
//! single translated query per user with a mixture multi-query: how many
//! of each user's planted interests show up among the ten results.
//!
//! ```text
//! cargo run --release --example retrieval
//! ```

use std::collections::{BTreeSet, HashSet};

use hin_embed::evalkit::{generate_synthetic_hin, type_id, SyntheticRelation, SyntheticSpec};
use hin_embed::hin::{partition, Coverage, RelationId};
use hin_embed::mixture::{build_mixtures, kmeans_with, EngagementScope, KMeansConfig};
use hin_embed::retrieval::{multi_query_excluding, translate_query, AnnIndex, IndexKind};
use hin_embed::store::EmbeddingStore;
use hin_embed::trainer::{train, TrainConfig};

fn main() -> hin_embed::Result<()> {
    let spec = SyntheticSpec::new(100, 5)
        .entity_type("user", 1000)
        .entity_type("item", 2000)
        .relation(SyntheticRelation::new("fav", "user", "item", Coverage::High).densities(0.2, 0.0002))
        .multi_interest(1.0);
    let (graph, truth) = generate_synthetic_hin(&spec)?;
    let config = TrainConfig { epochs: 20, seed: 5, ..TrainConfig::default() };
    let parts = partition(&graph, 1, 5)?;
    let (store, _) = train(&graph, &parts, EmbeddingStore::init(&graph, 16, 5, 0.1)?, &config)?;

    let (user, item) = (type_id(&graph, "user"), type_id(&graph, "item"));
    let ids = graph.ids().ids(item).to_vec();
    let index = AnnIndex::build("item", ids, store.entity_table(item).clone(), IndexKind::default())?;
    let clusters = kmeans_with(store.entity_table(item), &KMeansConfig::new(200, 5))?;
    let mixes = build_mixtures(&graph, &store, &clusters, user, &EngagementScope::new(item), 3)?;
    let fav = store.relation_row(RelationId(0)).to_vec();

    let community = |id: u32| truth.community[item.index()][id as usize];
    let (mut single_cover, mut multi_cover) = (0usize, 0usize);
    for u in graph.entities_of_type(user) {
        let seen: HashSet<u32> = graph
            .incident_edges(u)
            .iter()
            .map(|&i| graph.edges()[i as usize].target.local_id)
            .collect();
        let interests: BTreeSet<u32> = truth.interests_of(u).iter().copied().collect();
        let covered = |found: &[u32]| found.iter().map(|&i| community(i)).filter(|c| interests.contains(c)).collect::<BTreeSet<_>>().len();

        let q = translate_query(store.entity_row(u), &fav);
        let single: Vec<u32> = index.query_topk(&q, 10 + seen.len())?.ids().into_iter().filter(|i| !seen.contains(i)).take(10).collect();
        let multi = multi_query_excluding(&index, &mixes[u.local()], 10, &seen)?;
        single_cover += covered(&single);
        multi_cover += covered(&multi.ids());

        if u.local_id == 0 {
            println!("user0 interests {interests:?}");
            println!("  single communities {:?}", single.iter().map(|&i| community(i)).collect::<Vec<_>>());
            println!("  mixture weights {:?}", mixes[0].weights());
            println!("  multi  communities {:?}", multi.ids().iter().map(|&i| community(i)).collect::<Vec<_>>());
        }
    }
    let users = graph.entity_count(user) as f64;
    println!("interests covered per user in the top 10: single {:.2}, multi {:.2} (of 2)",
        single_cover as f64 / users, multi_cover as f64 / users);
    Ok(())
}
