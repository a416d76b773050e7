use super::*;
use crate::hin::{Coverage, GraphBuilder, HinGraph, Schema};
use crate::store::EmbeddingStore;
use crate::trainer::TrainConfig;
use rand::Rng as _;

fn schema() -> Schema {
    let mut s = Schema::new();
    s.add_entity_type("user").unwrap();
    s.add_entity_type("item").unwrap();
    s.add_relation("follows", "user", "user", Coverage::High).unwrap();
    s.add_relation("likes", "user", "item", Coverage::Low).unwrap();
    s
}

fn graph(edges: &[(&str, &str, &str, &str, &str)]) -> HinGraph {
    let mut b = GraphBuilder::new(schema());
    for &(st, s, r, tt, t) in edges {
        b.add_edge(st, s, r, tt, t).unwrap();
    }
    b.build().unwrap()
}

fn v1() -> HinGraph {
    graph(&[
        ("user", "a", "follows", "user", "b"),
        ("user", "b", "likes", "item", "x"),
        ("user", "c", "likes", "item", "x"),
    ])
}

#[test]
fn shared_rows_are_copied_bitwise() {
    let old = v1();
    let prev = EmbeddingStore::init(&old, 4, 1, 0.1).unwrap();
    let new = graph(&[
        ("user", "c", "likes", "item", "x"),
        ("user", "a", "follows", "user", "b"),
        ("user", "d", "follows", "user", "a"),
    ]);
    let warm = warm_start_init(&new, &prev, old.ids(), &RetrainPolicy::default(), 9).unwrap();
    for name in ["a", "b", "c"] {
        let (o, n) = (old.lookup("user", name).unwrap(), new.lookup("user", name).unwrap());
        let same = warm.entity_row(n).iter().zip(prev.entity_row(o)).all(|(x, y)| x.to_bits() == y.to_bits());
        assert!(same, "{name}");
    }
}

#[test]
fn single_neighbor_formula() {
    let old = v1();
    let mut prev = EmbeddingStore::zeros(&old, 2).unwrap();
    prev.entity_row_mut(old.lookup("user", "a").unwrap()).copy_from_slice(&[1.0, 1.0]);
    let follows = old.schema().relation_id("follows").unwrap();
    prev.relation_row_mut(follows).copy_from_slice(&[0.5, -0.5]);
    let new = graph(&[("user", "a", "follows", "user", "b"), ("user", "n", "follows", "user", "a")]);
    let n = new.lookup("user", "n").unwrap();
    let warm = warm_start_init(&new, &prev, old.ids(), &RetrainPolicy::default(), 0).unwrap();
    assert_eq!(warm.entity_row(n), &[1.5, 0.5]);
    let directional = RetrainPolicy {
        relation_term: RelationTerm::Directional,
        ..RetrainPolicy::default()
    };
    let warm = warm_start_init(&new, &prev, old.ids(), &directional, 0).unwrap();
    assert_eq!(warm.entity_row(n), &[0.5, 1.5]);
}

#[test]
fn two_neighbor_mean_matches_f64_resummation() {
    let old = v1();
    let prev = EmbeddingStore::init(&old, 6, 3, 0.5).unwrap();
    let mut prev = prev;
    for r in old.schema().relation_ids() {
        let mut rng = crate::rng::rng_for(4, &[r.0 as u64]);
        prev.relation_row_mut(r).iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    let new = graph(&[
        ("user", "a", "follows", "user", "b"),
        ("user", "n", "follows", "user", "a"),
        ("user", "n", "likes", "item", "x"),
        ("user", "n", "likes", "item", "brand_new"),
    ]);
    let warm = warm_start_init(&new, &prev, old.ids(), &RetrainPolicy::default(), 0).unwrap();
    let a = prev.entity_row(old.lookup("user", "a").unwrap());
    let x = prev.entity_row(old.lookup("item", "x").unwrap());
    let rf = prev.relation_row(old.schema().relation_id("follows").unwrap());
    let rl = prev.relation_row(old.schema().relation_id("likes").unwrap());
    let expected: Vec<f32> = (0..6)
        .map(|i| (((a[i] as f64 + rf[i] as f64) + (x[i] as f64 + rl[i] as f64)) / 2.0) as f32)
        .collect();
    assert_eq!(warm.entity_row(new.lookup("user", "n").unwrap()), expected.as_slice());
}

#[test]
fn isolated_new_nodes_fall_back_to_random_init() {
    let old = v1();
    let prev = EmbeddingStore::init(&old, 4, 1, 0.1).unwrap();
    let new = graph(&[("user", "a", "follows", "user", "b"), ("user", "p", "follows", "user", "q")]);
    let policy = RetrainPolicy::default();
    let warm = warm_start_init(&new, &prev, old.ids(), &policy, 5).unwrap();
    let fresh = EmbeddingStore::init(&new, 4, 5, policy.init_scale).unwrap();
    for id in ["p", "q"] {
        let e = new.lookup("user", id).unwrap();
        assert_eq!(warm.entity_row(e), fresh.entity_row(e));
    }
}

#[test]
fn relations_and_accumulators_carry_over() {
    let old = v1();
    let mut prev = EmbeddingStore::init(&old, 3, 1, 0.1).unwrap();
    let likes = old.schema().relation_id("likes").unwrap();
    prev.relation_row_mut(likes).copy_from_slice(&[1.0, 2.0, 3.0]);
    prev.relation_accum_row_mut(likes).copy_from_slice(&[4.0, 5.0, 6.0]);
    let a = old.lookup("user", "a").unwrap();
    prev.entity_accum_row_mut(a).copy_from_slice(&[7.0, 8.0, 9.0]);
    let warm = warm_start_init(&old, &prev, old.ids(), &RetrainPolicy::default(), 0).unwrap();
    assert!(warm.bitwise_eq(&prev));
}

#[test]
fn zero_epoch_warm_start_has_zero_drift() {
    let old = v1();
    let prev = EmbeddingStore::init(&old, 4, 1, 0.1).unwrap();
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let out = retrain(&old, &prev, old.ids(), &RetrainPolicy::default(), &cfg).unwrap();
    assert_eq!(out.drift.max_l2, 0.0);
    assert_eq!(out.drift.deviations.len(), old.num_entities());
}

#[test]
fn anchored_policy_needs_positive_alpha() {
    assert!(RetrainPolicy::anchored(0.0).validate().is_err());
    assert!(RetrainPolicy::anchored(1e6).validate().is_ok());
    assert!(RetrainPolicy::mode(RetrainMode::ColdStart).validate().is_ok());
    assert_eq!("anchor".parse::<RetrainMode>().unwrap(), RetrainMode::L2Anchored);
}

#[test]
fn drift_of_identical_and_shifted_stores() {
    let g = v1();
    let a = EmbeddingStore::init(&g, 3, 1, 0.1).unwrap();
    let map = VersionMap::identity(&g);
    let same = drift_report(&a, &a, &g, &map).unwrap();
    assert!(same.deviations.iter().all(|d| d.1 == 0.0));
    let mut b = a.clone();
    let c = [0.5f32, -0.25, 1.0];
    for e in g.entities() {
        b.entity_row_mut(e).iter_mut().zip(c).for_each(|(x, y)| *x += y);
    }
    let r = drift_report(&a, &b, &g, &map).unwrap();
    let expected = (0.25f64 + 0.0625 + 1.0).sqrt();
    assert!(r.deviations.iter().all(|d| (d.1 - expected).abs() < 1e-6));
    assert_eq!(r.deciles.iter().map(|d| d.count).sum::<usize>(), g.num_entities());
}

#[test]
fn drift_aggregates_match_reference() {
    let spec = crate::evalkit::follow_graph_spec(200, 2, 3);
    let (g, _) = crate::evalkit::generate_synthetic_hin(&spec).unwrap();
    let a = EmbeddingStore::init(&g, 8, 1, 0.1).unwrap();
    let b = EmbeddingStore::init(&g, 8, 2, 0.1).unwrap();
    let r = drift_report(&a, &b, &g, &VersionMap::identity(&g)).unwrap();
    let mut rows: Vec<(u32, usize, f64)> = g
        .entities()
        .map(|e| {
            let d: f64 = a
                .entity_row(e)
                .iter()
                .zip(b.entity_row(e))
                .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                .sum();
            (g.degree(e), g.global_index(e), d.sqrt())
        })
        .collect();
    let mean: f64 = rows.iter().map(|r| r.2).sum::<f64>() / rows.len() as f64;
    assert!((r.mean_l2 - mean).abs() < 1e-12);
    rows.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.cmp(&y.1)));
    let n = rows.len();
    for (i, dec) in r.deciles.iter().enumerate() {
        let bucket = &rows[i * n / 10..(i + 1) * n / 10];
        assert_eq!(dec.count, bucket.len());
        let m = bucket.iter().map(|r| r.2).sum::<f64>() / bucket.len() as f64;
        assert!((dec.mean_l2 - m).abs() < 1e-12);
    }
    let mut tsv = Vec::new();
    r.write_tsv(&mut tsv).unwrap();
    let text = String::from_utf8(tsv).unwrap();
    assert!(text.lines().nth(1).unwrap() == "decile\tcount\tmean_l2\tmax_l2");
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn dim_mismatch_is_rejected() {
    let g = v1();
    let a = EmbeddingStore::init(&g, 3, 1, 0.1).unwrap();
    let b = EmbeddingStore::init(&g, 4, 1, 0.1).unwrap();
    assert!(matches!(
        drift_report(&a, &b, &g, &VersionMap::identity(&g)),
        Err(crate::Error::Shape(_))
    ));
}
