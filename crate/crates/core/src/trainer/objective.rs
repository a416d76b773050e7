//! Translating dot-product score and the negative-sampling loss.
//!
//! `f(s, r, t) = (θ_s + θ_r)·θ_t`. The minimized loss for a batch is
//! `-Σ_e [log σ(f(e)) + Σ_{e'} log σ(-f(e'))]` over positives `e` and their
//! corruptions `e'`. Everything is accumulated in `f64`.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::hin::{Edge, EntityRef, RelationId};
use crate::store::{Params, ParamsMut};

pub const ADAGRAD_EPS: f64 = 1e-10;

pub fn score(params: &impl Params, edge: &Edge) -> Result<f64> {
    let s = params.entity(edge.source)?;
    let r = params.relation(edge.relation)?;
    let t = params.entity(edge.target)?;
    Ok(translated_dot(s, r, t))
}

#[inline]
pub fn translated_dot(s: &[f32], r: &[f32], t: &[f32]) -> f64 {
    s.iter()
        .zip(r)
        .zip(t)
        .map(|((&a, &b), &c)| (a as f64 + b as f64) * c as f64)
        .sum()
}

/// `log σ(x)` without overflow for large `|x|`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Positives with their corruptions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripletBatch {
    pub positives: Vec<Edge>,
    pub negatives: Vec<Vec<Edge>>,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }
}

/// Sparse gradients keyed by touched rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    pub entities: BTreeMap<EntityRef, Vec<f64>>,
    pub relations: BTreeMap<RelationId, Vec<f64>>,
}

impl Gradients {
    fn entity(&mut self, e: EntityRef, dim: usize) -> &mut Vec<f64> {
        self.entities.entry(e).or_insert_with(|| vec![0.0; dim])
    }

    fn relation(&mut self, r: RelationId, dim: usize) -> &mut Vec<f64> {
        self.relations.entry(r).or_insert_with(|| vec![0.0; dim])
    }
}

/// Previous-version rows that an anchored retrain pulls entities toward.
pub trait Anchor: Sync {
    fn alpha(&self) -> f64;
    fn previous(&self, e: EntityRef) -> Option<&[f32]>;
}

pub fn batch_loss_and_grads(params: &impl Params, batch: &TripletBatch) -> Result<(f64, Gradients)> {
    let dim = params.dim();
    let mut grads = Gradients::default();
    let mut loss = 0.0;
    for (i, pos) in batch.positives.iter().enumerate() {
        loss += accumulate_edge(params, pos, 1.0, dim, &mut grads)?;
        for neg in batch.negatives.get(i).map(Vec::as_slice).unwrap_or(&[]) {
            loss += accumulate_edge(params, neg, -1.0, dim, &mut grads)?;
        }
    }
    Ok((loss, grads))
}

/// Loss and gradients with an extra `α·Σ‖θ_v − θ_v^prev‖²` over the batch's
/// distinct touched entities that exist in the previous version.
pub fn anchored_loss_and_grads(
    params: &impl Params,
    batch: &TripletBatch,
    anchor: &dyn Anchor,
) -> Result<(f64, Gradients)> {
    let (mut loss, mut grads) = batch_loss_and_grads(params, batch)?;
    let alpha = anchor.alpha();
    for (e, g) in grads.entities.iter_mut() {
        if let Some(prev) = anchor.previous(*e) {
            let cur = params.entity(*e)?;
            for ((gi, &c), &p) in g.iter_mut().zip(cur).zip(prev) {
                let d = c as f64 - p as f64;
                loss += alpha * d * d;
                *gi += 2.0 * alpha * d;
            }
        }
    }
    Ok((loss, grads))
}

fn accumulate_edge(params: &impl Params, edge: &Edge, sign: f64, dim: usize, grads: &mut Gradients) -> Result<f64> {
    let s = params.entity(edge.source)?;
    let r = params.relation(edge.relation)?;
    let t = params.entity(edge.target)?;
    let f = translated_dot(s, r, t);
    let loss = -log_sigmoid(sign * f);
    // d loss / d f
    let coef = -sign * sigmoid(-sign * f);
    {
        let gs = grads.entity(edge.source, dim);
        for (g, &tv) in gs.iter_mut().zip(t) {
            *g += coef * tv as f64;
        }
    }
    {
        let gr = grads.relation(edge.relation, dim);
        for (g, &tv) in gr.iter_mut().zip(t) {
            *g += coef * tv as f64;
        }
    }
    let gt = grads.entity(edge.target, dim);
    for ((g, &sv), &rv) in gt.iter_mut().zip(s).zip(r) {
        *g += coef * (sv as f64 + rv as f64);
    }
    Ok(loss)
}

/// Per coordinate: `acc += g²; θ -= lr·g / (√acc + ε)`. Rows absent from
/// `grads` are untouched.
pub fn adagrad_step(params: &mut impl ParamsMut, grads: &Gradients, learning_rate: f64) -> Result<()> {
    for (&e, g) in &grads.entities {
        let (row, acc) = params.entity_slot(e)?;
        adagrad_row(row, acc, g, learning_rate);
    }
    for (&r, g) in &grads.relations {
        let (row, acc) = params.relation_slot(r)?;
        adagrad_row(row, acc, g, learning_rate);
    }
    Ok(())
}

#[inline]
fn adagrad_row(row: &mut [f32], acc: &mut [f32], g: &[f64], lr: f64) {
    for ((x, a), &gi) in row.iter_mut().zip(acc.iter_mut()).zip(g) {
        if gi == 0.0 {
            continue;
        }
        let new_acc = *a as f64 + gi * gi;
        *a = new_acc as f32;
        *x = (*x as f64 - lr * gi / (new_acc.sqrt() + ADAGRAD_EPS)) as f32;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::{Coverage, EntityTypeId, GraphBuilder, HinGraph, Schema};
    use crate::store::EmbeddingStore;

    fn two_node_graph() -> HinGraph {
        let mut s = Schema::new();
        s.add_entity_type("n").unwrap();
        s.add_relation("r", "n", "n", Coverage::High).unwrap();
        let mut b = GraphBuilder::new(s);
        b.add_edge("n", "s", "r", "n", "t").unwrap();
        b.build().unwrap()
    }

    fn set(store: &mut EmbeddingStore, s: &[f32], r: &[f32], t: &[f32]) {
        let n = EntityTypeId(0);
        store.entity_row_mut(EntityRef::new(n, 0)).copy_from_slice(s);
        store.entity_row_mut(EntityRef::new(n, 1)).copy_from_slice(t);
        store.relation_row_mut(RelationId(0)).copy_from_slice(r);
    }

    #[test]
    fn score_examples() {
        let g = two_node_graph();
        let mut st = EmbeddingStore::zeros(&g, 2).unwrap();
        let e = g.edges()[0];
        set(&mut st, &[1.0, 0.0], &[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(score(&st, &e).unwrap(), 1.0);
        set(&mut st, &[1.0, 2.0], &[0.0, 1.0], &[2.0, 0.0]);
        assert_eq!(score(&st, &e).unwrap(), 2.0);
        let bad = Edge::new(EntityRef::new(EntityTypeId(0), 5), RelationId(0), e.target);
        assert!(score(&st, &bad).is_err());
    }

    #[test]
    fn zero_scores_give_two_ln_two() {
        let g = two_node_graph();
        let st = EmbeddingStore::zeros(&g, 3).unwrap();
        let e = g.edges()[0];
        let neg = Edge::new(e.target, e.relation, e.source);
        let batch = TripletBatch {
            positives: vec![e],
            negatives: vec![vec![neg]],
        };
        let (loss, _) = batch_loss_and_grads(&st, &batch).unwrap();
        assert!((loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_sigmoid(800.0), 0.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!(log_sigmoid(-1e6).is_finite());
    }

    #[test]
    fn relation_gradient_sums_over_occurrences() {
        let g = two_node_graph();
        let mut st = EmbeddingStore::zeros(&g, 2).unwrap();
        set(&mut st, &[0.3, -0.2], &[0.1, 0.4], &[0.5, 0.7]);
        let e = g.edges()[0];
        let one = TripletBatch {
            positives: vec![e],
            negatives: vec![vec![]],
        };
        let three = TripletBatch {
            positives: vec![e, e, e],
            negatives: vec![vec![], vec![], vec![]],
        };
        let (_, g1) = batch_loss_and_grads(&st, &one).unwrap();
        let (_, g3) = batch_loss_and_grads(&st, &three).unwrap();
        for (a, b) in g1.relations[&RelationId(0)].iter().zip(&g3.relations[&RelationId(0)]) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adagrad_closed_forms() {
        let g = two_node_graph();
        let mut st = EmbeddingStore::zeros(&g, 2).unwrap();
        let a = EntityRef::new(EntityTypeId(0), 0);
        let mut grads = Gradients::default();
        grads.entities.insert(a, vec![3.0, 0.0]);
        adagrad_step(&mut st, &grads, 0.1).unwrap();
        let row = st.entity_row(a).to_vec();
        assert!((row[0] as f64 + 0.1 * 3.0 / (3.0 + 1e-10)).abs() < 1e-7);
        assert_eq!(row[1], 0.0);
        assert_eq!(st.entity_accum_table(EntityTypeId(0)).row(0), &[9.0, 0.0]);
        // untouched row
        assert_eq!(st.entity_row(EntityRef::new(EntityTypeId(0), 1)), &[0.0, 0.0]);

        let mut st = EmbeddingStore::zeros(&g, 1).unwrap();
        let mut grads = Gradients::default();
        grads.entities.insert(a, vec![1.0]);
        adagrad_step(&mut st, &grads, 0.5).unwrap();
        let x1 = st.entity_row(a)[0] as f64;
        adagrad_step(&mut st, &grads, 0.5).unwrap();
        let step2 = x1 - st.entity_row(a)[0] as f64;
        assert!((step2 - 0.5 / 2f64.sqrt()).abs() < 1e-6);
    }
}
