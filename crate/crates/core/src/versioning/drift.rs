//! Parameter drift between two versions, bucketed by degree decile.

use std::io::Write;

use super::warm::VersionMap;
use crate::error::{Error, Result};
use crate::hin::{EntityRef, HinGraph};
use crate::store::EmbeddingStore;
use crate::vecmath::{norm, sq_dist};

#[derive(Debug, Clone, PartialEq)]
pub struct DecileDrift {
    pub decile: usize,
    pub count: usize,
    pub mean_l2: f64,
    pub max_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    /// `(entity in the new graph, ‖θ_new − θ_prev‖₂)` for every shared entity
    pub deviations: Vec<(EntityRef, f64)>,
    /// ten buckets by ascending new-graph degree
    pub deciles: Vec<DecileDrift>,
    pub mean_l2: f64,
    pub max_l2: f64,
    /// mean and max of `‖θ_new − θ_prev‖ / ‖θ_prev‖` over entities with a nonzero previous row
    pub mean_relative: f64,
    pub max_relative: f64,
}

impl DriftReport {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# entities={} mean_l2={:.9e} max_l2={:.9e} mean_relative={:.9e} max_relative={:.9e}",
            self.deviations.len(),
            self.mean_l2,
            self.max_l2,
            self.mean_relative,
            self.max_relative
        )?;
        writeln!(w, "decile\tcount\tmean_l2\tmax_l2")?;
        for d in &self.deciles {
            writeln!(w, "{}\t{}\t{:.9e}\t{:.9e}", d.decile, d.count, d.mean_l2, d.max_l2)?;
        }
        Ok(())
    }

    pub fn decile(&self, i: usize) -> &DecileDrift {
        &self.deciles[i]
    }
}

/// Drift of every entity of `graph` that `map` ties to a previous row.
pub fn drift_report(prev: &EmbeddingStore, new: &EmbeddingStore, graph: &HinGraph, map: &VersionMap) -> Result<DriftReport> {
    if prev.dim() != new.dim() {
        return Err(Error::Shape(format!("dims differ: {} vs {}", prev.dim(), new.dim())));
    }
    new.check_shape(graph)?;
    let mut rows: Vec<(u32, usize, EntityRef, f64, Option<f64>)> = Vec::new();
    for e in graph.entities() {
        if let Some(old) = map.previous(e) {
            let a = prev.entity_row(old);
            let d = sq_dist(new.entity_row(e), a).sqrt();
            let n = norm(a);
            rows.push((graph.degree(e), graph.global_index(e), e, d, (n > 0.0).then(|| d / n)));
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no entities shared between versions".into()));
    }
    let n = rows.len();
    let mean_l2 = rows.iter().map(|r| r.3).sum::<f64>() / n as f64;
    let max_l2 = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let rel: Vec<f64> = rows.iter().filter_map(|r| r.4).collect();
    let mean_relative = if rel.is_empty() { 0.0 } else { rel.iter().sum::<f64>() / rel.len() as f64 };
    let max_relative = rel.iter().copied().fold(0.0, f64::max);
    let deviations = rows.iter().map(|r| (r.2, r.3)).collect();

    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let deciles = (0..10)
        .map(|i| {
            let bucket = &rows[i * n / 10..(i + 1) * n / 10];
            let count = bucket.len();
            DecileDrift {
                decile: i,
                count,
                mean_l2: if count == 0 { 0.0 } else { bucket.iter().map(|r| r.3).sum::<f64>() / count as f64 },
                max_l2: bucket.iter().map(|r| r.3).fold(0.0, f64::max),
            }
        })
        .collect();
    Ok(DriftReport {
        deviations,
        deciles,
        mean_l2,
        max_l2,
        mean_relative,
        max_relative,
    })
}
