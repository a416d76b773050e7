//! k-means++ seeding, mini-batch updates and full-batch Lloyd refinement.
//!
//! With `batch_size` unset or at least the number of points the fit is plain
//! Lloyd. Otherwise mini-batch steps with per-centroid learning rates
//! `1/count` run first and Lloyd passes finish the job. Every full-batch
//! pass records its inertia; a pass that would raise it is rolled back and
//! ends the fit, so the recorded history never increases.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::vecmath::{nearest_row, sq_dist, Matrix};

pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_BATCH_SIZE: usize = 1024;
pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// `None` disables the mini-batch phase.
    pub batch_size: Option<usize>,
    /// Stop once no centroid moves more than this (L2).
    pub tolerance: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            seed,
            max_iters: DEFAULT_MAX_ITERS,
            batch_size: Some(DEFAULT_BATCH_SIZE),
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn full_batch(mut self) -> Self {
        self.batch_size = None;
        self
    }

    pub fn max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Matrix,
    /// cluster index of every input row
    pub assignment: Vec<u32>,
    /// inertia after each full-batch pass, final assignment last
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    /// Assign `points` to fixed `centroids`.
    pub fn from_centroids(centroids: Matrix, points: &Matrix) -> Result<Self> {
        if centroids.rows() == 0 {
            return Err(Error::InvalidArgument("no centroids".into()));
        }
        if points.cols() != centroids.cols() {
            return Err(Error::Shape(format!(
                "points have dim {}, centroids {}",
                points.cols(),
                centroids.cols()
            )));
        }
        let (assignment, inertia) = assign(points, &centroids);
        Ok(ClusterModel {
            centroids,
            assignment,
            inertia_history: vec![inertia],
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }

    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        self.centroids.row(c)
    }

    pub fn cluster_of(&self, row: usize) -> Option<usize> {
        self.assignment.get(row).map(|&c| c as usize)
    }

    pub fn nearest(&self, x: &[f32]) -> (usize, f64) {
        nearest_row(&self.centroids, x)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignment {
            sizes[a as usize] += 1;
        }
        sizes
    }
}

pub fn kmeans(points: &Matrix, k: usize, seed: u64, max_iters: usize) -> Result<ClusterModel> {
    kmeans_with(points, &KMeansConfig::new(k, seed).max_iters(max_iters))
}

pub fn kmeans_with(points: &Matrix, cfg: &KMeansConfig) -> Result<ClusterModel> {
    let n = points.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("k-means over an empty point set".into()));
    }
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::InvalidArgument(format!("k = {} must lie in 1..={n}", cfg.k)));
    }
    if !points.all_finite() {
        return Err(Error::InvalidArgument("k-means input has non-finite values".into()));
    }
    let mut rng = rng::rng_for(cfg.seed, &[0x6b6d_6561_6e73]);
    let mut centroids = plus_plus_init(points, cfg.k, &mut rng);

    if let Some(b) = cfg.batch_size.filter(|&b| b > 0 && b < n) {
        let mut counts = vec![0u64; cfg.k];
        for _ in 0..cfg.max_iters {
            let batch: Vec<usize> = (0..b).map(|_| rng.gen_range(0..n)).collect();
            let nearest: Vec<usize> = batch
                .par_iter()
                .map(|&i| nearest_row(&centroids, points.row(i)).0)
                .collect();
            let before = centroids.clone();
            for (&i, &c) in batch.iter().zip(&nearest) {
                counts[c] += 1;
                let eta = 1.0 / counts[c] as f64;
                for (cv, &x) in centroids.row_mut(c).iter_mut().zip(points.row(i)) {
                    *cv = ((1.0 - eta) * *cv as f64 + eta * x as f64) as f32;
                }
            }
            if max_shift(&before, &centroids) < cfg.tolerance {
                break;
            }
        }
    }

    let (mut assignment, mut inertia) = assign(points, &centroids);
    let mut history = vec![inertia];
    for _ in 0..cfg.max_iters.max(1) {
        let updated = lloyd_update(points, &assignment, &centroids);
        let (next_assignment, next_inertia) = assign(points, &updated);
        if next_inertia > inertia {
            break;
        }
        let shift = max_shift(&centroids, &updated);
        centroids = updated;
        assignment = next_assignment;
        inertia = next_inertia;
        history.push(inertia);
        if shift < cfg.tolerance {
            break;
        }
    }
    Ok(ClusterModel {
        centroids,
        assignment,
        inertia_history: history,
    })
}

fn plus_plus_init(points: &Matrix, k: usize, rng: &mut rng::Rng) -> Matrix {
    let n = points.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
            pick.expect("positive total mass")
        } else {
            // every remaining point coincides with a chosen one
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        let c = points.row(next).to_vec();
        d2.par_iter_mut()
            .enumerate()
            .for_each(|(i, d)| *d = d.min(sq_dist(points.row(i), &c)));
    }
    points.select_rows(&chosen)
}

fn assign(points: &Matrix, centroids: &Matrix) -> (Vec<u32>, f64) {
    let pairs: Vec<(u32, f64)> = (0..points.rows())
        .into_par_iter()
        .map(|i| {
            let (c, d) = nearest_row(centroids, points.row(i));
            (c as u32, d)
        })
        .collect();
    let inertia = pairs.iter().map(|p| p.1).sum();
    (pairs.into_iter().map(|p| p.0).collect(), inertia)
}

/// Centroid of each cluster's members; empty clusters keep their old centroid.
fn lloyd_update(points: &Matrix, assignment: &[u32], old: &Matrix) -> Matrix {
    let (k, d) = (old.rows(), old.cols());
    let mut sums = vec![0.0f64; k * d];
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        let c = c as usize;
        counts[c] += 1;
        for (s, &x) in sums[c * d..(c + 1) * d].iter_mut().zip(points.row(i)) {
            *s += x as f64;
        }
    }
    let mut out = old.clone();
    for c in 0..k {
        if counts[c] > 0 {
            for (o, &s) in out.row_mut(c).iter_mut().zip(&sums[c * d..(c + 1) * d]) {
                *o = (s / counts[c] as f64) as f32;
            }
        }
    }
    out
}

fn max_shift(a: &Matrix, b: &Matrix) -> f64 {
    a.iter_rows()
        .zip(b.iter_rows())
        .map(|(x, y)| sq_dist(x, y).sqrt())
        .fold(0.0, f64::max)
}
