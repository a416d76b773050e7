//! Hierarchical navigable small-world graph for maximum inner product.
//!
//! Inner-product search is reduced to Euclidean search by appending one
//! coordinate: with `R = max ‖x‖`, items become `[x, √(R² − ‖x‖²)]` and
//! queries `[q, 0]`, so `‖q' − x'‖² = ‖q‖² + R² − 2 q·x` orders items exactly
//! as descending `q·x`. Construction is sequential and seeded; neighbor
//! lists are chosen with the diversity heuristic.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng as _;

use crate::rng;
use crate::vecmath::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HnswParams {
    /// neighbors per node above the base layer; the base layer keeps `2·m`
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        HnswParams {
            m: 16,
            ef_construction: 200,
            ef_search: 384,
            seed: 0,
        }
    }
}

/// Squared L2 in eight `f32` lanes; graph navigation only, final scores are
/// recomputed in `f64` by the index.
#[inline]
fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in ra.iter().zip(rb) {
        tail += (x - y) * (x - y);
    }
    (acc.iter().sum::<f32>() + tail) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Scored {
    dist: f64,
    id: u32,
}

impl Eq for Scored {}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hnsw {
    pub(crate) params: HnswParams,
    pub(crate) augmented: Matrix,
    /// per node, per level: neighbor ids
    pub(crate) links: Vec<Vec<Vec<u32>>>,
    pub(crate) entry: u32,
    pub(crate) max_level: usize,
}

pub(crate) fn augment(vectors: &Matrix) -> Matrix {
    let (n, d) = (vectors.rows(), vectors.cols());
    let sq: Vec<f64> = vectors.iter_rows().map(|r| crate::vecmath::dot(r, r)).collect();
    let r2 = sq.iter().copied().fold(0.0, f64::max);
    let mut out = Matrix::zeros(n, d + 1);
    for (i, &s) in sq.iter().enumerate() {
        let row = out.row_mut(i);
        row[..d].copy_from_slice(vectors.row(i));
        row[d] = (r2 - s).max(0.0).sqrt() as f32;
    }
    out
}

impl Hnsw {
    pub fn build(vectors: &Matrix, params: HnswParams) -> Self {
        let augmented = augment(vectors);
        let n = augmented.rows();
        let mut rng = rng::rng_for(params.seed, &[0x686e_7377]);
        let ml = 1.0 / (params.m.max(2) as f64).ln();
        let mut h = Hnsw {
            params,
            augmented,
            links: Vec::with_capacity(n),
            entry: 0,
            max_level: 0,
        };
        for i in 0..n {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let level = (-u.ln() * ml).floor() as usize;
            h.insert(i as u32, level);
        }
        h
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn params(&self) -> HnswParams {
        self.params
    }

    fn max_links(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.params.m
        } else {
            self.params.m
        }
    }

    fn dist_to(&self, q: &[f32], id: u32) -> f64 {
        sq_dist(q, self.augmented.row(id as usize))
    }

    fn insert(&mut self, id: u32, level: usize) {
        self.links.push(vec![Vec::new(); level + 1]);
        if id == 0 {
            self.entry = 0;
            self.max_level = level;
            return;
        }
        let q = self.augmented.row(id as usize).to_vec();
        let mut ep = Scored {
            dist: self.dist_to(&q, self.entry),
            id: self.entry,
        };
        for l in (level + 1..=self.max_level).rev() {
            ep = self.greedy(&q, ep, l);
        }
        let mut eps = vec![ep];
        for l in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(&q, &eps, self.params.ef_construction, l);
            let chosen = self.select(&found, self.params.m);
            self.links[id as usize][l] = chosen.iter().map(|s| s.id).collect();
            for s in &chosen {
                self.connect(s.id, id, l);
            }
            eps = found;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = id;
        }
    }

    fn connect(&mut self, from: u32, to: u32, level: usize) {
        let cap = self.max_links(level);
        let list = &mut self.links[from as usize][level];
        list.push(to);
        if list.len() <= cap {
            return;
        }
        let base = self.augmented.row(from as usize);
        let mut cands: Vec<Scored> = self.links[from as usize][level]
            .iter()
            .map(|&n| Scored {
                dist: sq_dist(base, self.augmented.row(n as usize)),
                id: n,
            })
            .collect();
        cands.sort();
        let kept = self.select(&cands, cap);
        self.links[from as usize][level] = kept.into_iter().map(|s| s.id).collect();
    }

    /// Diversity heuristic: keep a candidate only if it is closer to the base
    /// than to every already kept neighbor; top up with the closest rejects.
    fn select(&self, sorted: &[Scored], cap: usize) -> Vec<Scored> {
        let mut kept: Vec<Scored> = Vec::with_capacity(cap);
        let mut rejected = Vec::new();
        for &c in sorted {
            if kept.len() == cap {
                break;
            }
            let cv = self.augmented.row(c.id as usize);
            let diverse = kept
                .iter()
                .all(|k| sq_dist(cv, self.augmented.row(k.id as usize)) > c.dist);
            if diverse {
                kept.push(c);
            } else {
                rejected.push(c);
            }
        }
        for r in rejected {
            if kept.len() == cap {
                break;
            }
            kept.push(r);
        }
        kept
    }

    fn greedy(&self, q: &[f32], mut ep: Scored, level: usize) -> Scored {
        loop {
            let mut improved = false;
            for &n in &self.links[ep.id as usize][level] {
                let d = self.dist_to(q, n);
                if d < ep.dist || (d == ep.dist && n < ep.id) {
                    ep = Scored { dist: d, id: n };
                    improved = true;
                }
            }
            if !improved {
                return ep;
            }
        }
    }

    /// Best `ef` nodes reachable on `level`, ascending by distance.
    fn search_layer(&self, q: &[f32], eps: &[Scored], ef: usize, level: usize) -> Vec<Scored> {
        let mut visited = vec![false; self.links.len()];
        let mut frontier: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        let mut best: BinaryHeap<Scored> = BinaryHeap::new();
        for &e in eps {
            if !visited[e.id as usize] {
                visited[e.id as usize] = true;
                frontier.push(Reverse(e));
                best.push(e);
            }
        }
        while best.len() > ef {
            best.pop();
        }
        while let Some(Reverse(c)) = frontier.pop() {
            if best.len() >= ef && c.dist > best.peek().expect("nonempty").dist {
                break;
            }
            for &n in &self.links[c.id as usize][level] {
                if visited[n as usize] {
                    continue;
                }
                visited[n as usize] = true;
                let s = Scored {
                    dist: self.dist_to(q, n),
                    id: n,
                };
                if best.len() < ef || s < *best.peek().expect("nonempty") {
                    frontier.push(Reverse(s));
                    best.push(s);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    /// Candidate ids for a raw (unaugmented) query, nearest first.
    pub fn search(&self, query: &[f32], k: usize, ef: usize) -> Vec<u32> {
        if self.links.is_empty() {
            return Vec::new();
        }
        let mut q = query.to_vec();
        q.push(0.0);
        let mut ep = Scored {
            dist: self.dist_to(&q, self.entry),
            id: self.entry,
        };
        for l in (1..=self.max_level).rev() {
            ep = self.greedy(&q, ep, l);
        }
        let found = self.search_layer(&q, &[ep], ef.max(k), 0);
        found.into_iter().map(|s| s.id).collect()
    }
}
