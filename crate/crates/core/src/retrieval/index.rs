//! Inner-product index over one entity type.
//!
//! Exact mode scans every row with `f64` dot products. Approximate mode
//! gathers candidates from an [`Hnsw`] graph and re-scores them exactly.
//! Results are ordered by descending score, ties to the lower row id.

use std::fs;
use std::path::{Path, PathBuf};

use super::hnsw::{Hnsw, HnswParams};
use crate::error::{Error, Result};
use crate::vecmath::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IndexKind {
    Exact,
    Hnsw(HnswParams),
}

impl Default for IndexKind {
    fn default() -> Self {
        IndexKind::Hnsw(HnswParams::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// row in the index
    pub id: u32,
    pub score: f64,
    /// mixture component that produced the item; 0 for single queries
    pub component: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateList {
    pub items: Vec<Candidate>,
}

impl CandidateList {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.items.iter().map(|c| c.id).collect()
    }

    /// Items re-ordered by descending score across components.
    pub fn by_score(&self) -> Vec<Candidate> {
        let mut v = self.items.clone();
        v.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnIndex {
    entity_type: String,
    ids: Vec<String>,
    vectors: Matrix,
    graph: Option<Hnsw>,
    /// checkpoint the vectors came from, if any
    source: Option<PathBuf>,
}

pub fn build_index(vectors: Matrix, kind: IndexKind) -> Result<AnnIndex> {
    let ids = (0..vectors.rows()).map(|i| i.to_string()).collect();
    AnnIndex::build("item", ids, vectors, kind)
}

impl AnnIndex {
    pub fn build(entity_type: &str, ids: Vec<String>, vectors: Matrix, kind: IndexKind) -> Result<Self> {
        if vectors.rows() == 0 {
            return Err(Error::InvalidArgument("cannot index an empty vector set".into()));
        }
        if vectors.cols() == 0 {
            return Err(Error::Shape("zero-width vectors".into()));
        }
        if ids.len() != vectors.rows() {
            return Err(Error::Shape(format!("{} ids for {} vectors", ids.len(), vectors.rows())));
        }
        if !vectors.all_finite() {
            return Err(Error::InvalidArgument("index vectors must be finite".into()));
        }
        let graph = match kind {
            IndexKind::Exact => None,
            IndexKind::Hnsw(p) => {
                if p.m < 2 || p.ef_construction == 0 || p.ef_search == 0 {
                    return Err(Error::InvalidArgument("HNSW needs m >= 2 and positive ef".into()));
                }
                Some(Hnsw::build(&vectors, p))
            }
        };
        Ok(AnnIndex {
            entity_type: entity_type.to_string(),
            ids,
            vectors,
            graph,
            source: None,
        })
    }

    pub fn with_source(mut self, path: impl Into<PathBuf>) -> Self {
        self.source = Some(path.into());
        self
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn entity_type(&self) -> &str {
        &self.entity_type
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn kind(&self) -> IndexKind {
        match &self.graph {
            None => IndexKind::Exact,
            Some(h) => IndexKind::Hnsw(h.params()),
        }
    }

    pub fn external_id(&self, id: u32) -> &str {
        &self.ids[id as usize]
    }

    pub fn position(&self, external: &str) -> Option<u32> {
        self.ids.iter().position(|i| i == external).map(|p| p as u32)
    }

    pub fn vector(&self, id: u32) -> &[f32] {
        self.vectors.row(id as usize)
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    /// Top `k` by inner product with `query`, descending.
    pub fn query_topk(&self, query: &[f32], k: usize) -> Result<CandidateList> {
        self.query_with_ef(query, k, None)
    }

    /// As [`query_topk`](Self::query_topk) with an explicit HNSW search breadth.
    pub fn query_with_ef(&self, query: &[f32], k: usize, ef: Option<usize>) -> Result<CandidateList> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if query.len() != self.dim() {
            return Err(Error::Shape(format!("query dim {} vs index dim {}", query.len(), self.dim())));
        }
        let mut scored: Vec<Candidate> = match &self.graph {
            None => (0..self.len() as u32).map(|i| self.candidate(query, i)).collect(),
            Some(h) => h
                .search(query, k, ef.unwrap_or(h.params().ef_search))
                .into_iter()
                .map(|i| self.candidate(query, i))
                .collect(),
        };
        let cmp = |a: &Candidate, b: &Candidate| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id));
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_by(cmp);
        Ok(CandidateList { items: scored })
    }

    fn candidate(&self, query: &[f32], id: u32) -> Candidate {
        Candidate {
            id,
            score: dot(query, self.vectors.row(id as usize)),
            component: 0,
        }
    }
}

pub fn query_topk(index: &AnnIndex, query: &[f32], k: usize) -> Result<CandidateList> {
    index.query_topk(query, k)
}

/// `query + θ_r`, the translated query that scores items as `(θ_u + θ_r)·θ_i`.
pub fn translate_query(query: &[f32], relation: &[f32]) -> Vec<f32> {
    query.iter().zip(relation).map(|(a, b)| a + b).collect()
}

const INDEX_MAGIC: [u8; 4] = *b"HIDX";
const INDEX_VERSION: u32 = 1;

/// Binary index file, little-endian:
/// magic `HIDX`, version u32, kind u8 (0 exact, 1 hnsw), entity type,
/// source path (empty if none), row count u64, dim u32, ids, f32 rows, then
/// for hnsw: m, ef_construction, ef_search as u32, seed u64, entry u32,
/// max level u32, and per node its level count and neighbor lists.
/// Strings are u32 length plus UTF-8 bytes.
impl AnnIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&INDEX_MAGIC);
        put_u32(&mut b, INDEX_VERSION);
        b.push(u8::from(self.graph.is_some()));
        put_str(&mut b, &self.entity_type);
        put_str(&mut b, &self.source.as_ref().map(|p| p.to_string_lossy().into_owned()).unwrap_or_default());
        b.extend_from_slice(&(self.len() as u64).to_le_bytes());
        put_u32(&mut b, self.dim() as u32);
        for id in &self.ids {
            put_str(&mut b, id);
        }
        for v in self.vectors.as_slice() {
            b.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(h) = &self.graph {
            let p = h.params();
            for v in [p.m, p.ef_construction, p.ef_search] {
                put_u32(&mut b, v as u32);
            }
            b.extend_from_slice(&p.seed.to_le_bytes());
            put_u32(&mut b, h.entry);
            put_u32(&mut b, h.max_level as u32);
            for node in &h.links {
                put_u32(&mut b, node.len() as u32);
                for list in node {
                    put_u32(&mut b, list.len() as u32);
                    for &n in list {
                        put_u32(&mut b, n);
                    }
                }
            }
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != INDEX_MAGIC {
            return Err(Error::Checkpoint("not an index file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != INDEX_VERSION {
            return Err(Error::Checkpoint(format!("unsupported index version {version}")));
        }
        let kind = r.take(1)?[0];
        let entity_type = r.string()?;
        let source = r.string()?;
        let rows = r.u64()? as usize;
        let dim = r.u32()? as usize;
        let ids = (0..rows).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let raw = r.take(rows.checked_mul(dim).and_then(|n| n.checked_mul(4)).ok_or_else(|| {
            Error::Checkpoint("index size overflows".into())
        })?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let vectors = Matrix::from_vec(rows, dim, data);
        let graph = match kind {
            0 => None,
            1 => {
                let params = HnswParams {
                    m: r.u32()? as usize,
                    ef_construction: r.u32()? as usize,
                    ef_search: r.u32()? as usize,
                    seed: r.u64()?,
                };
                let entry = r.u32()?;
                let max_level = r.u32()? as usize;
                let mut links = Vec::with_capacity(rows);
                for _ in 0..rows {
                    let levels = r.u32()? as usize;
                    let mut node = Vec::with_capacity(levels.min(64));
                    for _ in 0..levels {
                        let n = r.u32()? as usize;
                        let list = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                        if list.iter().any(|&x| x as usize >= rows) {
                            return Err(Error::Checkpoint("index link out of range".into()));
                        }
                        node.push(list);
                    }
                    links.push(node);
                }
                if rows > 0 && (entry as usize >= rows || links[entry as usize].len() != max_level + 1) {
                    return Err(Error::Checkpoint("inconsistent index entry point".into()));
                }
                Some(Hnsw {
                    params,
                    augmented: super::hnsw::augment(&vectors),
                    links,
                    entry,
                    max_level,
                })
            }
            k => return Err(Error::Checkpoint(format!("unknown index kind {k}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes in index", bytes.len() - r.pos)));
        }
        Ok(AnnIndex {
            entity_type,
            ids,
            vectors,
            graph,
            source: (!source.is_empty()).then(|| PathBuf::from(source)),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_u32(b: &mut Vec<u8>, v: u32) {
    b.extend_from_slice(&v.to_le_bytes());
}

fn put_str(b: &mut Vec<u8>, s: &str) {
    put_u32(b, s.len() as u32);
    b.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(Error::Truncated {
            expected: self.pos.saturating_add(n) as u64,
            found: self.bytes.len() as u64,
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8 in index".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn random(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = rng::rng_for(seed, &[]);
        Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
    }

    fn brute(v: &Matrix, q: &[f32], k: usize) -> Vec<u32> {
        let mut s: Vec<(f64, u32)> = v
            .iter_rows()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q).map(|(&a, &b)| a as f64 * b as f64).sum(), i as u32))
            .collect();
        s.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        s.into_iter().take(k).map(|p| p.1).collect()
    }

    #[test]
    fn exact_self_query_on_normalized_set_ranks_self_first() {
        let mut v = random(100, 8, 1);
        for i in 0..100 {
            let n = crate::vecmath::norm(v.row(i)) as f32;
            v.row_mut(i).iter_mut().for_each(|x| *x /= n);
        }
        let idx = build_index(v.clone(), IndexKind::Exact).unwrap();
        for i in 0..100u32 {
            assert_eq!(idx.query_topk(v.row(i as usize), 1).unwrap().items[0].id, i);
        }
    }

    #[test]
    fn k_beyond_size_returns_everything_descending() {
        let v = random(7, 3, 2);
        let idx = build_index(v.clone(), IndexKind::Exact).unwrap();
        let res = idx.query_topk(&[1.0, 0.0, 0.0], 50).unwrap();
        assert_eq!(res.len(), 7);
        assert!(res.items.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(idx.query_topk(&[1.0, 0.0, 0.0], 0).is_err());
        assert!(idx.query_topk(&[1.0, 0.0], 3).is_err());
        assert!(build_index(Matrix::zeros(0, 3), IndexKind::Exact).is_err());
    }

    #[test]
    fn duplicates_are_both_retrievable() {
        let v = Matrix::from_rows(2, &[[1.0f32, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        for kind in [IndexKind::Exact, IndexKind::default()] {
            let idx = build_index(v.clone(), kind).unwrap();
            assert_eq!(idx.query_topk(&[1.0, 0.0], 2).unwrap().ids(), vec![0, 2]);
        }
    }

    #[test]
    fn hnsw_recall_on_small_random_set() {
        let v = random(2000, 16, 3);
        let idx = build_index(v.clone(), IndexKind::default()).unwrap();
        let qs = random(100, 16, 4);
        let mut hits = 0;
        for q in qs.iter_rows() {
            let truth = brute(&v, q, 10);
            let got = idx.query_topk(q, 10).unwrap().ids();
            hits += got.iter().filter(|g| truth.contains(g)).count();
        }
        assert!(hits as f64 / 1000.0 >= 0.95, "{hits}");
    }

    #[test]
    fn file_round_trip_and_truncation() {
        let v = random(300, 5, 5);
        for kind in [IndexKind::Exact, IndexKind::default()] {
            let idx = AnnIndex::build("tweet", (0..300).map(|i| format!("t{i}")).collect(), v.clone(), kind)
                .unwrap()
                .with_source("model.ckpt");
            let bytes = idx.to_bytes();
            let back = AnnIndex::from_bytes(&bytes).unwrap();
            assert_eq!(back, idx);
            assert_eq!(back.position("t17"), Some(17));
            assert!(matches!(AnnIndex::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Truncated { .. })));
        }
    }

    proptest! {
        #[test]
        fn exact_matches_brute_force(seed in 0u64..500, k in 1usize..20) {
            let v = random(60, 4, seed);
            let q = random(1, 4, seed + 10_000);
            let idx = build_index(v.clone(), IndexKind::Exact).unwrap();
            prop_assert_eq!(idx.query_topk(q.row(0), k).unwrap().ids(), brute(&v, q.row(0), k));
        }
    }
}
