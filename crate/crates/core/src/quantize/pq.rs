//! Product quantization with one-byte codes.
//!
//! A `d`-wide table is cut into `M` contiguous blocks of `d/M` coordinates.
//! Each block gets its own codebook of up to 256 centroids trained with
//! k-means; a row is stored as the `M` indices of its nearest centroids.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mixture::{kmeans_with, KMeansConfig};
use crate::rng;
use crate::store::Checkpoint;
use crate::vecmath::{nearest_row, sq_dist, Matrix};

pub const CENTROIDS_PER_SUBQUANTIZER: usize = 256;
pub const DEFAULT_TRAIN_SAMPLE: usize = 4096;
pub const DEFAULT_TRAIN_ITERS: usize = 25;

const TABLE_PREFIX: &str = "pq_centroids_";
const CODES_MAGIC: [u8; 4] = *b"HPQC";
const CODES_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PqTrainConfig {
    pub num_subquantizers: usize,
    pub seed: u64,
    /// rows drawn (without replacement) to train on; all rows if the table is smaller
    pub sample_rows: usize,
    pub max_iters: usize,
}

impl PqTrainConfig {
    pub fn new(num_subquantizers: usize, seed: u64) -> Self {
        PqTrainConfig {
            num_subquantizers,
            seed,
            sample_rows: DEFAULT_TRAIN_SAMPLE,
            max_iters: DEFAULT_TRAIN_ITERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqCodebook {
    /// one `centroids × subdim` table per subquantizer
    pub centroids: Vec<Matrix>,
}

impl PqCodebook {
    pub fn num_subquantizers(&self) -> usize {
        self.centroids.len()
    }

    pub fn subdim(&self) -> usize {
        self.centroids[0].cols()
    }

    pub fn dim(&self) -> usize {
        self.num_subquantizers() * self.subdim()
    }

    /// Codebook size in bytes (f32 centroids).
    pub fn bytes(&self) -> usize {
        self.centroids.iter().map(|c| c.rows() * c.cols() * 4).sum()
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(self.subdim());
        for (m, c) in self.centroids.iter().enumerate() {
            ck.push(format!("{TABLE_PREFIX}{m}"), c.clone())?;
        }
        Ok(ck)
    }

    pub fn from_checkpoint(mut ck: Checkpoint) -> Result<Self> {
        let mut centroids = Vec::new();
        while let Some(t) = ck.take(&format!("{TABLE_PREFIX}{}", centroids.len())) {
            if t.rows() == 0 || t.rows() > CENTROIDS_PER_SUBQUANTIZER {
                return Err(Error::Checkpoint(format!(
                    "subquantizer {} has {} centroids",
                    centroids.len(),
                    t.rows()
                )));
            }
            centroids.push(t);
        }
        if centroids.is_empty() {
            return Err(Error::Checkpoint(format!("no {TABLE_PREFIX}* tables")));
        }
        if let Some((name, _)) = ck.tables.first() {
            return Err(Error::Checkpoint(format!("unexpected table {name} in codebook")));
        }
        Ok(PqCodebook { centroids })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PqCodes {
    pub num_subquantizers: usize,
    pub rows: usize,
    /// row-major, `num_subquantizers` bytes per row
    pub codes: Vec<u8>,
}

impl PqCodes {
    pub fn row(&self, i: usize) -> &[u8] {
        &self.codes[i * self.num_subquantizers..(i + 1) * self.num_subquantizers]
    }

    /// Layout: magic `HPQC`, version u32, M u32, rows u64, then the raw codes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(20 + self.codes.len());
        b.extend_from_slice(&CODES_MAGIC);
        b.extend_from_slice(&CODES_VERSION.to_le_bytes());
        b.extend_from_slice(&(self.num_subquantizers as u32).to_le_bytes());
        b.extend_from_slice(&(self.rows as u64).to_le_bytes());
        b.extend_from_slice(&self.codes);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 {
            return Err(Error::Truncated {
                expected: 20,
                found: bytes.len() as u64,
            });
        }
        if bytes[..4] != CODES_MAGIC {
            return Err(Error::Checkpoint("not a PQ codes file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CODES_VERSION {
            return Err(Error::Checkpoint(format!("unsupported codes version {version}")));
        }
        let m = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let rows = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let expected = (rows as u128) * m as u128 + 20;
        if (bytes.len() as u128) < expected {
            return Err(Error::Truncated {
                expected: expected.min(u64::MAX as u128) as u64,
                found: bytes.len() as u64,
            });
        }
        if (bytes.len() as u128) > expected {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() as u128 - expected)));
        }
        Ok(PqCodes {
            num_subquantizers: m,
            rows: rows as usize,
            codes: bytes[20..].to_vec(),
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

pub fn train_codebook(table: &Matrix, num_subquantizers: usize, seed: u64) -> Result<PqCodebook> {
    train_codebook_with(table, &PqTrainConfig::new(num_subquantizers, seed))
}

pub fn train_codebook_with(table: &Matrix, cfg: &PqTrainConfig) -> Result<PqCodebook> {
    let (n, d, m) = (table.rows(), table.cols(), cfg.num_subquantizers);
    if m == 0 || d % m != 0 {
        return Err(Error::InvalidArgument(format!("{m} subquantizers do not divide dimension {d}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("cannot train a codebook on an empty table".into()));
    }
    let sample = if n > cfg.sample_rows {
        let mut rng = rng::rng_for(cfg.seed, &[0x7071_7361]);
        let mut picked = rand::seq::index::sample(&mut rng, n, cfg.sample_rows).into_vec();
        picked.sort_unstable();
        table.select_rows(&picked)
    } else {
        table.clone()
    };
    let sub = d / m;
    let k = CENTROIDS_PER_SUBQUANTIZER.min(sample.rows());
    let centroids = (0..m)
        .into_par_iter()
        .map(|j| {
            let block = sample.column_block(j * sub, sub);
            let kcfg = KMeansConfig {
                k,
                seed: rng::derive(cfg.seed, &[j as u64]),
                max_iters: cfg.max_iters,
                batch_size: None,
                tolerance: 1e-6,
            };
            kmeans_with(&block, &kcfg).map(|model| model.centroids)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PqCodebook { centroids })
}

fn check_width(table: &Matrix, cb: &PqCodebook) -> Result<()> {
    if table.cols() != cb.dim() {
        return Err(Error::Shape(format!("table width {} vs codebook dim {}", table.cols(), cb.dim())));
    }
    Ok(())
}

/// Nearest centroid per subspace (squared L2, ties to the lower code).
pub fn encode(table: &Matrix, cb: &PqCodebook) -> Result<PqCodes> {
    check_width(table, cb)?;
    let (m, sub) = (cb.num_subquantizers(), cb.subdim());
    let codes: Vec<u8> = (0..table.rows())
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = table.row(i);
            (0..m).map(move |j| nearest_row(&cb.centroids[j], &row[j * sub..(j + 1) * sub]).0 as u8)
        })
        .collect();
    Ok(PqCodes {
        num_subquantizers: m,
        rows: table.rows(),
        codes,
    })
}

pub fn decode(codes: &PqCodes, cb: &PqCodebook) -> Result<Matrix> {
    let (m, sub) = (cb.num_subquantizers(), cb.subdim());
    if codes.num_subquantizers != m || codes.codes.len() != codes.rows * m {
        return Err(Error::Shape(format!(
            "codes have {} subquantizers, codebook {m}",
            codes.num_subquantizers
        )));
    }
    let mut out = Matrix::zeros(codes.rows, m * sub);
    for i in 0..codes.rows {
        let row = out.row_mut(i);
        for (j, &c) in codes.row(i).iter().enumerate() {
            let table = &cb.centroids[j];
            if c as usize >= table.rows() {
                return Err(Error::OutOfBounds {
                    entity: format!("row {i}"),
                    detail: format!("code {c} in subquantizer {j} has only {} centroids", table.rows()),
                });
            }
            row[j * sub..(j + 1) * sub].copy_from_slice(table.row(c as usize));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub dim: usize,
    pub num_subquantizers: usize,
    pub rows: usize,
    /// `4·d / M`: bytes per original row over bytes per code row
    pub factor: f64,
    pub codebook_bytes: usize,
    /// factor once the codebook is charged to the table
    pub amortized_factor: f64,
    /// mean over rows of `‖x − x̂‖²`
    pub mse: f64,
    /// per-row `‖x − x̂‖`
    pub row_errors: Vec<f64>,
    pub max_row_error: f64,
}

pub fn compression_report(table: &Matrix, cb: &PqCodebook) -> Result<CompressionReport> {
    let decoded = decode(&encode(table, cb)?, cb)?;
    let sq: Vec<f64> = table
        .iter_rows()
        .zip(decoded.iter_rows())
        .map(|(a, b)| sq_dist(a, b))
        .collect();
    let rows = table.rows();
    let (d, m) = (cb.dim(), cb.num_subquantizers());
    let raw = (rows * d * 4) as f64;
    let row_errors: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
    Ok(CompressionReport {
        dim: d,
        num_subquantizers: m,
        rows,
        factor: (d * 4) as f64 / m as f64,
        codebook_bytes: cb.bytes(),
        amortized_factor: raw / (rows * m + cb.bytes()) as f64,
        mse: if rows == 0 { 0.0 } else { sq.iter().sum::<f64>() / rows as f64 },
        max_row_error: row_errors.iter().copied().fold(0.0, f64::max),
        row_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn random(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = rng::rng_for(seed, &[]);
        Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
    }

    #[test]
    fn shapes() {
        let cb = train_codebook(&random(300, 8, 1), 2, 0).unwrap();
        assert_eq!(cb.num_subquantizers(), 2);
        assert_eq!(cb.subdim(), 4);
        assert_eq!(cb.centroids[0].rows(), 256);
        let small = train_codebook(&random(10, 8, 1), 4, 0).unwrap();
        assert_eq!(small.centroids[0].rows(), 10);
        assert!(train_codebook(&random(10, 8, 1), 3, 0).is_err());
    }

    #[test]
    fn representable_table_has_zero_error() {
        let base = random(256, 8, 2);
        let idx: Vec<usize> = (0..1024).map(|i| (i * 7) % 256).collect();
        let table = base.select_rows(&idx);
        let cb = train_codebook(&table, 2, 3).unwrap();
        let rep = compression_report(&table, &cb).unwrap();
        assert_eq!(rep.mse, 0.0);
        assert_eq!(rep.max_row_error, 0.0);
    }

    #[test]
    fn centroid_fixed_point() {
        let cb = train_codebook(&random(400, 4, 4), 2, 1).unwrap();
        let mut row = cb.centroids[0].row(3).to_vec();
        row.extend_from_slice(cb.centroids[1].row(7));
        let t = Matrix::from_vec(1, 4, row.clone());
        let codes = encode(&t, &cb).unwrap();
        assert_eq!(codes.row(0), &[3, 7]);
        assert_eq!(decode(&codes, &cb).unwrap().row(0), row.as_slice());
    }

    #[test]
    fn pq_beats_one_global_quantizer() {
        let t = random(2000, 8, 5);
        let pq = compression_report(&t, &train_codebook(&t, 4, 0).unwrap()).unwrap();
        let global = compression_report(&t, &train_codebook(&t, 1, 0).unwrap()).unwrap();
        assert!(pq.mse <= global.mse, "{} vs {}", pq.mse, global.mse);
    }

    #[test]
    fn factor_arithmetic() {
        let t = random(300, 64, 6);
        let cb = train_codebook(&t, 8, 0).unwrap();
        let rep = compression_report(&t, &cb).unwrap();
        assert_eq!(rep.factor, 32.0);
        assert_eq!(encode(&t, &cb).unwrap().row(0).len(), 8);
        assert_eq!(rep.codebook_bytes, 8 * 256 * 8 * 4);
    }

    #[test]
    fn mse_is_sum_of_subspace_errors() {
        let t = random(500, 6, 7);
        let cb = train_codebook(&t, 3, 0).unwrap();
        let rep = compression_report(&t, &cb).unwrap();
        let mut total = 0.0;
        for j in 0..3 {
            let block = t.column_block(j * 2, 2);
            for r in block.iter_rows() {
                let best = cb.centroids[j]
                    .iter_rows()
                    .map(|c| {
                        c.iter()
                            .zip(r)
                            .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                total += best;
            }
        }
        assert!((rep.mse - total / 500.0).abs() < 1e-9);
    }

    #[test]
    fn bad_codes_are_rejected() {
        let t = random(5, 4, 8);
        let cb = train_codebook(&t, 2, 0).unwrap();
        let codes = PqCodes {
            num_subquantizers: 2,
            rows: 1,
            codes: vec![0, 9],
        };
        assert!(matches!(decode(&codes, &cb), Err(Error::OutOfBounds { .. })));
        let bytes = encode(&t, &cb).unwrap().to_bytes();
        assert!(matches!(PqCodes::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
        assert_eq!(PqCodes::from_bytes(&bytes).unwrap(), encode(&t, &cb).unwrap());
    }

    #[test]
    fn codebook_checkpoint_round_trip() {
        let t = random(300, 8, 9);
        let cb = train_codebook(&t, 4, 0).unwrap();
        assert_eq!(PqCodebook::from_checkpoint(cb.to_checkpoint().unwrap()).unwrap(), cb);
    }

    #[test]
    fn deterministic_per_seed() {
        let t = random(600, 8, 10);
        assert_eq!(train_codebook(&t, 2, 4).unwrap(), train_codebook(&t, 2, 4).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn encode_decode_is_idempotent(seed in 0u64..1000) {
            let t = random(80, 6, seed);
            let cb = train_codebook(&random(300, 6, seed + 1), 3, seed).unwrap();
            let codes = encode(&t, &cb).unwrap();
            let again = encode(&decode(&codes, &cb).unwrap(), &cb).unwrap();
            prop_assert_eq!(codes, again);
        }
    }
}
