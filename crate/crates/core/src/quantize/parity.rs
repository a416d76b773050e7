//! Downstream checks for compressed tables: neighbor retention and a
//! minimal logistic-regression scorer.

use crate::error::{Error, Result};
use crate::evalkit::roc_auc;
use crate::retrieval::{build_index, IndexKind};
use crate::trainer::sigmoid;
use crate::vecmath::Matrix;

/// Mean fraction of each query's exact top-`k` over `original` that the
/// exact top-`k` over `decoded` recovers.
pub fn knn_retention(original: &Matrix, decoded: &Matrix, queries: &Matrix, k: usize) -> Result<f64> {
    if original.rows() != decoded.rows() || original.cols() != decoded.cols() {
        return Err(Error::Shape("original and decoded tables differ in shape".into()));
    }
    if queries.rows() == 0 {
        return Err(Error::InvalidArgument("no queries".into()));
    }
    let truth = build_index(original.clone(), IndexKind::Exact)?;
    let approx = build_index(decoded.clone(), IndexKind::Exact)?;
    let mut total = 0.0;
    for q in queries.iter_rows() {
        let t = truth.query_topk(q, k)?.ids();
        let a = approx.query_topk(q, k)?.ids();
        total += a.iter().filter(|x| t.contains(x)).count() as f64 / t.len() as f64;
    }
    Ok(total / queries.rows() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearScorer {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearScorer {
    pub fn score(&self, x: &[f32]) -> f64 {
        self.weights.iter().zip(x).map(|(w, &v)| w * v as f64).sum::<f64>() + self.bias
    }

    pub fn scores(&self, table: &Matrix) -> Vec<f64> {
        table.iter_rows().map(|r| self.score(r)).collect()
    }

    pub fn auc(&self, table: &Matrix, labels: &[u8]) -> Result<f64> {
        roc_auc(&self.scores(table), labels)
    }
}

/// Full-batch gradient descent on the mean logistic loss.
pub fn fit_logistic(table: &Matrix, labels: &[u8], epochs: usize, learning_rate: f64) -> Result<LinearScorer> {
    if table.rows() != labels.len() || labels.is_empty() {
        return Err(Error::Shape(format!("{} rows, {} labels", table.rows(), labels.len())));
    }
    let d = table.cols();
    let n = labels.len() as f64;
    let mut s = LinearScorer {
        weights: vec![0.0; d],
        bias: 0.0,
    };
    for _ in 0..epochs {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (row, &y) in table.iter_rows().zip(labels) {
            let err = sigmoid(s.score(row)) - y as f64;
            for (g, &v) in gw.iter_mut().zip(row) {
                *g += err * v as f64;
            }
            gb += err;
        }
        for (w, g) in s.weights.iter_mut().zip(&gw) {
            *w -= learning_rate * g / n;
        }
        s.bias -= learning_rate * gb / n;
    }
    Ok(s)
}

/// ROC-AUC of a scorer fitted on `original`, evaluated on both tables.
pub fn scorer_parity(original: &Matrix, decoded: &Matrix, labels: &[u8], epochs: usize) -> Result<(f64, f64)> {
    let scorer = fit_logistic(original, labels, epochs, 1.0)?;
    Ok((scorer.auc(original, labels)?, scorer.auc(decoded, labels)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_data_reaches_full_auc() {
        let x = Matrix::from_rows(2, &[[1.0f32, 0.2], [0.9, -0.1], [-1.0, 0.3], [-0.8, 0.0]]);
        let y = [1u8, 1, 0, 0];
        let s = fit_logistic(&x, &y, 200, 1.0).unwrap();
        assert_eq!(s.auc(&x, &y).unwrap(), 1.0);
        assert!(s.weights[0] > 0.0);
    }

    #[test]
    fn identical_tables_retain_everything() {
        let x = Matrix::from_rows(2, &[[1.0f32, 0.0], [0.0, 1.0], [0.5, 0.5]]);
        assert_eq!(knn_retention(&x, &x, &x, 2).unwrap(), 1.0);
        assert!(scorer_parity(&x, &x, &[1, 0, 1], 10).map(|(a, b)| a == b).unwrap());
    }
}
