use std::collections::HashSet;
use std::hash::Hash;

use crate::error::{Error, Result};

/// One query's ranked candidates and its held-out positives.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedQuery<T: Eq + Hash> {
    pub ranked: Vec<T>,
    pub positives: HashSet<T>,
}

impl<T: Eq + Hash> RankedQuery<T> {
    pub fn new(ranked: Vec<T>, positives: impl IntoIterator<Item = T>) -> Self {
        RankedQuery {
            ranked,
            positives: positives.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub value: f64,
    /// queries that contributed to `value`
    pub queries: usize,
    /// queries skipped because they had no positives
    pub excluded: usize,
}

/// `|top-k ∩ positives| / |positives|`, or `None` without positives.
pub fn recall_at_k_single<T: Eq + Hash>(ranked: &[T], positives: &HashSet<T>, k: usize) -> Option<f64> {
    if positives.is_empty() {
        return None;
    }
    let mut seen = HashSet::new();
    let hits = ranked
        .iter()
        .take(k)
        .filter(|x| positives.contains(*x) && seen.insert(*x))
        .count();
    Some(hits as f64 / positives.len() as f64)
}

pub fn recall_at_k<T: Eq + Hash>(queries: &[RankedQuery<T>], k: usize) -> Result<MetricSummary> {
    if k == 0 {
        return Err(Error::Eval("k must be at least 1".into()));
    }
    let mut sum = 0.0;
    let mut n = 0;
    for q in queries {
        if let Some(r) = recall_at_k_single(&q.ranked, &q.positives, k) {
            sum += r;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Eval("no query has held-out positives".into()));
    }
    Ok(MetricSummary {
        value: sum / n as f64,
        queries: n,
        excluded: queries.len() - n,
    })
}

/// `1 / rank` of the first positive, 0 when none is retrieved.
pub fn reciprocal_rank<T: Eq + Hash>(ranked: &[T], positives: &HashSet<T>) -> f64 {
    ranked
        .iter()
        .position(|x| positives.contains(x))
        .map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

pub fn mrr<T: Eq + Hash>(queries: &[RankedQuery<T>]) -> Result<MetricSummary> {
    if queries.is_empty() {
        return Err(Error::Eval("empty query set".into()));
    }
    let sum: f64 = queries.iter().map(|q| reciprocal_rank(&q.ranked, &q.positives)).sum();
    Ok(MetricSummary {
        value: sum / queries.len() as f64,
        queries: queries.len(),
        excluded: 0,
    })
}

pub const CE_CLIP: f64 = 1e-9;

/// Binary labels and predicted probabilities; the prior is the label mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RceInput {
    pub labels: Vec<u8>,
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RceResult {
    pub rce: f64,
    pub cross_entropy: f64,
    pub reference_cross_entropy: f64,
    pub prior: f64,
    /// predictions moved into `[1e-9, 1 - 1e-9]`
    pub clipped: usize,
}

impl RceInput {
    pub fn new(labels: Vec<u8>, predictions: Vec<f64>) -> Self {
        RceInput { labels, predictions }
    }

    pub fn prior(&self) -> f64 {
        self.labels.iter().map(|&l| l as f64).sum::<f64>() / self.labels.len() as f64
    }
}

fn bce(label: u8, p: f64) -> f64 {
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// `100 × (refCE − CE) / refCE` where `refCE` is the cross entropy of the
/// constant prior predictor.
pub fn rce(input: &RceInput) -> Result<RceResult> {
    let n = input.labels.len();
    if n == 0 || n != input.predictions.len() {
        return Err(Error::Eval(format!(
            "need equally many labels and predictions, got {} and {}",
            n,
            input.predictions.len()
        )));
    }
    if input.labels.iter().any(|&l| l > 1) {
        return Err(Error::Eval("labels must be 0 or 1".into()));
    }
    if input.predictions.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Eval("predictions must lie in [0, 1]".into()));
    }
    let prior = input.prior();
    if prior <= 0.0 || prior >= 1.0 {
        return Err(Error::Eval(format!("degenerate label set, prior = {prior}")));
    }
    let mut clipped = 0;
    let mut ce = 0.0;
    let mut refce = 0.0;
    for (&y, &p) in input.labels.iter().zip(&input.predictions) {
        let q = p.clamp(CE_CLIP, 1.0 - CE_CLIP);
        if q != p {
            clipped += 1;
        }
        ce += bce(y, q);
        refce += bce(y, prior);
    }
    ce /= n as f64;
    refce /= n as f64;
    Ok(RceResult {
        rce: 100.0 * (refce - ce) / refce,
        cross_entropy: ce,
        reference_cross_entropy: refce,
        prior,
        clipped,
    })
}

/// Area under the ROC curve; tied scores get averaged ranks.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Eval("scores and labels differ in length".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Eval("AUC needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] == 1 {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recall_examples() {
        let pos: HashSet<u32> = [7].into();
        assert_eq!(recall_at_k_single(&[7, 1, 2], &pos, 10), Some(1.0));
        let pos: HashSet<u32> = [7, 8].into();
        let ranked: Vec<u32> = (0..8).chain(std::iter::once(99)).chain([7]).chain([8]).collect();
        assert_eq!(recall_at_k_single(&ranked, &pos, 10), Some(0.5));
        assert_eq!(recall_at_k_single(&ranked, &HashSet::new(), 10), None);
    }

    #[test]
    fn recall_excludes_queries_without_positives() {
        let qs = vec![RankedQuery::new(vec![1u32, 2], [1]), RankedQuery::new(vec![1u32], [])];
        let s = recall_at_k(&qs, 1).unwrap();
        assert_eq!((s.value, s.queries, s.excluded), (1.0, 1, 1));
        assert!(recall_at_k(&qs, 0).is_err());
    }

    #[test]
    fn mrr_examples() {
        let qs = vec![RankedQuery::new(vec![5u32, 6, 7, 8], [8])];
        assert_eq!(mrr(&qs).unwrap().value, 0.25);
        let qs = vec![RankedQuery::new(vec![1u32], [1]), RankedQuery::new(vec![2u32, 3], [2])];
        assert_eq!(mrr(&qs).unwrap().value, 1.0);
        let qs = vec![RankedQuery::new(vec![1u32], [9])];
        assert_eq!(mrr(&qs).unwrap().value, 0.0);
        assert!(mrr::<u32>(&[]).is_err());
    }

    #[test]
    fn rce_errors() {
        assert!(rce(&RceInput::new(vec![1, 1], vec![0.5, 0.5])).is_err());
        assert!(rce(&RceInput::new(vec![0, 0], vec![0.5, 0.5])).is_err());
        assert!(rce(&RceInput::new(vec![0, 1], vec![0.5])).is_err());
        assert!(rce(&RceInput::new(vec![0, 2], vec![0.5, 0.5])).is_err());
    }

    #[test]
    fn auc_basics() {
        assert_eq!(roc_auc(&[0.1, 0.9], &[0, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.1], &[0, 1]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5, 0.5], &[0, 1]).unwrap(), 0.5);
        assert!(roc_auc(&[0.5], &[1]).is_err());
    }
}
