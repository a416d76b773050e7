//! Mixture multi-querying.

use std::collections::{HashMap, HashSet};

use super::index::{AnnIndex, Candidate, CandidateList};
use crate::error::{Error, Result};
use crate::mixture::MixtureRepresentation;

/// Split `total` slots over `weights` by largest remainder. Each share is
/// within one of `w·total`; leftover slots go to the largest fractional
/// parts, ties to the earlier weight.
pub fn allocate(weights: &[f64], total: usize) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument("no weights to allocate over".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidArgument("weights sum to zero".into()));
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut shares: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = shares.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        shares[i] += 1;
    }
    Ok(shares)
}

/// Query each component's centroid for its share of `total` candidates and
/// merge. An item found by several components keeps its best score; the
/// result lists components in mixture order, each by descending score.
pub fn multi_query(index: &AnnIndex, mixture: &MixtureRepresentation, total: usize) -> Result<CandidateList> {
    multi_query_excluding(index, mixture, total, &HashSet::new())
}

/// [`multi_query`] where rows in `exclude` (items the entity has already
/// engaged with, say) never take a slot.
pub fn multi_query_excluding(
    index: &AnnIndex,
    mixture: &MixtureRepresentation,
    total: usize,
    exclude: &HashSet<u32>,
) -> Result<CandidateList> {
    if mixture.is_empty() {
        return Err(Error::InvalidArgument("empty mixture".into()));
    }
    if total < mixture.len() {
        return Err(Error::InvalidArgument(format!(
            "K = {total} is smaller than the {} mixture components",
            mixture.len()
        )));
    }
    let shares = allocate(&mixture.weights(), total)?;
    let mut best: HashMap<u32, Candidate> = HashMap::new();
    for (c, (comp, &share)) in mixture.components.iter().zip(&shares).enumerate() {
        if share == 0 {
            continue;
        }
        let found = index.query_topk(&comp.centroid, share + exclude.len())?.items;
        for mut cand in found.into_iter().filter(|c| !exclude.contains(&c.id)).take(share) {
            cand.component = c;
            best.entry(cand.id)
                .and_modify(|held| {
                    if cand.score > held.score {
                        *held = cand;
                    }
                })
                .or_insert(cand);
        }
    }
    let mut items: Vec<Candidate> = best.into_values().collect();
    items.sort_by(|a, b| {
        a.component
            .cmp(&b.component)
            .then(b.score.total_cmp(&a.score))
            .then(a.id.cmp(&b.id))
    });
    Ok(CandidateList { items })
}
