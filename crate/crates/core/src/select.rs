//! Per-cluster sentence selection and the final union.
//!
//! Every method ranks candidate sentences by a key in descending order and
//! breaks ties by the smaller sentence index. When fewer than `k` sentences
//! qualify, the selection is short and flagged rather than padded.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::config::Method;
use crate::error::{LbeeError, Result};
use crate::similarity::candidate_set;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSelection {
    pub hard_cluster: usize,
    /// Sentence indices, best first.
    pub retained: Vec<usize>,
    /// Ranking key of each retained sentence (similarity or difference).
    pub keys: Vec<f64>,
    /// Fewer than `k` sentences could be retained.
    pub shortfall: bool,
}

impl ClusterSelection {
    fn ranked(hard_cluster: usize, key: &[f64], allowed: impl Fn(usize) -> bool, k: usize) -> Self {
        let mut order: Vec<usize> = (0..key.len()).filter(|&n| allowed(n)).collect();
        order.sort_by(|&x, &y| key[y].total_cmp(&key[x]).then(x.cmp(&y)));
        order.truncate(k);
        Self {
            hard_cluster,
            keys: order.iter().map(|&n| key[n]).collect(),
            shortfall: order.len() < k,
            retained: order,
        }
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(LbeeError::InvalidArgument("k must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn check_lengths(v_h: &[f64], v_e: &[f64]) -> Result<()> {
    if v_h.len() != v_e.len() {
        Err(LbeeError::LengthMismatch {
            left: v_h.len(),
            right: v_e.len(),
        })
    } else {
        Ok(())
    }
}

fn difference(v_h: &[f64], v_e: &[f64]) -> Vec<f64> {
    v_h.iter().zip(v_e).map(|(h, e)| h - e).collect()
}

/// The `k` sentences most similar to the hard prototype.
pub fn top_s(hard_cluster: usize, v_h: &[f64], k: usize) -> Result<ClusterSelection> {
    check_k(k)?;
    Ok(ClusterSelection::ranked(hard_cluster, v_h, |_| true, k))
}

/// The `k` sentences most similar to the hard prototype among those whose
/// similarity to the matched easy prototype is below `tau`.
pub fn set_diff(hard_cluster: usize, v_h: &[f64], v_e: &[f64], k: usize, tau: f64) -> Result<ClusterSelection> {
    check_k(k)?;
    check_lengths(v_h, v_e)?;
    let excluded: BTreeSet<usize> = candidate_set(v_e, tau).into_iter().collect();
    Ok(ClusterSelection::ranked(hard_cluster, v_h, |n| !excluded.contains(&n), k))
}

/// The `k` sentences with the largest `v_h - v_e`.
pub fn p_diff(hard_cluster: usize, v_h: &[f64], v_e: &[f64], k: usize) -> Result<ClusterSelection> {
    check_k(k)?;
    check_lengths(v_h, v_e)?;
    Ok(ClusterSelection::ranked(hard_cluster, &difference(v_h, v_e), |_| true, k))
}

/// [`p_diff`] restricted to sentences with `v_h >= tau`.
pub fn fp_diff(hard_cluster: usize, v_h: &[f64], v_e: &[f64], k: usize, tau: f64) -> Result<ClusterSelection> {
    check_k(k)?;
    check_lengths(v_h, v_e)?;
    let d = difference(v_h, v_e);
    Ok(ClusterSelection::ranked(hard_cluster, &d, |n| v_h[n] >= tau, k))
}

/// Dispatches to the selected method. `v_e` is ignored by `TopS`.
pub fn select(
    method: Method,
    hard_cluster: usize,
    v_h: &[f64],
    v_e: &[f64],
    k: usize,
    tau: f64,
) -> Result<ClusterSelection> {
    match method {
        Method::TopS => top_s(hard_cluster, v_h, k),
        Method::SetDiff => set_diff(hard_cluster, v_h, v_e, k, tau),
        Method::PDiff => p_diff(hard_cluster, v_h, v_e, k),
        Method::FPDiff => fp_diff(hard_cluster, v_h, v_e, k, tau),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplanationSet {
    pub sentences: BTreeSet<usize>,
    pub per_cluster: Vec<ClusterSelection>,
}

pub fn union_selections(selections: Vec<ClusterSelection>) -> ExplanationSet {
    let sentences = selections.iter().flat_map(|s| s.retained.iter().copied()).collect();
    ExplanationSet {
        sentences,
        per_cluster: selections,
    }
}
