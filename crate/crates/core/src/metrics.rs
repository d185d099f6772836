//! Evaluation metrics for selected explanations and for slice discovery.
//!
//! * hardness ratio per hard cluster: share of its retained sentences that
//!   belong to the ground-truth set, ignoring sentences relevant for no
//!   image; AHR averages it over clusters
//! * coverage ratio per hard cluster: mean, over retained sentences, of the
//!   share of cluster images the sentence is relevant for; ACR averages it
//! * TPR and Jaccard index between the union of retained sentences and the
//!   ground-truth set
//! * precision at K between ground-truth partitions and ranked predicted
//!   partitions
//!
//! Undefined values (empty denominators) are `None` and excluded from
//! averages.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use crate::error::{LbeeError, Result};
use crate::groundtruth::GroundTruthSet;
use crate::ingest::RelevanceMatrix;
use crate::select::{ClusterSelection, ExplanationSet};

/// Per-cluster ratios and their mean over the defined ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSummary {
    pub per_cluster: Vec<Option<f64>>,
    pub mean: Option<f64>,
}

fn summarize(per_cluster: Vec<Option<f64>>) -> RatioSummary {
    let defined: Vec<f64> = per_cluster.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    RatioSummary { per_cluster, mean }
}

pub fn cluster_hardness_ratios(selections: &[ClusterSelection], gt: &GroundTruthSet) -> RatioSummary {
    summarize(
        selections
            .iter()
            .map(|s| {
                let evaluable: Vec<usize> = s
                    .retained
                    .iter()
                    .copied()
                    .filter(|n| !gt.unsupported.contains(n))
                    .collect();
                (!evaluable.is_empty()).then(|| {
                    let hits = evaluable.iter().filter(|n| gt.members.contains(n)).count();
                    hits as f64 / evaluable.len() as f64
                })
            })
            .collect(),
    )
}

/// `cluster_members[i]` holds image indices (in the relevance universe) of
/// the hard cluster the `i`-th selection belongs to.
pub fn cluster_coverage_ratios(
    selections: &[ClusterSelection],
    cluster_members: &[Vec<usize>],
    relevance: &RelevanceMatrix,
) -> Result<RatioSummary> {
    if selections.len() != cluster_members.len() {
        return Err(LbeeError::LengthMismatch {
            left: selections.len(),
            right: cluster_members.len(),
        });
    }
    Ok(summarize(
        selections
            .iter()
            .zip(cluster_members)
            .map(|(s, members)| {
                if s.retained.is_empty() || members.is_empty() {
                    return None;
                }
                let total: f64 = s
                    .retained
                    .iter()
                    .map(|&n| {
                        let hits = members.iter().filter(|&&x| relevance.contains(x, n)).count();
                        hits as f64 / members.len() as f64
                    })
                    .sum();
                Some(total / s.retained.len() as f64)
            })
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetAgreement {
    pub tpr: Option<f64>,
    pub ji: Option<f64>,
    pub retrieved: usize,
    pub ground_truth: usize,
    pub intersection: usize,
}

pub fn set_agreement(retrieved: &BTreeSet<usize>, gt: &GroundTruthSet) -> SetAgreement {
    let intersection = retrieved.intersection(&gt.members).count();
    let union = retrieved.len() + gt.members.len() - intersection;
    SetAgreement {
        tpr: (!gt.members.is_empty()).then(|| intersection as f64 / gt.members.len() as f64),
        ji: (union > 0).then(|| intersection as f64 / union as f64),
        retrieved: retrieved.len(),
        ground_truth: gt.members.len(),
        intersection,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterMetrics {
    pub hard_cluster: usize,
    pub hr: Option<f64>,
    pub cr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub per_cluster: Vec<ClusterMetrics>,
    pub ahr: Option<f64>,
    pub acr: Option<f64>,
    pub tpr: Option<f64>,
    pub ji: Option<f64>,
    pub retrieved: usize,
    pub ground_truth: usize,
    pub intersection: usize,
    /// Why a value is undefined, one line each.
    pub undefined: Vec<String>,
}

/// All explanation metrics at once.
pub fn evaluate(
    explanation: &ExplanationSet,
    cluster_members: &[Vec<usize>],
    relevance: &RelevanceMatrix,
    gt: &GroundTruthSet,
) -> Result<MetricsReport> {
    let hr = cluster_hardness_ratios(&explanation.per_cluster, gt);
    let cr = cluster_coverage_ratios(&explanation.per_cluster, cluster_members, relevance)?;
    let agreement = set_agreement(&explanation.sentences, gt);

    let mut undefined = Vec::new();
    for (s, members) in explanation.per_cluster.iter().zip(cluster_members) {
        if s.retained.is_empty() {
            undefined.push(format!(
                "hard cluster {}: no sentence retained, HR and CR excluded from averages",
                s.hard_cluster
            ));
            continue;
        }
        if s.retained.iter().all(|n| gt.unsupported.contains(n)) {
            undefined.push(format!(
                "hard cluster {}: no retained sentence has a relevant image, HR excluded",
                s.hard_cluster
            ));
        }
        if members.is_empty() {
            undefined.push(format!("hard cluster {}: no members, CR excluded", s.hard_cluster));
        }
    }
    if hr.mean.is_none() {
        undefined.push("AHR: no hard cluster retained any sentence".into());
    }
    if cr.mean.is_none() {
        undefined.push("ACR: no hard cluster retained any sentence".into());
    }
    if agreement.tpr.is_none() {
        undefined.push("TPR: ground-truth sentence set is empty".into());
    }
    if agreement.ji.is_none() {
        undefined.push("JI: retrieved and ground-truth sets are both empty".into());
    }

    Ok(MetricsReport {
        per_cluster: explanation
            .per_cluster
            .iter()
            .zip(hr.per_cluster.iter().zip(&cr.per_cluster))
            .map(|(s, (&hr, &cr))| ClusterMetrics {
                hard_cluster: s.hard_cluster,
                hr,
                cr,
            })
            .collect(),
        ahr: hr.mean,
        acr: cr.mean,
        tpr: agreement.tpr,
        ji: agreement.ji,
        retrieved: agreement.retrieved,
        ground_truth: agreement.ground_truth,
        intersection: agreement.intersection,
        undefined,
    })
}

// ---------------------------------------------------------------------------
// Precision at K

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartitionEvalInput {
    /// Named ground-truth partitions.
    pub gt_partitions: BTreeMap<String, HashSet<String>>,
    /// Ids of each predicted partition, most likely member first.
    pub pred_rankings: Vec<Vec<String>>,
    /// Names of the ground-truth partitions to average over.
    pub evaluated_subset: Vec<String>,
}

/// For every evaluated ground-truth partition, the predicted partition whose
/// top-`k` overlaps it most (ties → first prediction) contributes
/// `overlap / k`; the result is the mean contribution.
pub fn precision_at_k(input: &PartitionEvalInput, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(LbeeError::InvalidArgument("k must be >= 1".into()));
    }
    if input.pred_rankings.is_empty() {
        return Err(LbeeError::InvalidArgument("no predicted partitions".into()));
    }
    if input.evaluated_subset.is_empty() {
        return Err(LbeeError::EmptySubset);
    }
    let tops: Vec<&[String]> = input
        .pred_rankings
        .iter()
        .map(|r| &r[..r.len().min(k)])
        .collect();

    let mut total = 0.0;
    for name in &input.evaluated_subset {
        let z = input
            .gt_partitions
            .get(name)
            .ok_or_else(|| LbeeError::UnknownId(name.clone()))?;
        let best = tops
            .iter()
            .map(|top| top.iter().filter(|id| z.contains(*id)).count())
            .max()
            .unwrap_or(0);
        total += best as f64 / k as f64;
    }
    Ok(total / input.evaluated_subset.len() as f64)
}

/// Turns a nearest-prototype assignment into per-partition rankings ordered
/// by descending score (ties → row order).
pub fn rankings_from_assignment(ids: &[String], assignments: &[usize], scores: &[f64], partitions: usize) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); partitions];
    for (r, &p) in assignments.iter().enumerate() {
        rows[p].push(r);
    }
    rows.into_iter()
        .map(|mut members| {
            members.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            members.into_iter().map(|r| ids[r].clone()).collect()
        })
        .collect()
}
