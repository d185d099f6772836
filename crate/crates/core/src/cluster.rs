//! Agglomerative Ward clustering, cluster prototypes, and nearest-prototype
//! assignment.
//!
//! Ward distances follow the usual convention for the merged-cluster
//! height: for clusters `u`, `v` with centroids `c_u`, `c_v`,
//!
//! ```text
//! d(u, v) = sqrt(2 |u| |v| / (|u| + |v|)) * |c_u - c_v|
//! ```
//!
//! which reduces to the Euclidean distance between singletons and equals
//! `sqrt(2 * ΔSSE)` where `ΔSSE` is the increase of the within-cluster sum
//! of squares caused by the merge. Squared distances are updated with the
//! Lance–Williams recurrence.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{LbeeError, Result};
use crate::ingest::EmbeddingTable;
use crate::linalg;

/// One agglomeration step. Labels follow the hierarchical-clustering
/// convention: leaves are `0..n`, the cluster created at step `s` is `n + s`.
/// `cluster_a` is the side holding the smaller row index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub cluster_a: usize,
    pub cluster_b: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    /// Member ids per cluster, in row order. Clusters are ordered by their
    /// smallest row index.
    pub member_ids: Vec<Vec<String>>,
    /// Member row indices per cluster, parallel to `member_ids`.
    pub member_rows: Vec<Vec<usize>>,
    /// Cluster index of every input row.
    pub assignments: Vec<usize>,
    /// Unit-norm prototypes; empty until [`compute_prototypes`] runs.
    pub prototypes: Vec<Vec<f64>>,
    pub merge_log: Vec<Merge>,
}

impl ClusterModel {
    pub fn len(&self) -> usize {
        self.member_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_rows.is_empty()
    }
}

/// Clusters the rows of `embeddings` into `c` groups.
///
/// Starts from singletons and repeatedly merges the pair with the smallest
/// Ward distance. Exact ties go to the pair whose (smaller, larger) minimum
/// row indices are lexicographically smallest.
pub fn ward_cluster(embeddings: &EmbeddingTable, c: usize) -> Result<ClusterModel> {
    let n = embeddings.len();
    if c == 0 {
        return Err(LbeeError::InvalidArgument("cluster count must be >= 1".into()));
    }
    if c > n {
        return Err(LbeeError::TooManyClusters { requested: c, rows: n });
    }

    // Slot i always holds the cluster whose smallest member row is i, so
    // scanning active slots in ascending order realizes the tie-break.
    let mut d2 = vec![0.0_f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = linalg::sq_dist(embeddings.row(i), embeddings.row(j));
            d2[i * n + j] = d;
            d2[j * n + i] = d;
        }
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut size = vec![1_usize; n];
    let mut label: Vec<usize> = (0..n).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut merge_log = Vec::with_capacity(n - c);

    for step in 0..(n - c) {
        let mut best = (f64::INFINITY, 0, 0);
        for (ai, &i) in active.iter().enumerate() {
            let row = &d2[i * n..(i + 1) * n];
            for &j in &active[ai + 1..] {
                if row[j] < best.0 {
                    best = (row[j], i, j);
                }
            }
        }
        let (dist2, i, j) = best;
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for &k in &active {
            if k == i || k == j {
                continue;
            }
            let nk = size[k] as f64;
            let updated = ((ni + nk) * d2[k * n + i] + (nj + nk) * d2[k * n + j] - nk * dist2) / (ni + nj + nk);
            d2[k * n + i] = updated;
            d2[i * n + k] = updated;
        }
        merge_log.push(Merge {
            cluster_a: label[i],
            cluster_b: label[j],
            distance: dist2.max(0.0).sqrt(),
            size: size[i] + size[j],
        });
        size[i] += size[j];
        label[i] = n + step;
        parent[j] = i;
        active.retain(|&s| s != j);
    }

    let root = |mut r: usize| {
        while parent[r] != r {
            r = parent[r];
        }
        r
    };
    let mut cluster_of_slot = vec![usize::MAX; n];
    for (idx, &slot) in active.iter().enumerate() {
        cluster_of_slot[slot] = idx;
    }
    let mut member_rows = vec![Vec::new(); active.len()];
    let mut assignments = Vec::with_capacity(n);
    for r in 0..n {
        let cl = cluster_of_slot[root(r)];
        member_rows[cl].push(r);
        assignments.push(cl);
    }
    let member_ids = member_rows
        .iter()
        .map(|rows| rows.iter().map(|&r| embeddings.ids()[r].clone()).collect())
        .collect();

    Ok(ClusterModel {
        member_ids,
        member_rows,
        assignments,
        prototypes: Vec::new(),
        merge_log,
    })
}

/// Mean of the member embeddings of each cluster, re-normalized.
pub fn compute_prototypes(mut model: ClusterModel, embeddings: &EmbeddingTable) -> Result<ClusterModel> {
    if model.assignments.len() != embeddings.len() {
        return Err(LbeeError::LengthMismatch {
            left: model.assignments.len(),
            right: embeddings.len(),
        });
    }
    model.prototypes = model
        .member_rows
        .iter()
        .enumerate()
        .map(|(cl, rows)| {
            let mean = mean_row(embeddings, rows);
            linalg::normalized(&mean).ok_or(LbeeError::DegeneratePrototype(cl))
        })
        .collect::<Result<_>>()?;
    Ok(model)
}

pub(crate) fn mean_row(embeddings: &EmbeddingTable, rows: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0_f64; embeddings.dim()];
    for &r in rows {
        for (a, x) in acc.iter_mut().zip(embeddings.row(r)) {
            *a += x;
        }
    }
    let count = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= count);
    acc
}

/// Assigns every row to the prototype with the largest cosine similarity.
/// Returns the assignment and that similarity per row; ties go to the
/// smaller prototype index.
pub fn assign_to_prototypes(embeddings: &EmbeddingTable, prototypes: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<f64>)> {
    if prototypes.is_empty() {
        return Err(LbeeError::InvalidArgument("no prototypes to assign to".into()));
    }
    if let Some(p) = prototypes.iter().find(|p| p.len() != embeddings.dim()) {
        return Err(LbeeError::DimensionMismatch {
            what: "prototype".into(),
            expected: embeddings.dim(),
            found: p.len(),
        });
    }
    Ok(embeddings
        .rows()
        .map(|row| {
            let mut best = (0, linalg::dot(row, &prototypes[0]));
            for (p, proto) in prototypes.iter().enumerate().skip(1) {
                let s = linalg::dot(row, proto);
                if s > best.1 {
                    best = (p, s);
                }
            }
            best
        })
        .unzip())
}

/// Writes the merge log as CSV `step,cluster_a,cluster_b,ward_distance`.
pub fn write_merge_log(path: &Path, merges: &[Merge]) -> Result<()> {
    let io = |e| LbeeError::io(path, e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(f, "step,cluster_a,cluster_b,ward_distance").map_err(io)?;
    for (step, m) in merges.iter().enumerate() {
        writeln!(f, "{step},{},{},{:?}", m.cluster_a, m.cluster_b, m.distance).map_err(io)?;
    }
    f.flush().map_err(io)
}
