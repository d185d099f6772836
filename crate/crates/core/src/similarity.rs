//! Sentence–prototype similarity profiles and hard→easy prototype matching.

use serde::Serialize;

use crate::error::{LbeeError, Result};
use crate::ingest::EmbeddingTable;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Easy,
    Hard,
}

/// Cosine similarity of one prototype to every sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityProfile {
    pub side: Side,
    pub cluster: usize,
    pub values: Vec<f64>,
}

/// `values[n] = <prototype, s_n>` for every sentence row.
pub fn similarity_profile(prototype: &[f64], sentences: &EmbeddingTable) -> Result<Vec<f64>> {
    if prototype.len() != sentences.dim() {
        return Err(LbeeError::DimensionMismatch {
            what: "prototype".into(),
            expected: sentences.dim(),
            found: prototype.len(),
        });
    }
    Ok(sentences.rows().map(|s| linalg::dot(prototype, s)).collect())
}

/// Profiles of every prototype of one side.
pub fn profiles(side: Side, prototypes: &[Vec<f64>], sentences: &EmbeddingTable) -> Result<Vec<SimilarityProfile>> {
    prototypes
        .iter()
        .enumerate()
        .map(|(cluster, p)| {
            Ok(SimilarityProfile {
                side,
                cluster,
                values: similarity_profile(p, sentences)?,
            })
        })
        .collect()
}

/// Hard cluster index → nearest easy cluster index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EasyMatch(pub Vec<usize>);

impl EasyMatch {
    pub fn easy_for(&self, hard: usize) -> usize {
        self.0[hard]
    }
}

/// For each hard prototype, the easy prototype at the smallest Euclidean
/// distance (ties → smallest easy index).
pub fn nearest_easy_map(hard: &[Vec<f64>], easy: &[Vec<f64>]) -> Result<EasyMatch> {
    if easy.is_empty() {
        return Err(LbeeError::NoEasyClusters);
    }
    Ok(EasyMatch(
        hard.iter()
            .map(|h| {
                let mut best = (0, linalg::sq_dist(h, &easy[0]));
                for (j, e) in easy.iter().enumerate().skip(1) {
                    let d = linalg::sq_dist(h, e);
                    if d < best.1 {
                        best = (j, d);
                    }
                }
                best.0
            })
            .collect(),
    ))
}

/// Indices `n` with `values[n] >= tau`, ascending.
pub fn candidate_set(values: &[f64], tau: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= tau)
        .map(|(n, _)| n)
        .collect()
}
