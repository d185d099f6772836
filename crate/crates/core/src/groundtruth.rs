//! Evaluation ground truth: per-sentence hardness, the failure-describing
//! sentence set for a margin `beta`, and pseudo-label relevance tooling.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{LbeeError, Result};
use crate::ingest::{Polarity, RelevanceMatrix, ScoreKind, ScoreTable};
use crate::split::mean_std;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardnessTable {
    pub sentence_ids: Vec<String>,
    /// Relevant images that carry a performance value.
    pub support: Vec<usize>,
    /// Mean performance over the supporting images; `None` without support.
    pub hardness: Vec<Option<f64>>,
    pub global_avg: f64,
    pub global_std: f64,
    pub polarity: Polarity,
}

impl HardnessTable {
    pub fn undefined_count(&self) -> usize {
        self.hardness.iter().filter(|h| h.is_none()).count()
    }

    /// Writes `sentence_id,support,hardness`; undefined hardness is empty.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| LbeeError::io(path, e);
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(f, "sentence_id,support,hardness").map_err(io)?;
        for ((id, support), h) in self.sentence_ids.iter().zip(&self.support).zip(&self.hardness) {
            let h = h.map(|v| format!("{v:?}")).unwrap_or_default();
            writeln!(f, "{id},{support},{h}").map_err(io)?;
        }
        f.flush().map_err(io)
    }
}

pub fn sentence_hardness(performance: &ScoreTable, relevance: &RelevanceMatrix) -> Result<HardnessTable> {
    if performance.kind() != ScoreKind::Performance {
        return Err(LbeeError::InvalidArgument(
            "hardness needs a performance score table".into(),
        ));
    }
    let (global_avg, global_std) = mean_std(performance.values()).ok_or(LbeeError::EmptyScores)?;

    // performance value per relevance image row
    let mut perf = vec![None; relevance.image_ids().len()];
    for (id, v) in performance.iter() {
        let row = relevance.image_index(id).ok_or_else(|| LbeeError::UnknownId(id.to_string()))?;
        perf[row] = Some(v);
    }

    let n = relevance.sentence_ids().len();
    let mut sum = vec![0.0_f64; n];
    let mut support = vec![0_usize; n];
    // positives iterate image-major, so sums accumulate in image row order
    for &(img, sent) in relevance.positives() {
        if let Some(v) = perf[img] {
            sum[sent] += v;
            support[sent] += 1;
        }
    }
    let hardness = sum
        .iter()
        .zip(&support)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();

    Ok(HardnessTable {
        sentence_ids: relevance.sentence_ids().to_vec(),
        support,
        hardness,
        global_avg,
        global_std,
        polarity: performance.polarity(),
    })
}

pub fn beta_from_factor(table: &HardnessTable, o: f64) -> f64 {
    o * table.global_std
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthSet {
    pub beta: f64,
    /// Sentence indices.
    pub members: BTreeSet<usize>,
    /// Sentences relevant for no scored image. They can never be validated
    /// and are left out of hardness ratios.
    pub unsupported: BTreeSet<usize>,
}

/// Sentences whose hardness is worse than the global average by more than
/// `beta`. For higher-is-better performance that is `h < avg - beta`.
pub fn build_gt_set(table: &HardnessTable, beta: f64) -> GroundTruthSet {
    let members = table
        .hardness
        .iter()
        .enumerate()
        .filter_map(|(n, h)| {
            let h = (*h)?;
            let fails = match table.polarity {
                Polarity::HigherIsEasier => h < table.global_avg - beta,
                Polarity::HigherIsHarder => h > table.global_avg + beta,
            };
            fails.then_some(n)
        })
        .collect();
    let unsupported = (0..table.hardness.len()).filter(|&n| table.hardness[n].is_none()).collect();
    GroundTruthSet {
        beta,
        members,
        unsupported,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineMode {
    And,
    Or,
}

impl std::str::FromStr for CombineMode {
    type Err = LbeeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "and" => Ok(CombineMode::And),
            "or" => Ok(CombineMode::Or),
            other => Err(LbeeError::InvalidArgument(format!(
                "unknown combine mode '{other}' (expected and / or)"
            ))),
        }
    }
}

pub fn combine_relevance(a: &RelevanceMatrix, b: &RelevanceMatrix, mode: CombineMode) -> Result<RelevanceMatrix> {
    if !a.same_universe(b) {
        return Err(LbeeError::IdUniverseMismatch);
    }
    let positives = match mode {
        CombineMode::And => a.positives().intersection(b.positives()).copied().collect(),
        CombineMode::Or => a.positives().union(b.positives()).copied().collect(),
    };
    Ok(a.with_positives(positives))
}

/// Agreement of predicted relevance with ground truth over the dense
/// image × sentence universe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: Option<f64>,
    pub tp_rate: Option<f64>,
    pub tn_rate: Option<f64>,
    pub fp_rate: Option<f64>,
    pub fn_rate: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn relevance_confusion(pred: &RelevanceMatrix, gt: &RelevanceMatrix) -> Result<Confusion> {
    if !pred.same_universe(gt) {
        return Err(LbeeError::IdUniverseMismatch);
    }
    let tp = pred.positives().intersection(gt.positives()).count();
    let fp = pred.len() - tp;
    let fn_ = gt.len() - tp;
    let tn = pred.universe_size() - tp - fp - fn_;
    Ok(Confusion {
        tp,
        tn,
        fp,
        fn_,
        accuracy: ratio(tp + tn, pred.universe_size()),
        tp_rate: ratio(tp, tp + fn_),
        tn_rate: ratio(tn, tn + fp),
        fp_rate: ratio(fp, tn + fp),
        fn_rate: ratio(fn_, tp + fn_),
    })
}
