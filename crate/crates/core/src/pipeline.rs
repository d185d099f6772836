//! End-to-end runs: split, cluster, match, select, union, and (when the
//! bundle carries performance and relevance) evaluate.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{compute_prototypes, ward_cluster, ClusterModel};
use crate::config::{Method, RunConfig, SplitMode};
use crate::error::{LbeeError, Result};
use crate::groundtruth::{beta_from_factor, build_gt_set, sentence_hardness, GroundTruthSet};
use crate::ingest::{Bundle, EmbeddingTable};
use crate::metrics::{evaluate, ClusterMetrics, MetricsReport};
use crate::select::{select, union_selections, ClusterSelection, ExplanationSet};
use crate::similarity::{nearest_easy_map, profiles, Side, SimilarityProfile};
use crate::split::{derive_thresholds, split_by_outcome, split_by_score, SplitResult, Thresholds};

/// Rounds to 12 significant digits so reports do not carry last-bit noise.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_opt(x: Option<f64>) -> Option<f64> {
    x.map(round_sig)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSummary {
    pub mode: SplitMode,
    pub easy: usize,
    pub hard: usize,
    pub neutral: usize,
    pub thresholds: Option<Thresholds>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub easy: usize,
    pub hard: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetainedSentence {
    pub sentence_id: String,
    pub text: String,
    /// Cosine similarity to the hard prototype.
    pub similarity: f64,
    /// The method's ranking key.
    pub key: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardClusterReport {
    pub index: usize,
    pub members: usize,
    pub nearest_easy: Option<usize>,
    pub shortfall: bool,
    pub retained: Vec<RetainedSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthReport {
    pub beta: f64,
    pub members: Vec<String>,
    /// Sentences relevant for no scored image; never part of the set.
    pub zero_support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub config: RunConfig,
    pub split: SplitSummary,
    pub clusters: ClusterSummary,
    pub hard_clusters: Vec<HardClusterReport>,
    pub explanation: Vec<String>,
    pub ground_truth: Option<GroundTruthReport>,
    pub metrics: Option<MetricsReport>,
    pub warnings: Vec<String>,
}

impl PipelineReport {
    /// Canonical pretty JSON, newline-terminated.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Per-cluster metric table as CSV `hard_cluster,members,hr,cr`.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("hard_cluster,members,hr,cr\n");
        for hc in &self.hard_clusters {
            let m = self
                .metrics
                .as_ref()
                .and_then(|m| m.per_cluster.iter().find(|c| c.hard_cluster == hc.index));
            let _ = writeln!(
                out,
                "{},{},{},{}",
                hc.index,
                hc.members,
                fmt_opt(m.and_then(|m| m.hr)),
                fmt_opt(m.and_then(|m| m.cr))
            );
        }
        out
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// Everything a run produced; [`PipelineRun::report`] is the serializable view.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub split: SplitResult,
    pub easy_model: Option<ClusterModel>,
    pub hard_model: Option<ClusterModel>,
    pub explanation: ExplanationSet,
    pub ground_truth: Option<GroundTruthSet>,
}

fn rows_of(images: &EmbeddingTable, ids: &[String]) -> Vec<usize> {
    let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
    (0..images.len())
        .filter(|&r| wanted.contains(images.ids()[r].as_str()))
        .collect()
}

/// Clusters one side, clamping the cluster count to the subset size.
fn cluster_side(
    images: &EmbeddingTable,
    rows: &[usize],
    requested: usize,
    side: &str,
    warnings: &mut Vec<String>,
) -> Result<Option<(ClusterModel, Vec<usize>)>> {
    if rows.is_empty() {
        warnings.push(format!("no {side} samples"));
        return Ok(None);
    }
    let c = if requested > rows.len() {
        warnings.push(format!(
            "{side} cluster count clamped from {requested} to {} (subset size)",
            rows.len()
        ));
        rows.len()
    } else {
        requested
    };
    let subset = images.select_rows(rows);
    let model = compute_prototypes(ward_cluster(&subset, c)?, &subset)?;
    Ok(Some((model, rows.to_vec())))
}

pub fn execute(bundle: &Bundle, config: &RunConfig) -> Result<PipelineRun> {
    config.validate()?;
    let images = bundle.images();
    let sentences = bundle.sentences();
    let mut warnings = Vec::new();

    let split = match config.split_mode {
        SplitMode::Score => {
            let t = derive_thresholds(bundle.confidence(), config.a)?;
            split_by_score(bundle.confidence(), t)
        }
        SplitMode::Outcome => {
            let outcomes = bundle.outcomes().ok_or_else(|| {
                LbeeError::InvalidConfig("split_mode 'outcome' needs an outcomes file in the bundle".into())
            })?;
            split_by_outcome(outcomes)
        }
    };

    let easy = cluster_side(images, &rows_of(images, &split.easy), config.c_easy, "easy", &mut warnings)?;
    let hard = cluster_side(images, &rows_of(images, &split.hard), config.c_hard, "hard", &mut warnings)?;

    let hard_profiles: Vec<SimilarityProfile> = match &hard {
        Some((m, _)) => profiles(Side::Hard, &m.prototypes, sentences)?,
        None => Vec::new(),
    };
    let easy_profiles: Vec<SimilarityProfile> = match &easy {
        Some((m, _)) => profiles(Side::Easy, &m.prototypes, sentences)?,
        None => Vec::new(),
    };
    let easy_match = match (&hard, &easy) {
        (Some((h, _)), Some((e, _))) => Some(nearest_easy_map(&h.prototypes, &e.prototypes)?),
        _ => None,
    };

    let mut selections: Vec<ClusterSelection> = Vec::with_capacity(hard_profiles.len());
    for (i, vh) in hard_profiles.iter().enumerate() {
        let sel = match (config.method, &easy_match) {
            (Method::TopS, _) => select(Method::TopS, i, &vh.values, &[], config.k, config.tau)?,
            (m, Some(matching)) => {
                let ve = &easy_profiles[matching.easy_for(i)].values;
                select(m, i, &vh.values, ve, config.k, config.tau)?
            }
            (m, None) => {
                warnings.push(format!("hard cluster {i}: {m} needs an easy cluster to contrast with"));
                ClusterSelection {
                    hard_cluster: i,
                    retained: Vec::new(),
                    keys: Vec::new(),
                    shortfall: true,
                }
            }
        };
        if sel.shortfall {
            warnings.push(format!(
                "hard cluster {i}: retained {} of {} sentences",
                sel.retained.len(),
                config.k
            ));
        }
        selections.push(sel);
    }
    let explanation = union_selections(selections);

    // hard cluster members as image rows of the full table
    let hard_members: Vec<Vec<usize>> = match &hard {
        Some((m, rows)) => m
            .member_rows
            .iter()
            .map(|c| c.iter().map(|&r| rows[r]).collect())
            .collect(),
        None => Vec::new(),
    };

    let (ground_truth, gt_report, metrics) = match (bundle.performance(), bundle.relevance()) {
        (Some(perf), Some(rel)) => {
            let table = sentence_hardness(perf, rel)?;
            let beta = config.beta.unwrap_or_else(|| beta_from_factor(&table, config.o));
            let gt = build_gt_set(&table, beta);
            let zero_support = table.undefined_count();
            if zero_support > 0 {
                warnings.push(format!(
                    "{zero_support} sentences have no relevant image and are excluded from the ground truth"
                ));
            }
            let metrics = evaluate(&explanation, &hard_members, rel, &gt)?;
            warnings.extend(metrics.undefined.iter().cloned());
            let report = GroundTruthReport {
                beta: round_sig(beta),
                members: gt.members.iter().map(|&n| sentences.ids()[n].clone()).collect(),
                zero_support,
            };
            (Some(gt), Some(report), Some(rounded_metrics(&metrics)))
        }
        _ => (None, None, None),
    };

    let catalog = bundle.catalog();
    let hard_clusters = explanation
        .per_cluster
        .iter()
        .map(|sel| {
            let i = sel.hard_cluster;
            HardClusterReport {
                index: i,
                members: hard_members[i].len(),
                nearest_easy: easy_match.as_ref().map(|m| m.easy_for(i)),
                shortfall: sel.shortfall,
                retained: sel
                    .retained
                    .iter()
                    .zip(&sel.keys)
                    .map(|(&n, &key)| RetainedSentence {
                        sentence_id: sentences.ids()[n].clone(),
                        text: catalog.texts()[n].clone(),
                        similarity: round_sig(hard_profiles[i].values[n]),
                        key: round_sig(key),
                    })
                    .collect(),
            }
        })
        .collect();

    let report = PipelineReport {
        config: config.clone(),
        split: SplitSummary {
            mode: config.split_mode,
            easy: split.easy.len(),
            hard: split.hard.len(),
            neutral: split.neutral.len(),
            thresholds: split.thresholds.map(|t| Thresholds {
                easy: round_sig(t.easy),
                hard: round_sig(t.hard),
            }),
        },
        clusters: ClusterSummary {
            easy: easy.as_ref().map_or(0, |(m, _)| m.len()),
            hard: hard.as_ref().map_or(0, |(m, _)| m.len()),
        },
        hard_clusters,
        explanation: explanation.sentences.iter().map(|&n| sentences.ids()[n].clone()).collect(),
        ground_truth: gt_report,
        metrics,
        warnings,
    };

    Ok(PipelineRun {
        report,
        split,
        easy_model: easy.map(|(m, _)| m),
        hard_model: hard.map(|(m, _)| m),
        explanation,
        ground_truth,
    })
}

fn rounded_metrics(m: &MetricsReport) -> MetricsReport {
    MetricsReport {
        per_cluster: m
            .per_cluster
            .iter()
            .map(|c| ClusterMetrics {
                hard_cluster: c.hard_cluster,
                hr: round_opt(c.hr),
                cr: round_opt(c.cr),
            })
            .collect(),
        ahr: round_opt(m.ahr),
        acr: round_opt(m.acr),
        tpr: round_opt(m.tpr),
        ji: round_opt(m.ji),
        ..m.clone()
    }
}

pub fn run_pipeline(bundle_dir: impl AsRef<Path>, config: &RunConfig) -> Result<PipelineReport> {
    config.validate()?;
    let bundle = Bundle::load(bundle_dir.as_ref())?;
    Ok(execute(&bundle, config)?.report)
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    K,
    /// Both cluster counts.
    C,
    O,
    Tau,
    A,
    Method,
}

impl std::str::FromStr for SweepParam {
    type Err = LbeeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "k" => Ok(SweepParam::K),
            "c" => Ok(SweepParam::C),
            "o" => Ok(SweepParam::O),
            "tau" => Ok(SweepParam::Tau),
            "a" => Ok(SweepParam::A),
            "method" => Ok(SweepParam::Method),
            other => Err(LbeeError::UnknownSweepParameter(other.to_string())),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::C => "c",
            SweepParam::O => "o",
            SweepParam::Tau => "tau",
            SweepParam::A => "a",
            SweepParam::Method => "method",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &RunConfig, value: &str) -> Result<RunConfig> {
        let mut cfg = base.clone();
        let bad = || LbeeError::InvalidConfig(format!("cannot parse '{value}' for sweep parameter {}", self.name()));
        let int = || value.trim().parse::<usize>().map_err(|_| bad());
        let real = || value.trim().parse::<f64>().map_err(|_| bad());
        match self {
            SweepParam::K => cfg.k = int()?,
            SweepParam::C => {
                let c = int()?;
                cfg.c_easy = c;
                cfg.c_hard = c;
            }
            SweepParam::O => {
                cfg.o = real()?;
                // an explicit beta would mask the factor being swept
                cfg.beta = None;
            }
            SweepParam::Tau => cfg.tau = real()?,
            SweepParam::A => cfg.a = real()?,
            SweepParam::Method => cfg.method = value.parse()?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One report per value, in input order. Runs are independent and execute
/// in parallel.
pub fn run_sweep_on(bundle: &Bundle, base: &RunConfig, param: SweepParam, values: &[String]) -> Result<Vec<PipelineReport>> {
    let configs = values
        .iter()
        .map(|v| param.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    configs
        .par_iter()
        .map(|cfg| execute(bundle, cfg).map(|run| run.report))
        .collect()
}

pub fn run_sweep(bundle_dir: impl AsRef<Path>, base: &RunConfig, param: &str, values: &[String]) -> Result<Vec<PipelineReport>> {
    let param: SweepParam = param.parse()?;
    // validate every value before touching the bundle
    for v in values {
        param.apply(base, v)?;
    }
    let bundle = Bundle::load(bundle_dir.as_ref())?;
    run_sweep_on(&bundle, base, param, values)
}

/// Flattens sweep summaries to CSV
/// `param,value,method,ahr,acr,tpr,ji,retrieved,ground_truth`.
pub fn sweep_csv(param: SweepParam, values: &[String], reports: &[PipelineReport]) -> String {
    let mut out = String::from("param,value,method,ahr,acr,tpr,ji,retrieved,ground_truth\n");
    for (v, r) in values.iter().zip(reports) {
        let m = r.metrics.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            param.name(),
            v.trim(),
            r.config.method,
            fmt_opt(m.and_then(|m| m.ahr)),
            fmt_opt(m.and_then(|m| m.acr)),
            fmt_opt(m.and_then(|m| m.tpr)),
            fmt_opt(m.and_then(|m| m.ji)),
            r.explanation.len(),
            r.ground_truth.as_ref().map_or(String::new(), |g| g.members.len().to_string()),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_sig_keeps_twelve_digits() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(2.0 / 3.0), 0.666666666667);
        assert_eq!(round_sig(-1234.56789012345), -1234.56789012);
        assert_eq!(round_sig(0.0), 0.0);
    }

    #[test]
    fn sweep_param_parsing() {
        assert_eq!("tau".parse::<SweepParam>().unwrap(), SweepParam::Tau);
        assert!(matches!(
            "beta".parse::<SweepParam>(),
            Err(LbeeError::UnknownSweepParameter(p)) if p == "beta"
        ));
        let cfg = SweepParam::C.apply(&RunConfig::default(), "1").unwrap();
        assert_eq!((cfg.c_easy, cfg.c_hard), (1, 1));
        assert!(SweepParam::K.apply(&RunConfig::default(), "0").is_err());
        assert!(SweepParam::K.apply(&RunConfig::default(), "x").is_err());
    }
}
