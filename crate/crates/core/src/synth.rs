//! Seeded synthetic benchmark with planted failure modes.
//!
//! Generation, in this order, all drawing from one stream:
//!
//! 1. `groups` unit directions in `dim` dimensions, each sampled as a
//!    normalized standard Gaussian vector and rejected while its cosine to
//!    an earlier direction exceeds `cos(separation)`;
//! 2. `sentences_per_group` sentences per group: `normalize(dir + 0.5·noise_scale·g/√dim)`;
//! 3. `images_per_group` images per group: `normalize(dir + noise_scale·g/√dim)`;
//! 4. one confidence noise draw per image.
//!
//! `g` is a standard Gaussian vector. Relevance holds exactly the same-group
//! (image, sentence) pairs. Performance is `BASE_PERFORMANCE`, lowered by
//! `performance_gap` on hard groups. Confidence is an entropy-like score,
//! `1 - performance + 0.1·noise_scale·g`, with higher meaning harder.
//!
//! The stream is xoshiro256** seeded through SplitMix64 (`seed_from_u64`).
//! Uniforms take the top 53 bits of a draw: `(x >> 11) · 2⁻⁵³`. Gaussians use
//! the cosine branch of Box–Muller on two uniforms `u1, u2`:
//! `sqrt(-2 ln(1 - u1)) · cos(2π u2)`.
//!
//! With the default parameters every group's images are closer to each other
//! than to any other group, so Ward clustering recovers the groups. Keep
//! `noise_scale` below roughly `0.25 · sqrt(2 - 2 cos(separation))` to stay
//! in that regime.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::Serialize;

use crate::error::{LbeeError, Result};
use crate::groundtruth::GroundTruthSet;
use crate::ingest::{
    Bundle, BundleParts, EmbeddingTable, Outcome, OutcomeTable, Polarity, RelevanceMatrix, ScoreKind, ScoreTable,
    SentenceCatalog,
};
use crate::linalg;
use crate::metrics::{ClusterMetrics, MetricsReport};
use crate::select::ExplanationSet;

pub const BASE_PERFORMANCE: f64 = 0.8;
const MAX_DIRECTION_ATTEMPTS: usize = 10_000;
pub const PLANTED_JSON: &str = "planted.json";

/// Deterministic random stream used by the generator.
pub struct SynthRng(Xoshiro256StarStar);

impl SynthRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn gaussian_vec(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.gaussian()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthParams {
    pub seed: u64,
    pub dim: usize,
    pub groups: usize,
    pub images_per_group: usize,
    pub sentences_per_group: usize,
    pub hard_groups: Vec<usize>,
    /// Minimum angle between group directions, in radians.
    pub separation: f64,
    /// Performance drop on hard groups.
    pub performance_gap: f64,
    /// Norm of the embedding noise added to image directions.
    pub noise_scale: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 0,
            dim: 64,
            groups: 6,
            images_per_group: 30,
            sentences_per_group: 3,
            hard_groups: vec![0, 1],
            separation: 1.45,
            performance_gap: 0.5,
            noise_scale: 0.3,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LbeeError::InvalidArgument(m.to_string()));
        if self.groups < 2 {
            return bad("need at least 2 groups");
        }
        if self.dim == 0 || self.images_per_group == 0 || self.sentences_per_group == 0 {
            return bad("dim, images_per_group and sentences_per_group must be >= 1");
        }
        let unique: HashSet<_> = self.hard_groups.iter().collect();
        if unique.len() != self.hard_groups.len() || self.hard_groups.iter().any(|&g| g >= self.groups) {
            return bad("hard groups must be distinct indices below the group count");
        }
        if self.hard_groups.len() >= self.groups {
            return bad("at least one group must stay easy");
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return bad("separation must be > 0");
        }
        if !(self.performance_gap.is_finite() && self.performance_gap > 0.0) {
            return bad("performance_gap must be > 0");
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return bad("noise_scale must be >= 0");
        }
        Ok(())
    }

    pub fn is_hard(&self, group: usize) -> bool {
        self.hard_groups.contains(&group)
    }
}

#[derive(Debug, Clone)]
pub struct SynthBundle {
    pub params: SynthParams,
    pub bundle: Bundle,
    /// Group of each image row.
    pub image_groups: Vec<usize>,
    /// Group of each sentence row.
    pub sentence_groups: Vec<usize>,
    /// Sentence indices of the hard groups.
    pub planted_gt: BTreeSet<usize>,
}

#[derive(Serialize)]
struct PlantedFile<'a> {
    params: &'a SynthParams,
    image_groups: BTreeMap<&'a str, usize>,
    sentence_groups: BTreeMap<&'a str, usize>,
    planted_gt: Vec<&'a str>,
}

impl SynthBundle {
    pub fn planted_gt_ids(&self) -> Vec<&str> {
        let ids = self.bundle.sentences().ids();
        self.planted_gt.iter().map(|&n| ids[n].as_str()).collect()
    }

    /// Image ids of every group.
    pub fn group_members(&self) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new(); self.params.groups];
        for (id, &g) in self.bundle.images().ids().iter().zip(&self.image_groups) {
            out[g].push(id.clone());
        }
        out
    }

    /// Writes the bundle files plus `planted.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.bundle.write(dir)?;
        let images = self.bundle.images().ids();
        let sentences = self.bundle.sentences().ids();
        let planted = PlantedFile {
            params: &self.params,
            image_groups: images.iter().map(String::as_str).zip(self.image_groups.iter().copied()).collect(),
            sentence_groups: sentences
                .iter()
                .map(String::as_str)
                .zip(self.sentence_groups.iter().copied())
                .collect(),
            planted_gt: self.planted_gt_ids(),
        };
        let path = dir.join(PLANTED_JSON);
        let mut json = serde_json::to_string_pretty(&planted)?;
        json.push('\n');
        fs::write(&path, json).map_err(|e| LbeeError::io(&path, e))
    }
}

fn perturbed(rng: &mut SynthRng, dir: &[f64], scale: f64) -> Vec<f64> {
    let step = scale / (dir.len() as f64).sqrt();
    let v: Vec<f64> = dir.iter().map(|d| d + step * rng.gaussian()).collect();
    // a zero sum needs noise exactly cancelling a unit vector
    linalg::normalized(&v).unwrap_or_else(|| dir.to_vec())
}

pub fn generate_benchmark(params: &SynthParams) -> Result<SynthBundle> {
    params.validate()?;
    let mut rng = SynthRng::new(params.seed);
    let max_cos = params.separation.cos();

    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(params.groups);
    for _ in 0..params.groups {
        let accepted = (0..MAX_DIRECTION_ATTEMPTS).find_map(|_| {
            let v = linalg::normalized(&rng.gaussian_vec(params.dim))?;
            directions
                .iter()
                .all(|d| linalg::dot(d, &v) <= max_cos)
                .then_some(v)
        });
        match accepted {
            Some(v) => directions.push(v),
            None => {
                return Err(LbeeError::InfeasibleSeparation {
                    groups: params.groups,
                    dim: params.dim,
                    separation: params.separation,
                })
            }
        }
    }

    let mut sentence_ids = Vec::new();
    let mut sentence_texts = Vec::new();
    let mut sentence_rows = Vec::new();
    let mut sentence_groups = Vec::new();
    for (g, dir) in directions.iter().enumerate() {
        for j in 0..params.sentences_per_group {
            sentence_ids.push(format!("s{:03}", sentence_ids.len()));
            sentence_texts.push(format!("synthetic mode {g} variant {j}"));
            sentence_rows.push(perturbed(&mut rng, dir, 0.5 * params.noise_scale));
            sentence_groups.push(g);
        }
    }

    let mut image_ids = Vec::new();
    let mut image_rows = Vec::new();
    let mut image_groups = Vec::new();
    for (g, dir) in directions.iter().enumerate() {
        for _ in 0..params.images_per_group {
            image_ids.push(format!("img{:04}", image_ids.len()));
            image_rows.push(perturbed(&mut rng, dir, params.noise_scale));
            image_groups.push(g);
        }
    }

    let performance: Vec<f64> = image_groups
        .iter()
        .map(|&g| {
            if params.is_hard(g) {
                BASE_PERFORMANCE - params.performance_gap
            } else {
                BASE_PERFORMANCE
            }
        })
        .collect();
    let confidence: Vec<f64> = performance
        .iter()
        .map(|p| 1.0 - p + 0.1 * params.noise_scale * rng.gaussian())
        .collect();

    let mut hard_image = 0usize;
    let outcomes: Vec<Outcome> = image_groups
        .iter()
        .map(|&g| {
            if params.is_hard(g) {
                hard_image += 1;
                if hard_image % 2 == 1 {
                    Outcome::FalseNegative
                } else {
                    Outcome::FalsePositive
                }
            } else {
                Outcome::Correct
            }
        })
        .collect();

    let mut positives = BTreeSet::new();
    for (i, &gi) in image_groups.iter().enumerate() {
        for (s, &gs) in sentence_groups.iter().enumerate() {
            if gi == gs {
                positives.insert((i, s));
            }
        }
    }

    // stored on disk as f32, so round now to keep in-memory and loaded bundles identical
    let to_table = |ids: &[String], rows: &[Vec<f64>]| -> Result<EmbeddingTable> {
        let rounded: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| f64::from(x as f32)).collect())
            .collect();
        EmbeddingTable::from_rows(ids.to_vec(), &rounded)
    };
    let relevance = RelevanceMatrix::empty(image_ids.clone(), sentence_ids.clone())?.with_positives(positives);
    let bundle = Bundle::from_parts(BundleParts {
        images: to_table(&image_ids, &image_rows)?,
        sentences: to_table(&sentence_ids, &sentence_rows)?,
        catalog: SentenceCatalog::new(sentence_ids.clone(), sentence_texts)?,
        confidence: ScoreTable::new(
            image_ids.clone(),
            confidence,
            Polarity::HigherIsHarder,
            ScoreKind::Confidence,
        )?,
        performance: Some(ScoreTable::new(
            image_ids.clone(),
            performance,
            Polarity::HigherIsEasier,
            ScoreKind::Performance,
        )?),
        relevance: Some(relevance),
        outcomes: Some(OutcomeTable::new(image_ids, outcomes)?),
    })?;

    let planted_gt = sentence_groups
        .iter()
        .enumerate()
        .filter(|(_, &g)| params.is_hard(g))
        .map(|(n, _)| n)
        .collect();

    Ok(SynthBundle {
        params: params.clone(),
        bundle,
        image_groups,
        sentence_groups,
        planted_gt,
    })
}

/// Recomputes the explanation metrics with plain nested loops over string
/// ids, sharing no code with [`crate::metrics`].
///
/// `cluster_members[i]` lists the image ids of the hard cluster behind the
/// `i`-th per-cluster selection.
pub fn oracle_evaluate(
    bundle: &Bundle,
    explanation: &ExplanationSet,
    cluster_members: &[Vec<String>],
    gt: &GroundTruthSet,
) -> Result<MetricsReport> {
    let relevance = bundle
        .relevance()
        .ok_or_else(|| LbeeError::InvalidArgument("bundle has no relevance".into()))?;
    let sentence_ids = bundle.sentences().ids();
    let gt_ids: Vec<&str> = gt.members.iter().map(|&n| sentence_ids[n].as_str()).collect();
    let pairs: Vec<(&str, &str)> = relevance.pairs().collect();

    let in_gt = |id: &str| {
        let mut found = false;
        for g in &gt_ids {
            if *g == id {
                found = true;
            }
        }
        found
    };
    let relevant = |img: &str, sent: &str| {
        let mut found = false;
        for (i, s) in &pairs {
            if *i == img && *s == sent {
                found = true;
            }
        }
        found
    };

    let scored: Vec<&str> = match bundle.performance() {
        Some(p) => p.ids().iter().map(String::as_str).collect(),
        None => Vec::new(),
    };
    // relevant for at least one image that has a performance value
    let supported = |sent: &str| {
        let mut found = false;
        for (i, s) in &pairs {
            if *s == sent && scored.contains(i) {
                found = true;
            }
        }
        found
    };

    let mut per_cluster = Vec::new();
    let (mut hr_sum, mut hr_count, mut cr_sum, mut cr_count) = (0.0, 0usize, 0.0, 0usize);
    for (sel, members) in explanation.per_cluster.iter().zip(cluster_members) {
        let retained: Vec<&str> = sel.retained.iter().map(|&n| sentence_ids[n].as_str()).collect();
        let mut hr = None;
        let mut cr = None;
        if !retained.is_empty() {
            let mut hits = 0usize;
            let mut evaluable = 0usize;
            for id in &retained {
                if supported(id) {
                    evaluable += 1;
                    if in_gt(id) {
                        hits += 1;
                    }
                }
            }
            if evaluable > 0 {
                let v = hits as f64 / evaluable as f64;
                hr_sum += v;
                hr_count += 1;
                hr = Some(v);
            }

            if !members.is_empty() {
                let mut acc = 0.0;
                for id in &retained {
                    let mut covered = 0usize;
                    for m in members {
                        if relevant(m, id) {
                            covered += 1;
                        }
                    }
                    acc += covered as f64 / members.len() as f64;
                }
                let v = acc / retained.len() as f64;
                cr_sum += v;
                cr_count += 1;
                cr = Some(v);
            }
        }
        per_cluster.push(ClusterMetrics {
            hard_cluster: sel.hard_cluster,
            hr,
            cr,
        });
    }

    let mut retrieved: Vec<&str> = Vec::new();
    for sel in &explanation.per_cluster {
        for &n in &sel.retained {
            let id = sentence_ids[n].as_str();
            if !retrieved.contains(&id) {
                retrieved.push(id);
            }
        }
    }
    let mut intersection = 0usize;
    for id in &retrieved {
        if in_gt(id) {
            intersection += 1;
        }
    }
    let union = retrieved.len() + gt_ids.len() - intersection;

    Ok(MetricsReport {
        per_cluster,
        ahr: (hr_count > 0).then(|| hr_sum / hr_count as f64),
        acr: (cr_count > 0).then(|| cr_sum / cr_count as f64),
        tpr: (!gt_ids.is_empty()).then(|| intersection as f64 / gt_ids.len() as f64),
        ji: (union > 0).then(|| intersection as f64 / union as f64),
        retrieved: retrieved.len(),
        ground_truth: gt_ids.len(),
        intersection,
        undefined: Vec::new(),
    })
}
