//! Independent oracles and random-instance builders shared by the
//! integration tests. Nothing here calls into the code it checks.
#![allow(dead_code)]

use std::collections::BTreeSet;

use lbee::synth::SynthRng;
use lbee::{
    Bundle, BundleParts, ClusterSelection, EmbeddingTable, ExplanationSet, GroundTruthSet, MetricsReport, Polarity,
    RelevanceMatrix, ScoreKind, ScoreTable, SentenceCatalog,
};

pub fn rng(seed: u64) -> SynthRng {
    SynthRng::new(seed)
}

/// Uniform integer in `lo..=hi`.
pub fn range(rng: &mut SynthRng, lo: usize, hi: usize) -> usize {
    lo + ((rng.uniform() * (hi - lo + 1) as f64) as usize).min(hi - lo)
}

pub fn shuffle<T>(rng: &mut SynthRng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = range(rng, 0, i);
        items.swap(i, j);
    }
}

/// Distinct sorted sample of `m` values from `0..n`.
pub fn sample(rng: &mut SynthRng, n: usize, m: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    shuffle(rng, &mut all);
    all.truncate(m);
    all.sort_unstable();
    all
}

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i:03}")).collect()
}

// ---------------------------------------------------------------------------
// Ward oracle

/// Naive Ward agglomeration: every step recomputes all centroid distances
/// from scratch. Labels follow the same convention as the library (leaves
/// `0..n`, step `s` creates `n + s`, first label is the side containing the
/// smaller row). Returns `(cluster_a, cluster_b, distance)` per step.
pub fn naive_ward(rows: &[Vec<f64>], c: usize) -> Vec<(usize, usize, f64)> {
    let n = rows.len();
    // (label, members)
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut log = Vec::new();
    let centroid = |members: &[usize]| -> Vec<f64> {
        let d = rows[0].len();
        let mut c = vec![0.0; d];
        for &m in members {
            for k in 0..d {
                c[k] += rows[m][k];
            }
        }
        c.iter().map(|x| x / members.len() as f64).collect()
    };
    let mut step = 0;
    while clusters.len() > c {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let (ma, mb) = (&clusters[a].1, &clusters[b].1);
                let (ca, cb) = (centroid(ma), centroid(mb));
                let sq: f64 = ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum();
                let (na, nb) = (ma.len() as f64, mb.len() as f64);
                let d = (2.0 * na * nb / (na + nb) * sq).sqrt();
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let (d, a, b) = best.unwrap();
        let (la, ma) = clusters[a].clone();
        let (lb, mb) = clusters[b].clone();
        let min_a = *ma.iter().min().unwrap();
        let min_b = *mb.iter().min().unwrap();
        let (first, second) = if min_a < min_b { (la, lb) } else { (lb, la) };
        log.push((first, second, d));
        let mut merged = ma;
        merged.extend(mb);
        clusters.remove(b);
        clusters[a] = (n + step, merged);
        step += 1;
    }
    log
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

pub fn gaussian_rows(rng: &mut SynthRng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| rng.gaussian_vec(d)).collect()
}

// ---------------------------------------------------------------------------
// Metric oracle

/// A metric instance in plain dense form.
#[derive(Debug, Clone)]
pub struct MetricInstance {
    pub images: usize,
    pub sentences: usize,
    /// `relevant[x][s]`
    pub relevant: Vec<Vec<bool>>,
    /// Retained sentences per hard cluster.
    pub retained: Vec<Vec<usize>>,
    /// Member images per hard cluster.
    pub members: Vec<Vec<usize>>,
    pub gt: Vec<bool>,
    /// Sentences relevant for no image; never in `gt`.
    pub unsupported: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMetrics {
    pub ahr: Option<f64>,
    pub acr: Option<f64>,
    pub tpr: Option<f64>,
    pub ji: Option<f64>,
}

pub fn random_metric_instance(rng: &mut SynthRng) -> MetricInstance {
    let images = range(rng, 1, 200);
    let sentences = range(rng, 1, 50);
    let clusters = range(rng, 1, 8.min(images));
    let density = rng.uniform() * 0.5;
    let relevant = (0..images)
        .map(|_| (0..sentences).map(|_| rng.uniform() < density).collect())
        .collect();

    // random partition of a random image subset into non-empty clusters
    let mut order: Vec<usize> = (0..images).collect();
    shuffle(rng, &mut order);
    let used = range(rng, clusters, images);
    let mut members = vec![Vec::new(); clusters];
    for (pos, &x) in order[..used].iter().enumerate() {
        let c = if pos < clusters { pos } else { range(rng, 0, clusters - 1) };
        members[c].push(x);
    }

    let k = range(rng, 1, 5);
    let retained = (0..clusters)
        .map(|_| {
            // occasionally empty, to exercise undefined ratios
            let m = if rng.uniform() < 0.1 { 0 } else { range(rng, 1, k.min(sentences)) };
            sample(rng, sentences, m)
        })
        .collect();
    let gt_density = rng.uniform();
    let unsupported: Vec<bool> = (0..sentences).map(|_| rng.uniform() < 0.1).collect();
    let gt = unsupported.iter().map(|&u| !u && rng.uniform() < gt_density).collect();
    MetricInstance {
        images,
        sentences,
        relevant,
        retained,
        members,
        gt,
        unsupported,
    }
}

pub fn oracle_metrics(inst: &MetricInstance) -> OracleMetrics {
    let mut hr = Vec::new();
    let mut cr = Vec::new();
    for (r, m) in inst.retained.iter().zip(&inst.members) {
        if r.is_empty() {
            continue;
        }
        let (mut hits, mut evaluable) = (0.0, 0.0);
        for &s in r {
            if !inst.unsupported[s] {
                evaluable += 1.0;
                if inst.gt[s] {
                    hits += 1.0;
                }
            }
        }
        if evaluable > 0.0 {
            hr.push(hits / evaluable);
        }
        if !m.is_empty() {
            let mut acc = 0.0;
            for &s in r {
                let mut cov = 0.0;
                for &x in m {
                    if inst.relevant[x][s] {
                        cov += 1.0;
                    }
                }
                acc += cov / m.len() as f64;
            }
            cr.push(acc / r.len() as f64);
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);

    let mut in_union = vec![false; inst.sentences];
    for r in &inst.retained {
        for &s in r {
            in_union[s] = true;
        }
    }
    let (mut inter, mut union, mut gt_count) = (0usize, 0usize, 0usize);
    for (&g, &u) in inst.gt.iter().zip(&in_union) {
        if g {
            gt_count += 1;
        }
        if g && u {
            inter += 1;
        }
        if g || u {
            union += 1;
        }
    }
    OracleMetrics {
        ahr: mean(&hr),
        acr: mean(&cr),
        tpr: (gt_count > 0).then(|| inter as f64 / gt_count as f64),
        ji: (union > 0).then(|| inter as f64 / union as f64),
    }
}

/// The same instance in library types.
pub fn library_inputs(inst: &MetricInstance) -> (ExplanationSet, RelevanceMatrix, GroundTruthSet) {
    let selections = inst
        .retained
        .iter()
        .enumerate()
        .map(|(i, r)| ClusterSelection {
            hard_cluster: i,
            retained: r.clone(),
            keys: vec![0.0; r.len()],
            shortfall: false,
        })
        .collect();
    let mut positives = BTreeSet::new();
    for x in 0..inst.images {
        for s in 0..inst.sentences {
            if inst.relevant[x][s] {
                positives.insert((x, s));
            }
        }
    }
    let relevance = RelevanceMatrix::empty(ids("x", inst.images), ids("s", inst.sentences))
        .unwrap()
        .with_positives(positives);
    let gt = GroundTruthSet {
        beta: 0.0,
        members: (0..inst.sentences).filter(|&s| inst.gt[s]).collect(),
        unsupported: (0..inst.sentences).filter(|&s| inst.unsupported[s]).collect(),
    };
    (lbee::union_selections(selections), relevance, gt)
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

/// JI ≤ TPR whenever both are defined, and every defined value in [0, 1].
pub fn metrics_are_sane(m: &MetricsReport) -> Result<(), String> {
    let mut values = vec![m.ahr, m.acr, m.tpr, m.ji];
    for c in &m.per_cluster {
        values.push(c.hr);
        values.push(c.cr);
    }
    for v in values.into_iter().flatten() {
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("metric {v} outside [0, 1]"));
        }
    }
    if let (Some(ji), Some(tpr)) = (m.ji, m.tpr) {
        if ji > tpr {
            return Err(format!("JI {ji} > TPR {tpr}"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Random bundles

/// A bundle with Gaussian embeddings, random scores and random relevance.
pub fn random_bundle(rng: &mut SynthRng) -> Bundle {
    let n_img = range(rng, 20, 120);
    let n_sent = range(rng, 5, 40);
    let dim = range(rng, 4, 16);
    let image_ids = ids("img", n_img);
    let sentence_ids = ids("s", n_sent);
    let to_f32 = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.into_iter()
            .map(|r| r.into_iter().map(|x| f64::from(x as f32)).collect())
            .collect()
    };
    let images = EmbeddingTable::from_rows(image_ids.clone(), &to_f32(gaussian_rows(rng, n_img, dim))).unwrap();
    let sentences = EmbeddingTable::from_rows(sentence_ids.clone(), &to_f32(gaussian_rows(rng, n_sent, dim))).unwrap();
    let confidence: Vec<f64> = (0..n_img).map(|_| rng.uniform()).collect();
    let performance: Vec<f64> = (0..n_img).map(|_| rng.uniform()).collect();
    let density = 0.05 + 0.4 * rng.uniform();
    let mut positives = BTreeSet::new();
    for x in 0..n_img {
        for s in 0..n_sent {
            if rng.uniform() < density {
                positives.insert((x, s));
            }
        }
    }
    let relevance = RelevanceMatrix::empty(image_ids.clone(), sentence_ids.clone())
        .unwrap()
        .with_positives(positives);
    Bundle::from_parts(BundleParts {
        images,
        sentences,
        catalog: SentenceCatalog::new(sentence_ids.clone(), sentence_ids.iter().map(|s| format!("text {s}")).collect())
            .unwrap(),
        confidence: ScoreTable::new(image_ids.clone(), confidence, Polarity::HigherIsHarder, ScoreKind::Confidence)
            .unwrap(),
        performance: Some(
            ScoreTable::new(image_ids, performance, Polarity::HigherIsEasier, ScoreKind::Performance).unwrap(),
        ),
        relevance: Some(relevance),
        outcomes: None,
    })
    .unwrap()
}

/// Rounds every value to a multiple of `5 / 4096`, so that scaling by 3.7
/// stays exact in single precision.
pub fn quantize_for_scaling(table: &EmbeddingTable) -> EmbeddingTable {
    let q = 5.0 / 4096.0;
    let data: Vec<f64> = table.data().iter().map(|x| (x / q).round() * q).collect();
    EmbeddingTable::new(table.ids().to_vec(), table.dim(), data).unwrap()
}

// ---------------------------------------------------------------------------
// Precision at K

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Exact expected P@K when `bins` predicted partitions each expose their
/// top `k` of a uniformly shuffled population of `population` items, and a
/// single ground-truth partition of size `gt` is evaluated. The counts of
/// ground-truth items per top-`k` block follow a multivariate
/// hypergeometric law; enumerate it.
pub fn expected_precision_random(population: u64, bins: usize, k: u64, gt: u64) -> f64 {
    let rest = population - bins as u64 * k;
    let total = binomial(population, gt);
    let mut expectation = 0.0;
    let mut counts = vec![0u64; bins];
    loop {
        let used: u64 = counts.iter().sum();
        if used <= gt && gt - used <= rest {
            let mut weight = binomial(rest, gt - used);
            for &c in &counts {
                weight *= binomial(k, c);
            }
            let best = *counts.iter().max().unwrap();
            expectation += weight / total * best as f64 / k as f64;
        }
        // odometer over 0..=k per bin
        let mut i = 0;
        loop {
            if i == bins {
                return expectation;
            }
            counts[i] += 1;
            if counts[i] <= k {
                break;
            }
            counts[i] = 0;
            i += 1;
        }
    }
}
