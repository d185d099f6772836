//! On-disk bundle formats and the validated in-memory tables built from them.
//!
//! A bundle is a directory holding:
//!
//! | file | content |
//! |------|---------|
//! | `images.emb`, `sentences.emb` | `LBEE` magic, u32 version, u64 rows, u32 dim, row-major f32 (all little-endian) |
//! | `images.ids`, `sentences.ids` | one UTF-8 id per line, same order as the matrix rows |
//! | `sentences.txt` | CSV `sentence_id,text` |
//! | `confidence.csv`, `performance.csv` | CSV `image_id,value` |
//! | `relevance.csv` | CSV `image_id,sentence_id`, positive pairs only |
//! | `outcomes.csv` | CSV `image_id,outcome` |
//! | `bundle.json` | score kinds and polarities, optional outcomes file name |
//!
//! `performance.csv`, `relevance.csv` and the outcomes file are optional.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LbeeError, Result};
use crate::linalg;

pub const EMB_MAGIC: [u8; 4] = *b"LBEE";
pub const EMB_VERSION: u32 = 1;
const EMB_HEADER_LEN: usize = 4 + 4 + 8 + 4;

pub const IMAGES_EMB: &str = "images.emb";
pub const SENTENCES_EMB: &str = "sentences.emb";
pub const IMAGES_IDS: &str = "images.ids";
pub const SENTENCES_IDS: &str = "sentences.ids";
pub const SENTENCES_TXT: &str = "sentences.txt";
pub const CONFIDENCE_CSV: &str = "confidence.csv";
pub const PERFORMANCE_CSV: &str = "performance.csv";
pub const RELEVANCE_CSV: &str = "relevance.csv";
pub const MANIFEST_JSON: &str = "bundle.json";
pub const DEFAULT_OUTCOMES_CSV: &str = "outcomes.csv";

fn index_ids(ids: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if id.is_empty() {
            return Err(LbeeError::Format("empty identifier".into()));
        }
        if index.insert(id.clone(), i).is_some() {
            return Err(LbeeError::DuplicateId(id.clone()));
        }
    }
    Ok(index)
}

// ---------------------------------------------------------------------------
// Embeddings

/// Identified rows of real vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
    normalized: bool,
}

impl EmbeddingTable {
    /// Builds a raw (unnormalized) table from row-major data.
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(LbeeError::Format("embedding dimension must be at least 1".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(LbeeError::Format(format!(
                "{} ids with dim {dim} need {} values, got {}",
                ids.len(),
                ids.len() * dim,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(LbeeError::Format(format!(
                "non-finite embedding entry in row '{}'",
                ids[pos / dim]
            )));
        }
        let index = index_ids(&ids)?;
        Ok(Self {
            ids,
            index,
            dim,
            data,
            normalized: false,
        })
    }

    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(LbeeError::DimensionMismatch {
                what: "embedding row".into(),
                expected: dim,
                found: bad.len(),
            });
        }
        Self::new(ids, dim, rows.concat())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// New table holding the given rows, in the order given.
    pub fn select_rows(&self, rows: &[usize]) -> EmbeddingTable {
        let ids: Vec<String> = rows.iter().map(|&r| self.ids[r].clone()).collect();
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        let index = ids.iter().cloned().zip(0..).collect();
        EmbeddingTable {
            ids,
            index,
            dim: self.dim,
            data,
            normalized: self.normalized,
        }
    }

    /// Every entry multiplied by `factor`; the result is marked raw.
    pub fn scaled(&self, factor: f64) -> EmbeddingTable {
        EmbeddingTable {
            ids: self.ids.clone(),
            index: self.index.clone(),
            dim: self.dim,
            data: self.data.iter().map(|x| x * factor).collect(),
            normalized: false,
        }
    }
}

/// Divides every row by its L2 norm.
pub fn normalize_embeddings(table: &EmbeddingTable) -> Result<EmbeddingTable> {
    let mut data = Vec::with_capacity(table.data.len());
    for (i, row) in table.rows().enumerate() {
        let unit = linalg::normalized(row).ok_or_else(|| LbeeError::ZeroNormRow(table.ids[i].clone()))?;
        data.extend(unit);
    }
    Ok(EmbeddingTable {
        ids: table.ids.clone(),
        index: table.index.clone(),
        dim: table.dim,
        data,
        normalized: true,
    })
}

/// Reads an `.emb` matrix; returns `(rows, dim, values)`.
pub fn read_emb(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let file = File::open(path).map_err(|e| LbeeError::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| LbeeError::io(path, e))?;
    let bad = |msg: &str| LbeeError::Format(format!("{}: {msg}", path.display()));

    if bytes.len() < EMB_HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if bytes[0..4] != EMB_MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != EMB_VERSION {
        return Err(bad(&format!("unsupported format version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(bad("dimension must be at least 1"));
    }
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| bad("matrix size overflows"))?;
    let payload = &bytes[EMB_HEADER_LEN..];
    if payload.len() != expected {
        return Err(bad(&format!(
            "expected {expected} payload bytes for {rows}x{dim}, found {}",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows, dim, values))
}

pub fn write_emb(path: &Path, rows: usize, dim: usize, values: &[f32]) -> Result<()> {
    assert_eq!(values.len(), rows * dim, "matrix shape does not match data");
    let file = File::create(path).map_err(|e| LbeeError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| LbeeError::io(path, e);
    w.write_all(&EMB_MAGIC).map_err(io)?;
    w.write_all(&EMB_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(rows as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(dim as u32).to_le_bytes()).map_err(io)?;
    for v in values {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_ids(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| LbeeError::io(path, e))?;
    let body = text.strip_suffix('\n').unwrap_or(&text);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split('\n')
        .map(|line| {
            let id = line.strip_suffix('\r').unwrap_or(line);
            if id.is_empty() {
                Err(LbeeError::Format(format!("{}: empty identifier line", path.display())))
            } else {
                Ok(id.to_string())
            }
        })
        .collect()
}

pub fn write_ids(path: &Path, ids: &[String]) -> Result<()> {
    let mut text = String::new();
    for id in ids {
        text.push_str(id);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| LbeeError::io(path, e))
}

/// Loads an embedding table from an `.emb` file and its `.ids` companion.
pub fn read_embedding_table(emb: &Path, ids: &Path) -> Result<EmbeddingTable> {
    let (rows, dim, values) = read_emb(emb)?;
    let ids = read_ids(ids)?;
    if ids.len() != rows {
        return Err(LbeeError::Format(format!(
            "{} has {rows} rows but its id file lists {}",
            emb.display(),
            ids.len()
        )));
    }
    EmbeddingTable::new(ids, dim, values.into_iter().map(f64::from).collect())
}

/// Writes the table as f32; raw tables loaded from disk round-trip exactly.
pub fn write_embedding_table(table: &EmbeddingTable, emb: &Path, ids: &Path) -> Result<()> {
    let values: Vec<f32> = table.data.iter().map(|&x| x as f32).collect();
    write_emb(emb, table.len(), table.dim, &values)?;
    write_ids(ids, &table.ids)
}

// ---------------------------------------------------------------------------
// Scores

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    HigherIsHarder,
    HigherIsEasier,
}

impl Polarity {
    pub fn flipped(self) -> Self {
        match self {
            Polarity::HigherIsHarder => Polarity::HigherIsEasier,
            Polarity::HigherIsEasier => Polarity::HigherIsHarder,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Confidence,
    Performance,
}

/// One finite scalar per image.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    ids: Vec<String>,
    values: Vec<f64>,
    polarity: Polarity,
    kind: ScoreKind,
}

impl ScoreTable {
    pub fn new(ids: Vec<String>, values: Vec<f64>, polarity: Polarity, kind: ScoreKind) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(LbeeError::LengthMismatch {
                left: ids.len(),
                right: values.len(),
            });
        }
        index_ids(&ids)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LbeeError::Format(format!("non-finite score for '{}'", ids[i])));
        }
        Ok(Self {
            ids,
            values,
            polarity,
            kind,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.ids.iter().map(String::as_str).zip(self.values.iter().copied())
    }

    pub fn to_map(&self) -> HashMap<&str, f64> {
        self.iter().collect()
    }
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers().map_err(|e| LbeeError::csv(path, e))?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(LbeeError::Format(format!(
            "{}: expected header '{}', found '{}'",
            path.display(),
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn read_two_column_csv(path: &Path, header: [&str; 2]) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| LbeeError::csv(path, e))?;
    check_header(path, &mut rdr, &header)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| LbeeError::csv(path, e))?;
        if record.len() != 2 {
            return Err(LbeeError::Format(format!(
                "{}: expected 2 fields, found {}",
                path.display(),
                record.len()
            )));
        }
        out.push((record[0].to_string(), record[1].to_string()));
    }
    Ok(out)
}

fn write_two_column_csv<'a>(
    path: &Path,
    header: [&str; 2],
    rows: impl IntoIterator<Item = (&'a str, String)>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| LbeeError::csv(path, e))?;
    w.write_record(header).map_err(|e| LbeeError::csv(path, e))?;
    for (a, b) in rows {
        w.write_record([a, b.as_str()]).map_err(|e| LbeeError::csv(path, e))?;
    }
    w.flush().map_err(|e| LbeeError::io(path, e))
}

pub fn read_score_csv(path: &Path, polarity: Polarity, kind: ScoreKind) -> Result<ScoreTable> {
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (id, raw) in read_two_column_csv(path, ["image_id", "value"])? {
        let v = raw.trim().parse::<f64>().map_err(|_| {
            LbeeError::Format(format!("{}: cannot parse value '{raw}' for '{id}'", path.display()))
        })?;
        ids.push(id);
        values.push(v);
    }
    ScoreTable::new(ids, values, polarity, kind)
}

pub fn write_score_csv(path: &Path, scores: &ScoreTable) -> Result<()> {
    // `{:?}` prints the shortest representation that parses back to the same f64
    write_two_column_csv(
        path,
        ["image_id", "value"],
        scores.iter().map(|(id, v)| (id, format!("{v:?}"))),
    )
}

// ---------------------------------------------------------------------------
// Relevance

/// Sparse binary image × sentence relevance; absent pairs are irrelevant.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMatrix {
    image_ids: Vec<String>,
    sentence_ids: Vec<String>,
    image_index: HashMap<String, usize>,
    sentence_index: HashMap<String, usize>,
    positives: BTreeSet<(usize, usize)>,
}

impl RelevanceMatrix {
    pub fn new<I, S, T>(image_ids: Vec<String>, sentence_ids: Vec<String>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut m = Self::empty(image_ids, sentence_ids)?;
        for (img, sent) in pairs {
            let (img, sent) = (img.as_ref(), sent.as_ref());
            let i = m.image_index(img).ok_or_else(|| LbeeError::UnknownId(img.to_string()))?;
            let s = m
                .sentence_index(sent)
                .ok_or_else(|| LbeeError::UnknownId(sent.to_string()))?;
            if !m.positives.insert((i, s)) {
                return Err(LbeeError::DuplicateId(format!("({img},{sent})")));
            }
        }
        Ok(m)
    }

    pub fn empty(image_ids: Vec<String>, sentence_ids: Vec<String>) -> Result<Self> {
        let image_index = index_ids(&image_ids)?;
        let sentence_index = index_ids(&sentence_ids)?;
        Ok(Self {
            image_ids,
            sentence_ids,
            image_index,
            sentence_index,
            positives: BTreeSet::new(),
        })
    }

    /// Same universe as `self`, holding exactly `positives` (index pairs).
    pub fn with_positives(&self, positives: BTreeSet<(usize, usize)>) -> Self {
        debug_assert!(positives
            .iter()
            .all(|&(i, s)| i < self.image_ids.len() && s < self.sentence_ids.len()));
        Self {
            positives,
            ..self.clone_universe()
        }
    }

    fn clone_universe(&self) -> Self {
        Self {
            image_ids: self.image_ids.clone(),
            sentence_ids: self.sentence_ids.clone(),
            image_index: self.image_index.clone(),
            sentence_index: self.sentence_index.clone(),
            positives: BTreeSet::new(),
        }
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    pub fn sentence_ids(&self) -> &[String] {
        &self.sentence_ids
    }

    pub fn image_index(&self, id: &str) -> Option<usize> {
        self.image_index.get(id).copied()
    }

    pub fn sentence_index(&self, id: &str) -> Option<usize> {
        self.sentence_index.get(id).copied()
    }

    pub fn positives(&self) -> &BTreeSet<(usize, usize)> {
        &self.positives
    }

    pub fn contains(&self, image: usize, sentence: usize) -> bool {
        self.positives.contains(&(image, sentence))
    }

    pub fn is_relevant(&self, image: &str, sentence: &str) -> bool {
        match (self.image_index(image), self.sentence_index(sentence)) {
            (Some(i), Some(s)) => self.contains(i, s),
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    /// Number of cells in the dense image × sentence universe.
    pub fn universe_size(&self) -> usize {
        self.image_ids.len() * self.sentence_ids.len()
    }

    pub fn same_universe(&self, other: &RelevanceMatrix) -> bool {
        self.image_ids == other.image_ids && self.sentence_ids == other.sentence_ids
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.positives
            .iter()
            .map(|&(i, s)| (self.image_ids[i].as_str(), self.sentence_ids[s].as_str()))
    }
}

pub fn read_relevance_csv(path: &Path, image_ids: &[String], sentence_ids: &[String]) -> Result<RelevanceMatrix> {
    let pairs = read_two_column_csv(path, ["image_id", "sentence_id"])?;
    RelevanceMatrix::new(image_ids.to_vec(), sentence_ids.to_vec(), pairs)
}

pub fn write_relevance_csv(path: &Path, relevance: &RelevanceMatrix) -> Result<()> {
    write_two_column_csv(
        path,
        ["image_id", "sentence_id"],
        relevance.pairs().map(|(i, s)| (i, s.to_string())),
    )
}

// ---------------------------------------------------------------------------
// Sentences and outcomes

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceCatalog {
    ids: Vec<String>,
    texts: Vec<String>,
}

impl SentenceCatalog {
    pub fn new(ids: Vec<String>, texts: Vec<String>) -> Result<Self> {
        if ids.len() != texts.len() {
            return Err(LbeeError::LengthMismatch {
                left: ids.len(),
                right: texts.len(),
            });
        }
        index_ids(&ids)?;
        if let Some(i) = texts.iter().position(|t| t.is_empty()) {
            return Err(LbeeError::Format(format!("sentence '{}' has empty text", ids[i])));
        }
        Ok(Self { ids, texts })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Reorders the catalog to follow `order`, which must be a permutation
    /// of its ids.
    fn aligned_to(&self, order: &[String]) -> Result<Self> {
        let lookup: HashMap<&str, &str> = self
            .ids
            .iter()
            .map(String::as_str)
            .zip(self.texts.iter().map(String::as_str))
            .collect();
        let mut texts = Vec::with_capacity(order.len());
        for id in order {
            let text = lookup.get(id.as_str()).ok_or_else(|| LbeeError::UnknownId(id.clone()))?;
            texts.push(text.to_string());
        }
        if self.ids.len() != order.len() {
            let known: HashSet<&str> = order.iter().map(String::as_str).collect();
            let extra = self.ids.iter().find(|id| !known.contains(id.as_str())).unwrap();
            return Err(LbeeError::UnknownId(extra.clone()));
        }
        Self::new(order.to_vec(), texts)
    }
}

pub fn read_sentence_catalog(path: &Path) -> Result<SentenceCatalog> {
    let (ids, texts) = read_two_column_csv(path, ["sentence_id", "text"])?.into_iter().unzip();
    SentenceCatalog::new(ids, texts)
}

pub fn write_sentence_catalog(path: &Path, catalog: &SentenceCatalog) -> Result<()> {
    write_two_column_csv(
        path,
        ["sentence_id", "text"],
        catalog
            .ids
            .iter()
            .map(String::as_str)
            .zip(catalog.texts.iter().cloned()),
    )
}

/// Per-image classification outcome, used for outcome-based splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    FalsePositive,
    FalseNegative,
}

impl FromStr for Outcome {
    type Err = LbeeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "correct" => Ok(Outcome::Correct),
            "false_positive" => Ok(Outcome::FalsePositive),
            "false_negative" => Ok(Outcome::FalseNegative),
            other => Err(LbeeError::UnknownOutcomeLabel(other.to_string())),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Correct => "correct",
            Outcome::FalsePositive => "false_positive",
            Outcome::FalseNegative => "false_negative",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    ids: Vec<String>,
    outcomes: Vec<Outcome>,
}

impl OutcomeTable {
    pub fn new(ids: Vec<String>, outcomes: Vec<Outcome>) -> Result<Self> {
        if ids.len() != outcomes.len() {
            return Err(LbeeError::LengthMismatch {
                left: ids.len(),
                right: outcomes.len(),
            });
        }
        index_ids(&ids)?;
        Ok(Self { ids, outcomes })
    }

    /// Parses textual labels; fails with `UnknownOutcomeLabel` on anything
    /// other than `correct`, `false_positive`, `false_negative`.
    pub fn from_labels<S: AsRef<str>>(ids: Vec<String>, labels: &[S]) -> Result<Self> {
        let outcomes = labels
            .iter()
            .map(|l| l.as_ref().parse())
            .collect::<Result<Vec<Outcome>>>()?;
        Self::new(ids, outcomes)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Outcome)> + '_ {
        self.ids.iter().map(String::as_str).zip(self.outcomes.iter().copied())
    }
}

pub fn read_outcomes_csv(path: &Path) -> Result<OutcomeTable> {
    let (ids, labels): (Vec<String>, Vec<String>) =
        read_two_column_csv(path, ["image_id", "outcome"])?.into_iter().unzip();
    OutcomeTable::from_labels(ids, &labels)
}

pub fn write_outcomes_csv(path: &Path, outcomes: &OutcomeTable) -> Result<()> {
    write_two_column_csv(
        path,
        ["image_id", "outcome"],
        outcomes.iter().map(|(id, o)| (id, o.to_string())),
    )
}

// ---------------------------------------------------------------------------
// Bundle

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreDecl {
    pub kind: ScoreKind,
    pub polarity: Polarity,
}

/// Contents of `bundle.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub confidence: ScoreDecl,
    #[serde(default)]
    pub performance: Option<ScoreDecl>,
    /// File name of the outcome labels, relative to the bundle directory.
    #[serde(default)]
    pub outcomes: Option<String>,
}

fn default_format_version() -> u32 {
    1
}

/// Unvalidated bundle contents. Turn into a [`Bundle`] with
/// [`Bundle::from_parts`].
#[derive(Debug, Clone, PartialEq)]
pub struct BundleParts {
    pub images: EmbeddingTable,
    pub sentences: EmbeddingTable,
    pub catalog: SentenceCatalog,
    pub confidence: ScoreTable,
    pub performance: Option<ScoreTable>,
    pub relevance: Option<RelevanceMatrix>,
    pub outcomes: Option<OutcomeTable>,
}

/// A validated bundle. Keeps the raw embeddings for re-serialization and the
/// normalized copies every downstream stage works on.
#[derive(Debug, Clone)]
pub struct Bundle {
    parts: BundleParts,
    images: EmbeddingTable,
    sentences: EmbeddingTable,
}

impl Bundle {
    pub fn from_parts(parts: BundleParts) -> Result<Self> {
        let BundleParts {
            images,
            sentences,
            catalog,
            confidence,
            performance,
            relevance,
            outcomes,
        } = parts;

        if images.dim() != sentences.dim() {
            return Err(LbeeError::DimensionMismatch {
                what: "sentence embeddings".into(),
                expected: images.dim(),
                found: sentences.dim(),
            });
        }
        let catalog = catalog.aligned_to(sentences.ids())?;

        let check_ids = |ids: &[String]| -> Result<()> {
            match ids.iter().find(|id| images.index_of(id).is_none()) {
                Some(id) => Err(LbeeError::UnknownId(id.clone())),
                None => Ok(()),
            }
        };
        check_ids(confidence.ids())?;
        if let Some(p) = &performance {
            check_ids(p.ids())?;
        }
        if let Some(o) = &outcomes {
            check_ids(o.ids())?;
        }
        if let Some(r) = &relevance {
            if r.image_ids() != images.ids() || r.sentence_ids() != sentences.ids() {
                return Err(LbeeError::IdUniverseMismatch);
            }
        }

        let images_n = normalize_embeddings(&images)?;
        let sentences_n = normalize_embeddings(&sentences)?;
        Ok(Self {
            parts: BundleParts {
                images,
                sentences,
                catalog,
                confidence,
                performance,
                relevance,
                outcomes,
            },
            images: images_n,
            sentences: sentences_n,
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST_JSON);
        let manifest_text = fs::read_to_string(&manifest_path).map_err(|e| LbeeError::io(&manifest_path, e))?;
        let manifest: BundleManifest = serde_json::from_str(&manifest_text)
            .map_err(|e| LbeeError::Format(format!("{}: {e}", manifest_path.display())))?;
        if manifest.format_version != 1 {
            return Err(LbeeError::Format(format!(
                "unsupported bundle format version {}",
                manifest.format_version
            )));
        }

        let images = read_embedding_table(&dir.join(IMAGES_EMB), &dir.join(IMAGES_IDS))?;
        let sentences = read_embedding_table(&dir.join(SENTENCES_EMB), &dir.join(SENTENCES_IDS))?;
        if images.dim() != sentences.dim() {
            return Err(LbeeError::DimensionMismatch {
                what: "sentence embeddings".into(),
                expected: images.dim(),
                found: sentences.dim(),
            });
        }
        let catalog = read_sentence_catalog(&dir.join(SENTENCES_TXT))?;
        let confidence = read_score_csv(
            &dir.join(CONFIDENCE_CSV),
            manifest.confidence.polarity,
            manifest.confidence.kind,
        )?;

        let performance_path = dir.join(PERFORMANCE_CSV);
        let performance = match manifest.performance {
            Some(decl) => Some(read_score_csv(&performance_path, decl.polarity, decl.kind)?),
            None if performance_path.exists() => {
                return Err(LbeeError::Format(format!(
                    "{PERFORMANCE_CSV} present but not declared in {MANIFEST_JSON}"
                )))
            }
            None => None,
        };

        let relevance_path = dir.join(RELEVANCE_CSV);
        let relevance = if relevance_path.exists() {
            Some(read_relevance_csv(&relevance_path, images.ids(), sentences.ids())?)
        } else {
            None
        };

        let outcomes = match &manifest.outcomes {
            Some(name) => Some(read_outcomes_csv(&dir.join(name))?),
            None => None,
        };

        Self::from_parts(BundleParts {
            images,
            sentences,
            catalog,
            confidence,
            performance,
            relevance,
            outcomes,
        })
    }

    /// Writes every file of the bundle into `dir` (created if needed).
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| LbeeError::io(dir, e))?;
        let p = &self.parts;
        write_embedding_table(&p.images, &dir.join(IMAGES_EMB), &dir.join(IMAGES_IDS))?;
        write_embedding_table(&p.sentences, &dir.join(SENTENCES_EMB), &dir.join(SENTENCES_IDS))?;
        write_sentence_catalog(&dir.join(SENTENCES_TXT), &p.catalog)?;
        write_score_csv(&dir.join(CONFIDENCE_CSV), &p.confidence)?;
        if let Some(perf) = &p.performance {
            write_score_csv(&dir.join(PERFORMANCE_CSV), perf)?;
        }
        if let Some(rel) = &p.relevance {
            write_relevance_csv(&dir.join(RELEVANCE_CSV), rel)?;
        }
        if let Some(out) = &p.outcomes {
            write_outcomes_csv(&dir.join(DEFAULT_OUTCOMES_CSV), out)?;
        }
        let manifest_path = dir.join(MANIFEST_JSON);
        let mut json = serde_json::to_string_pretty(&self.manifest())?;
        json.push('\n');
        fs::write(&manifest_path, json).map_err(|e| LbeeError::io(&manifest_path, e))
    }

    pub fn manifest(&self) -> BundleManifest {
        let p = &self.parts;
        BundleManifest {
            format_version: 1,
            confidence: ScoreDecl {
                kind: p.confidence.kind(),
                polarity: p.confidence.polarity(),
            },
            performance: p.performance.as_ref().map(|s| ScoreDecl {
                kind: s.kind(),
                polarity: s.polarity(),
            }),
            outcomes: p.outcomes.as_ref().map(|_| DEFAULT_OUTCOMES_CSV.to_string()),
        }
    }

    pub fn parts(&self) -> &BundleParts {
        &self.parts
    }

    pub fn into_parts(self) -> BundleParts {
        self.parts
    }

    /// Normalized image embeddings.
    pub fn images(&self) -> &EmbeddingTable {
        &self.images
    }

    /// Normalized sentence embeddings.
    pub fn sentences(&self) -> &EmbeddingTable {
        &self.sentences
    }

    pub fn raw_images(&self) -> &EmbeddingTable {
        &self.parts.images
    }

    pub fn raw_sentences(&self) -> &EmbeddingTable {
        &self.parts.sentences
    }

    pub fn catalog(&self) -> &SentenceCatalog {
        &self.parts.catalog
    }

    pub fn confidence(&self) -> &ScoreTable {
        &self.parts.confidence
    }

    pub fn performance(&self) -> Option<&ScoreTable> {
        self.parts.performance.as_ref()
    }

    pub fn relevance(&self) -> Option<&RelevanceMatrix> {
        self.parts.relevance.as_ref()
    }

    pub fn outcomes(&self) -> Option<&OutcomeTable> {
        self.parts.outcomes.as_ref()
    }
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<Bundle> {
    Bundle::load(dir.as_ref())
}
