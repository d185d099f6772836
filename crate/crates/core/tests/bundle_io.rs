mod common;

use std::fs;
use std::path::Path;

use common::*;
use lbee::{load_bundle, normalize_embeddings, EmbeddingTable, LbeeError, Polarity};
use proptest::prelude::*;

/// Encodes an embedding file byte by byte, independently of the library.
fn emb_bytes(rows: u64, dim: u32, values: &[f32]) -> Vec<u8> {
    let mut out = b"LBEE".to_vec();
    out.extend(1u32.to_le_bytes());
    out.extend(rows.to_le_bytes());
    out.extend(dim.to_le_bytes());
    for v in values {
        out.extend(v.to_le_bytes());
    }
    out
}

fn lines(ids: &[&str]) -> String {
    ids.iter().map(|s| format!("{s}\n")).collect()
}

/// 4 images and 3 sentences of dimension `d_img` / `d_sent`, with scores
/// for `score_ids`.
fn toy_bundle(dir: &Path, d_img: u32, d_sent: u32, score_ids: &[&str]) {
    let images = ["x1", "x2", "x3", "x4"];
    let sentences = ["s1", "s2", "s3"];
    let img_vals: Vec<f32> = (0..4 * d_img).map(|i| (i % 7) as f32 + 1.0).collect();
    let sent_vals: Vec<f32> = (0..3 * d_sent).map(|i| (i % 5) as f32 - 1.5).collect();
    fs::write(dir.join("images.emb"), emb_bytes(4, d_img, &img_vals)).unwrap();
    fs::write(dir.join("sentences.emb"), emb_bytes(3, d_sent, &sent_vals)).unwrap();
    fs::write(dir.join("images.ids"), lines(&images)).unwrap();
    fs::write(dir.join("sentences.ids"), lines(&sentences)).unwrap();
    fs::write(
        dir.join("sentences.txt"),
        "sentence_id,text\ns1,a dark street\ns2,\"rain, heavy\"\ns3,fog\n",
    )
    .unwrap();
    let scores: String = score_ids
        .iter()
        .enumerate()
        .map(|(i, id)| format!("{id},{}\n", 0.1 * (i + 1) as f64))
        .collect();
    fs::write(dir.join("confidence.csv"), format!("image_id,value\n{scores}")).unwrap();
    fs::write(dir.join("performance.csv"), format!("image_id,value\n{scores}")).unwrap();
    fs::write(dir.join("relevance.csv"), "image_id,sentence_id\nx1,s1\nx2,s1\nx4,s3\n").unwrap();
    fs::write(dir.join("outcomes.csv"), "image_id,outcome\nx1,correct\nx2,false_positive\n").unwrap();
    fs::write(
        dir.join("bundle.json"),
        r#"{
  "confidence": {"kind": "confidence", "polarity": "higher_is_harder"},
  "performance": {"kind": "performance", "polarity": "higher_is_easier"},
  "outcomes": "outcomes.csv"
}"#,
    )
    .unwrap();
}

#[test]
fn toy_bundle_loads() {
    let tmp = tempfile::tempdir().unwrap();
    toy_bundle(tmp.path(), 8, 8, &["x1", "x2", "x3", "x4"]);
    let b = load_bundle(tmp.path()).unwrap();
    assert_eq!(b.images().len(), 4);
    assert_eq!(b.sentences().len(), 3);
    assert_eq!(b.images().dim(), 8);
    assert_eq!(b.catalog().texts()[1], "rain, heavy");
    assert_eq!(b.confidence().polarity(), Polarity::HigherIsHarder);
    assert_eq!(b.performance().unwrap().polarity(), Polarity::HigherIsEasier);
    assert_eq!(b.relevance().unwrap().len(), 3);
    assert!(b.relevance().unwrap().is_relevant("x4", "s3"));
    for row in b.images().rows() {
        let norm: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
    // raw values survive exactly
    assert_eq!(b.raw_images().row(0)[0], 1.0);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    toy_bundle(tmp.path(), 16, 8, &["x1", "x2", "x3", "x4"]);
    assert!(matches!(
        load_bundle(tmp.path()),
        Err(LbeeError::DimensionMismatch { expected: 16, found: 8, .. })
    ));
}

#[test]
fn unknown_score_id_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    toy_bundle(tmp.path(), 8, 8, &["x1", "x99"]);
    match load_bundle(tmp.path()) {
        Err(LbeeError::UnknownId(id)) => assert_eq!(id, "x99"),
        other => panic!("expected UnknownId, got {other:?}"),
    }
}

#[test]
fn missing_and_malformed_files() {
    let tmp = tempfile::tempdir().unwrap();
    toy_bundle(tmp.path(), 8, 8, &["x1"]);
    fs::remove_file(tmp.path().join("sentences.txt")).unwrap();
    assert!(matches!(load_bundle(tmp.path()), Err(LbeeError::MissingFile(_))));

    toy_bundle(tmp.path(), 8, 8, &["x1"]);
    let mut bytes = fs::read(tmp.path().join("images.emb")).unwrap();
    bytes.pop();
    fs::write(tmp.path().join("images.emb"), &bytes).unwrap();
    assert!(matches!(load_bundle(tmp.path()), Err(LbeeError::Format(_))));

    toy_bundle(tmp.path(), 8, 8, &["x1"]);
    fs::write(tmp.path().join("images.ids"), "x1\nx2\nx2\nx4\n").unwrap();
    assert!(matches!(load_bundle(tmp.path()), Err(LbeeError::DuplicateId(id)) if id == "x2"));

    toy_bundle(tmp.path(), 8, 8, &["x1"]);
    fs::write(tmp.path().join("outcomes.csv"), "image_id,outcome\nx1,maybe\n").unwrap();
    assert!(matches!(load_bundle(tmp.path()), Err(LbeeError::UnknownOutcomeLabel(l)) if l == "maybe"));

    toy_bundle(tmp.path(), 8, 8, &["x1"]);
    fs::write(tmp.path().join("relevance.csv"), "image_id,sentence_id\nx1,s9\n").unwrap();
    assert!(matches!(load_bundle(tmp.path()), Err(LbeeError::UnknownId(id)) if id == "s9"));
}

#[test]
fn zero_row_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    toy_bundle(tmp.path(), 2, 2, &["x1"]);
    fs::write(tmp.path().join("images.emb"), emb_bytes(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0])).unwrap();
    assert!(matches!(load_bundle(tmp.path()), Err(LbeeError::ZeroNormRow(id)) if id == "x2"));
}

#[test]
fn round_trip_is_bit_exact() {
    let tmp = tempfile::tempdir().unwrap();
    toy_bundle(tmp.path(), 8, 8, &["x1", "x2", "x3", "x4"]);
    let a = load_bundle(tmp.path()).unwrap();
    let out = tmp.path().join("copy");
    a.write(&out).unwrap();
    let b = load_bundle(&out).unwrap();
    assert_eq!(a.parts(), b.parts());
    for f in ["images.emb", "sentences.emb", "images.ids"] {
        assert_eq!(fs::read(tmp.path().join(f)).unwrap(), fs::read(out.join(f)).unwrap(), "{f}");
    }

    let synth = lbee::generate_benchmark(&lbee::SynthParams::default()).unwrap();
    let dir = tmp.path().join("synth");
    synth.bundle.write(&dir).unwrap();
    assert_eq!(load_bundle(&dir).unwrap().parts(), synth.bundle.parts());
}

fn table(rows: &[Vec<f64>]) -> EmbeddingTable {
    EmbeddingTable::from_rows(ids("r", rows.len()), rows).unwrap()
}

#[test]
fn normalization_examples() {
    let t = normalize_embeddings(&table(&[vec![3.0, 4.0], vec![1.0, 0.0]])).unwrap();
    assert_eq!(t.row(0), &[0.6, 0.8]);
    assert_eq!(t.row(1), &[1.0, 0.0]);
    assert!(matches!(
        normalize_embeddings(&table(&[vec![1.0, 0.0], vec![0.0, 0.0]])),
        Err(LbeeError::ZeroNormRow(id)) if id == "r001"
    ));
}

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..8).prop_flat_map(|d| {
        prop::collection::vec(
            prop::collection::vec(-10.0f64..10.0, d).prop_filter("nonzero", |r| r.iter().any(|x| x.abs() > 1e-3)),
            1..10,
        )
    })
}

proptest! {
    #[test]
    fn normalization_is_idempotent(rows in rows_strategy()) {
        let once = normalize_embeddings(&table(&rows)).unwrap();
        let twice = normalize_embeddings(&once).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalization_ignores_scale(rows in rows_strategy(), lambda in 1e-3f64..1e3) {
        let t = table(&rows);
        let a = normalize_embeddings(&t).unwrap();
        let b = normalize_embeddings(&t.scaled(lambda)).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }
}
