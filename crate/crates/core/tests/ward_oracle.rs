mod common;

use common::*;
use lbee::{compute_prototypes, normalize_embeddings, ward_cluster, EmbeddingTable};

fn normalized(raw: &[Vec<f64>]) -> EmbeddingTable {
    normalize_embeddings(&EmbeddingTable::from_rows(ids("x", raw.len()), raw).unwrap()).unwrap()
}

fn check_against_oracle(table: &EmbeddingTable, c: usize) {
    let rows: Vec<Vec<f64>> = table.rows().map(<[f64]>::to_vec).collect();
    let got = ward_cluster(table, c).unwrap().merge_log;
    let want = naive_ward(&rows, c);
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!((g.cluster_a, g.cluster_b), (w.0, w.1));
        assert!((g.distance - w.2).abs() <= 1e-9, "{g:?} vs {w:?}");
    }
}

#[test]
fn twelve_vectors_in_five_dims() {
    let mut rng = rng(12);
    let table = normalized(&gaussian_rows(&mut rng, 12, 5));
    check_against_oracle(&table, 3);
    check_against_oracle(&table, 1);
}

#[test]
fn many_random_instances() {
    let mut rng = rng(99);
    for _ in 0..40 {
        let n = range(&mut rng, 2, 40);
        let d = range(&mut rng, 2, 10);
        let table = normalized(&gaussian_rows(&mut rng, n, d));
        check_against_oracle(&table, range(&mut rng, 1, n));
    }
}

#[test]
fn separated_pairs_on_the_circle() {
    // 1-D points lifted onto the unit circle
    let k: f64 = 200.0;
    let raw: Vec<Vec<f64>> = [0.0, 0.1, 10.0, 10.1]
        .iter()
        .map(|x: &f64| vec![*x, (1.0 - x * x / k).sqrt()])
        .collect();
    let model = ward_cluster(&normalized(&raw), 2).unwrap();
    assert_eq!(model.member_rows, vec![vec![0, 1], vec![2, 3]]);
}

#[test]
fn merge_sizes_and_heights() {
    let mut rng = rng(5);
    let table = normalized(&gaussian_rows(&mut rng, 30, 6));
    let model = compute_prototypes(ward_cluster(&table, 1).unwrap(), &table).unwrap();
    assert_eq!(model.merge_log.last().unwrap().size, 30);
    // Ward heights never decrease
    for w in model.merge_log.windows(2) {
        assert!(w[1].distance >= w[0].distance - 1e-12);
    }
    let proto = &model.prototypes[0];
    let norm: f64 = proto.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12);
}
