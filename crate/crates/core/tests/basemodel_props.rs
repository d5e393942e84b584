use std::fmt::Write as _;

use perfpred_core::basemodel::{
    ingest_scores_with_labels, score_batch, train_builtin, BlackboxModel, LinearSoftmax,
    ScoredDataset, TrainParams,
};
use perfpred_core::data::Dataset;
use perfpred_core::seed;
use proptest::prelude::*;
use rand_distr::{Distribution, Normal};

/// Four well separated Gaussian blobs in the plane, one per class.
fn blobs(n_per: usize, s: u64) -> (Dataset, Vec<[f64; 2]>) {
    let centers = vec![[4.0, 0.0], [-4.0, 0.0], [0.0, 4.0], [0.0, -4.0]];
    let noise = Normal::new(0.0, 0.6).unwrap();
    let mut rng = seed::rng(s);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, ctr) in centers.iter().enumerate() {
        for _ in 0..n_per {
            rows.push(vec![
                ctr[0] + noise.sample(&mut rng),
                ctr[1] + noise.sample(&mut rng),
            ]);
            labels.push(c);
        }
    }
    let ids = (0..rows.len() as u64).collect();
    (Dataset::new(rows, labels, ids, 4).unwrap(), centers)
}

fn nearest_centroid(x: &[f64], centers: &[[f64; 2]]) -> usize {
    let d = |c: &[f64; 2]| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
    (0..centers.len())
        .min_by(|&a, &b| d(&centers[a]).total_cmp(&d(&centers[b])))
        .unwrap()
}

#[test]
fn builtin_model_matches_nearest_centroid_on_blobs() {
    let (train, centers) = blobs(150, 1);
    let (test, _) = blobs(150, 2);
    let model = train_builtin(&train, &TrainParams::default()).unwrap();
    let scored = score_batch(&model, &test, true).unwrap();
    assert!(scored.accuracy().unwrap() >= 0.99);
    let agree = test
        .rows()
        .zip(scored.predicted())
        .filter(|(x, &p)| nearest_centroid(x, &centers) == p)
        .count();
    assert!(agree as f64 / test.len() as f64 >= 0.99);
}

#[test]
fn training_is_deterministic_per_seed() {
    let (train, _) = blobs(40, 3);
    let p = TrainParams {
        seed: 9,
        ..TrainParams::default()
    };
    let a = train_builtin(&train, &p).unwrap();
    let b = train_builtin(&train, &p).unwrap();
    assert_eq!(a, b);
    let back = LinearSoftmax::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(back.score(&[0.3, -1.2]), a.score(&[0.3, -1.2]));
}

proptest! {
    #[test]
    fn scores_form_a_simplex(x in prop::collection::vec(-50.0..50.0f64, 2)) {
        let (train, _) = blobs(20, 4);
        let model = train_builtin(&train, &TrainParams { epochs: 30, ..TrainParams::default() }).unwrap();
        let p = model.score(&x);
        prop_assert_eq!(p.len(), 4);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn outcomes_follow_argmax(
        rows in prop::collection::vec((prop::collection::vec(0.0..1.0f64, 3), 0usize..3), 1..60),
    ) {
        let probs: Vec<Vec<f64>> = rows
            .iter()
            .map(|(r, _)| {
                let s: f64 = r.iter().sum::<f64>() + 1e-9;
                r.iter().map(|v| (v + 1e-9 / 3.0) / s).collect()
            })
            .collect();
        let labels: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let ids: Vec<u64> = (0..rows.len() as u64).collect();
        let sd = ScoredDataset::from_probs(ids, probs.clone(), Some(&labels)).unwrap();
        let out = sd.outcome().unwrap();
        for i in 0..probs.len() {
            let pred = sd.predicted()[i];
            let max = probs[i].iter().copied().fold(f64::MIN, f64::max);
            prop_assert_eq!(probs[i][pred], max);
            prop_assert!(probs[i][..pred].iter().all(|&v| v < max));
            prop_assert_eq!(sd.confidence()[i], max);
            prop_assert_eq!(out[i], u8::from(pred == labels[i]));
        }
        let acc = out.iter().map(|&o| f64::from(o)).sum::<f64>() / out.len() as f64;
        prop_assert_eq!(sd.accuracy().unwrap(), acc);
    }
}

#[test]
fn external_scores_line_up_by_id() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.csv");
    let mut text = String::from("id,prob_0,prob_1,label\n");
    for id in [40u64, 10, 30, 20] {
        let p = id as f64 / 100.0;
        writeln!(text, "{id},{},{p},{}", 1.0 - p, id / 10 % 2).unwrap();
    }
    std::fs::write(&path, text).unwrap();
    let (table, labels) = ingest_scores_with_labels(&path).unwrap();
    assert_eq!(table.len(), 4);
    assert_eq!(labels[&30], 1);
    let sub = table.subset(&[20, 40], Some(&[0, 0])).unwrap();
    assert_eq!(sub.ids(), &[20, 40]);
    assert!((sub.confidence()[0] - 0.8).abs() < 1e-12);
    assert_eq!(sub.outcome().unwrap(), &[1, 1]);
    assert!(table.subset(&[99], None).is_err());
}
