mod common;

use perfpred_core::basemodel::ScoredDataset;
use perfpred_core::predictor::{bin_index, BinnedPredictor, EMPTY_BIN_STD};
use proptest::prelude::*;

/// Confidences that hit bin edges of `m` often.
fn sample(m: usize) -> impl Strategy<Value = Vec<(f64, u8)>> {
    let conf = prop_oneof![
        0.0..=1.0f64,
        (0..=m).prop_map(move |j| j as f64 / m as f64),
        Just(1.0),
        Just(0.0),
    ];
    prop::collection::vec((conf, 0u8..=1), 1..300)
}

fn with_bins() -> impl Strategy<Value = (usize, Vec<(f64, u8)>)> {
    (1usize..=25).prop_flat_map(|m| (Just(m), sample(m)))
}

proptest! {
    #[test]
    fn fit_matches_oracle((m, rows) in with_bins()) {
        let conf: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let out: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let p = BinnedPredictor::fit(&conf, &out, m, None).unwrap();
        let oracle = common::oracle_bins(&conf, &out, m);
        prop_assert_eq!(p.bins.len(), m);
        for (b, (n, mean, std)) in p.bins.iter().zip(oracle) {
            prop_assert_eq!(b.count, n);
            prop_assert!((b.accuracy - mean).abs() <= 1e-12);
            prop_assert!((b.std_dev - std).abs() <= 1e-12);
        }
        let total: u64 = p.bins.iter().map(|b| b.count).sum();
        prop_assert_eq!(total, conf.len() as u64);
    }

    #[test]
    fn weighted_fit_equals_replicated_multiset(
        (m, rows) in with_bins(),
        reps in prop::collection::vec(0u32..4, 300),
    ) {
        let conf: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let out: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let w = &reps[..conf.len()];
        prop_assume!(w.iter().any(|&x| x > 0));
        let mut rc = Vec::new();
        let mut ro = Vec::new();
        for ((&s, &o), &k) in conf.iter().zip(&out).zip(w) {
            for _ in 0..k {
                rc.push(s);
                ro.push(o);
            }
        }
        let weighted = BinnedPredictor::fit(&conf, &out, m, Some(w)).unwrap();
        let replicated = BinnedPredictor::fit(&rc, &ro, m, None).unwrap();
        for (a, b) in weighted.bins.iter().zip(&replicated.bins) {
            prop_assert_eq!(a.count, b.count);
            prop_assert!((a.accuracy - b.accuracy).abs() <= 1e-12);
            prop_assert!((a.std_dev - b.std_dev).abs() <= 1e-12);
        }
        prop_assert!((weighted.global_accuracy - replicated.global_accuracy).abs() <= 1e-12);
    }

    #[test]
    fn bin_index_agrees_with_edges(s in 0.0..=1.0f64, m in 1usize..=50) {
        let i = bin_index(s, m);
        prop_assert!(i < m);
        prop_assert!(s >= i as f64 / m as f64);
        if i + 1 < m {
            prop_assert!(s < (i + 1) as f64 / m as f64);
        }
    }

    #[test]
    fn predictions_stay_in_range((m, rows) in with_bins(), queries in prop::collection::vec(0.0..=1.0f64, 1..50)) {
        let conf: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let out: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let p = BinnedPredictor::fit(&conf, &out, m, None).unwrap();
        let mut sum = 0.0;
        for &q in &queries {
            let r = p.predict_instance(q).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.accuracy));
            prop_assert!((0.0..=EMPTY_BIN_STD).contains(&r.std_dev));
            sum += r.accuracy;
        }
        let mean = p.predict_mean(&queries).unwrap();
        prop_assert!((mean - sum / queries.len() as f64).abs() <= 1e-12);
    }

    #[test]
    fn single_bin_reproduces_training_mean(rows in sample(1)) {
        let conf: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let out: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let p = BinnedPredictor::fit(&conf, &out, 1, None).unwrap();
        let mean = out.iter().map(|&o| f64::from(o)).sum::<f64>() / out.len() as f64;
        prop_assert!((p.predict_instance(0.3).unwrap().accuracy - mean).abs() <= 1e-12);
        prop_assert!((p.global_accuracy - mean).abs() <= 1e-12);
    }
}

#[test]
fn batch_prediction_uses_top_confidence() {
    // bin [0, .5): 2 samples, 1 correct; bin [.5, 1]: 4 samples, 3 correct
    let conf = [0.1, 0.2, 0.6, 0.7, 0.8, 0.9];
    let out = [1, 0, 1, 1, 1, 0];
    let p = BinnedPredictor::fit(&conf, &out, 2, None).unwrap();
    let batch = ScoredDataset::from_probs(
        vec![1, 2, 3],
        vec![vec![0.7, 0.3], vec![0.45, 0.55], vec![0.2, 0.8]],
        None,
    )
    .unwrap();
    // confidences 0.7, 0.55, 0.8 all land in the upper bin
    assert!((p.predict_batch(&batch).unwrap() - 0.75).abs() < 1e-15);
    let low = ScoredDataset::from_probs(vec![9], vec![vec![0.3, 0.3, 0.4]], None).unwrap();
    assert!((p.predict_batch(&low).unwrap() - 0.5).abs() < 1e-15);
}
