mod common;

use perfpred_core::resample::{compute_weights, upsample, Codebook};
use perfpred_core::seed;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};

fn points(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), 3..=max)
}

proptest! {
    #[test]
    fn two_means_never_beats_exhaustive_optimum(pts in points(12), s in any::<u64>()) {
        let cb = Codebook::fit(&pts, 2, s).unwrap();
        let best = common::brute_force_two_means(&pts);
        prop_assert!(cb.quantization_error(&pts) >= best - 1e-9);
    }

    #[test]
    fn lloyd_result_is_a_fixed_point(pts in points(40), k in 1usize..5, s in any::<u64>()) {
        prop_assume!(k <= pts.len());
        let cb = Codebook::fit(&pts, k, s).unwrap();
        let assign = cb.assign_all(&pts);
        for (c, centroid) in cb.centroids.iter().enumerate() {
            let members: Vec<&Vec<f64>> =
                pts.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for j in 0..2 {
                let mean = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
                prop_assert!((mean - centroid[j]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn weight_sums_match_production_mass(
        test in prop::collection::vec(0usize..6, 1..80),
        prod in prop::collection::vec(0usize..6, 1..200),
    ) {
        let w = compute_weights(&test, &prod, 6, 0.0).unwrap();
        let ratio = test.len() as f64 / prod.len() as f64;
        for c in 0..6 {
            let t_c = test.iter().filter(|&&a| a == c).count();
            let p_c = prod.iter().filter(|&&a| a == c).count();
            let sum: f64 = test.iter().zip(&w).filter(|(&a, _)| a == c).map(|(_, &x)| x).sum();
            if t_c > 0 {
                // Σ_{i in c} w_i = (|T|/|P|)·p_c
                prop_assert!((sum - ratio * p_c as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn upsample_identities(ws in prop::collection::vec(prop_oneof![Just(0.0), 0.05..8.0f64], 1..60)) {
        let ids: Vec<u64> = (0..ws.len() as u64).collect();
        let cw = vec![0; ws.len()];
        match upsample(&ids, &ws, &cw) {
            Err(_) => prop_assert!(ws.iter().all(|&w| w == 0.0)),
            Ok(set) => {
                let w_min = ws.iter().copied().filter(|&w| w > 0.0).fold(f64::INFINITY, f64::min);
                prop_assert_eq!(set.multiplicities.iter().filter(|&&m| m > 0).min().copied(), Some(1));
                for (&w, &m) in ws.iter().zip(&set.multiplicities) {
                    if w == 0.0 {
                        prop_assert_eq!(m, 0);
                    } else {
                        prop_assert!(m >= 1);
                        prop_assert!((f64::from(m) - w / w_min).abs() <= 0.5 + 1e-9);
                    }
                }
                prop_assert_eq!(set.resampled_len(), set.multiplicities.iter().map(|&m| u64::from(m)).sum::<u64>());
            }
        }
    }

    #[test]
    fn weighted_accuracy_equals_replicated(
        rows in prop::collection::vec((0.1..5.0f64, 0u8..=1), 1..60),
    ) {
        let ids: Vec<u64> = (0..rows.len() as u64).collect();
        let ws: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let out: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let set = upsample(&ids, &ws, &vec![0; rows.len()]).unwrap();
        let mut expanded = Vec::new();
        for (&m, &o) in set.multiplicities.iter().zip(&out) {
            expanded.extend(std::iter::repeat_n(o, m as usize));
        }
        let direct = expanded.iter().map(|&o| f64::from(o)).sum::<f64>() / expanded.len() as f64;
        prop_assert!((set.weighted_accuracy(&out) - direct).abs() < 1e-12);
    }
}

#[test]
fn separated_blobs_reach_the_exhaustive_optimum() {
    let mut pts = Vec::new();
    for i in 0..6 {
        pts.push(vec![i as f64 * 0.1, 0.0]);
        pts.push(vec![20.0 + i as f64 * 0.1, 1.0]);
    }
    let best = common::brute_force_two_means(&pts);
    for s in 0..10 {
        let cb = Codebook::fit(&pts, 2, s).unwrap();
        assert!((cb.quantization_error(&pts) - best).abs() < 1e-9);
    }
}

#[test]
fn codebook_is_deterministic_per_seed() {
    let mut rng = seed::rng(5);
    let n = Normal::new(0.0, 1.0).unwrap();
    let pts: Vec<Vec<f64>> = (0..300)
        .map(|_| vec![n.sample(&mut rng), n.sample(&mut rng)])
        .collect();
    assert_eq!(
        Codebook::fit(&pts, 8, 1).unwrap(),
        Codebook::fit(&pts, 8, 1).unwrap()
    );
}

#[test]
fn uniform_subsample_weights_stay_near_one() {
    let mut rng = seed::rng(11);
    let n = Normal::new(0.0, 1.0).unwrap();
    let prod: Vec<Vec<f64>> = (0..2000)
        .map(|_| (0..3).map(|_| n.sample(&mut rng)).collect())
        .collect();
    let picks = sample(&mut rng, prod.len(), 500);
    let test: Vec<Vec<f64>> = picks.iter().map(|i| prod[i].clone()).collect();
    let cb = Codebook::fit(&prod, 8, 3).unwrap();
    let ta = cb.assign_all(&test);
    let pa = cb.assign_all(&prod);
    let w = compute_weights(&ta, &pa, 8, 0.0).unwrap();
    let mut checked = 0;
    for c in 0..8 {
        let t_c = ta.iter().filter(|&&a| a == c).count();
        if t_c < 20 {
            continue;
        }
        let wc = w[ta.iter().position(|&a| a == c).unwrap()];
        assert!((0.5..=2.0).contains(&wc), "codeword {c}: t_c {t_c}, w {wc}");
        checked += 1;
    }
    assert!(checked >= 4);
}
