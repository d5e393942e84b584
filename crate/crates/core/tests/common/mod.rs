#![allow(dead_code)]

use perfpred_core::data::{biased_split, BiasedSplit, Proportion, SplitSizes};
use perfpred_core::harness::{generate_synthetic, SyntheticSpec};

/// Per-bin (count, mean, population std) computed the slow way: membership by
/// comparing against the edges `i/m`, two-pass statistics over the members.
pub fn oracle_bins(conf: &[f64], outcomes: &[u8], m: usize) -> Vec<(u64, f64, f64)> {
    (0..m)
        .map(|i| {
            let lo = i as f64 / m as f64;
            let hi = (i + 1) as f64 / m as f64;
            let members: Vec<f64> = conf
                .iter()
                .zip(outcomes)
                .filter(|(&s, _)| {
                    if i + 1 == m {
                        s >= lo && s <= 1.0
                    } else {
                        s >= lo && s < hi
                    }
                })
                .map(|(_, &o)| f64::from(o))
                .collect();
            if members.is_empty() {
                return (0, 0.0, 0.0);
            }
            let n = members.len() as f64;
            let mean = members.iter().sum::<f64>() / n;
            let var = members.iter().map(|o| (o - mean) * (o - mean)).sum::<f64>() / n;
            (members.len() as u64, mean, var.sqrt())
        })
        .collect()
}

/// Smallest within-cluster sum of squares over every split into two
/// nonempty groups.
pub fn brute_force_two_means(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let sse = |idx: &[usize]| -> f64 {
        let d = points[0].len();
        let mut c = vec![0.0; d];
        for &i in idx {
            for (cj, x) in c.iter_mut().zip(&points[i]) {
                *cj += x;
            }
        }
        for cj in &mut c {
            *cj /= idx.len() as f64;
        }
        idx.iter()
            .map(|&i| {
                points[i]
                    .iter()
                    .zip(&c)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
            })
            .sum()
    };
    let mut best = f64::INFINITY;
    // fix point 0 in group a to skip mirrored splits
    for mask in 0..(1u32 << (n - 1)) {
        let mut a = vec![0];
        let mut b = Vec::new();
        for i in 1..n {
            if mask & (1 << (i - 1)) != 0 {
                a.push(i);
            } else {
                b.push(i);
            }
        }
        if b.is_empty() {
            continue;
        }
        best = best.min(sse(&a) + sse(&b));
    }
    best
}

/// Scaled-down synthetic data and split: 600 test, 600 pool, 1200 eval.
pub fn small_split(k: u8, seed: u64) -> BiasedSplit {
    let ds = generate_synthetic(&SyntheticSpec {
        size: 8000,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let spec = SyntheticSpec::default();
    biased_split(
        &ds,
        &spec.biasing_condition(),
        Proportion::new(k).unwrap(),
        SplitSizes {
            train: 1500,
            test: 600,
            prod: 1800,
        },
        seed,
    )
    .unwrap()
}
