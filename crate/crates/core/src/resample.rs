//! Covariate-shift correction by vector quantization.
//!
//! Test and production vectors (standardized features concatenated with the
//! base model's class probabilities) are quantized with a k-means codebook.
//! For a test member in codeword `c` the selection propensity is estimated as
//! `t_c / p_c` and its weight is `(|T| / |P|) / (t_c / p_c)`. Small weights are
//! zeroed, and survivors are upsampled to integer multiplicities
//! `round(w / w_min)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basemodel::ScoredDataset;
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_THRESHOLD: f64 = 0.1;
pub const MAX_LLOYD_ITERATIONS: usize = 100;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-6;

/// Codeword count used when none is configured: the length of the data
/// vector for structured data, 256 for image-like data (more than 100
/// features).
pub fn default_codewords(dim: usize, class_count: usize) -> usize {
    if dim > 100 {
        256
    } else {
        dim + class_count
    }
}

/// Features followed by class probabilities, one vector per row.
pub fn data_vectors(features: &[f64], dim: usize, scored: &ScoredDataset) -> Vec<Vec<f64>> {
    scored
        .class_probs()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut v = features[i * dim..(i + 1) * dim].to_vec();
            v.extend_from_slice(p);
            v
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub centroids: Vec<Vec<f64>>,
}

impl Codebook {
    /// k-means with probabilistic D² seeding and Lloyd refinement until no
    /// centroid moves more than 1e-6 or 100 iterations have run.
    pub fn fit(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("codeword count must be at least 1".into()));
        }
        if k > points.len() {
            return Err(Error::Capacity {
                what: "codebook".into(),
                required: k,
                available: points.len(),
            });
        }
        let dim = points[0].len();
        if let Some(bad) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::Shape {
                expected: dim,
                actual: bad.len(),
            });
        }
        let mut rng = seed::rng(seed);
        let mut centroids = seed_centroids(points, k, &mut rng);

        let mut assignment = vec![0usize; points.len()];
        for _ in 0..MAX_LLOYD_ITERATIONS {
            for (a, p) in assignment.iter_mut().zip(points) {
                *a = nearest(&centroids, p);
            }
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (p, &a) in points.iter().zip(&assignment) {
                counts[a] += 1;
                for (s, v) in sums[a].iter_mut().zip(p) {
                    *s += v;
                }
            }
            let mut max_move: f64 = 0.0;
            for c in 0..k {
                // An emptied cluster keeps its previous centroid.
                if counts[c] == 0 {
                    continue;
                }
                let updated: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                max_move = max_move.max(sq_dist(&updated, &centroids[c]).sqrt());
                centroids[c] = updated;
            }
            if max_move < CONVERGENCE_TOLERANCE {
                break;
            }
        }
        Ok(Self { centroids })
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// Nearest centroid by Euclidean distance; ties go to the lowest index.
    pub fn assign(&self, v: &[f64]) -> usize {
        nearest(&self.centroids, v)
    }

    pub fn assign_all(&self, vs: &[Vec<f64>]) -> Vec<usize> {
        vs.iter().map(|v| self.assign(v)).collect()
    }

    /// Sum of squared distances to the assigned centroids.
    pub fn quantization_error(&self, vs: &[Vec<f64>]) -> f64 {
        vs.iter()
            .map(|v| sq_dist(v, &self.centroids[self.assign(v)]))
            .sum()
    }
}

fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, v);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total implies a positive entry")
        } else {
            // Only duplicates of chosen points remain.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[next] = true;
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
        centroids.push(points[next].clone());
    }
    centroids
}

/// Codebook over the union of test and production data vectors.
pub fn build_codebook(
    test: &[Vec<f64>],
    production: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<Codebook> {
    let union: Vec<Vec<f64>> = test.iter().chain(production).cloned().collect();
    Codebook::fit(&union, k, seed)
}

/// Raw weight per test member. Members whose codeword never occurs in
/// production, or whose weight falls below `threshold`, get weight 0.
pub fn compute_weights(
    test_assignments: &[usize],
    production_assignments: &[usize],
    k: usize,
    threshold: f64,
) -> Result<Vec<f64>> {
    if test_assignments.is_empty() || production_assignments.is_empty() {
        return Err(Error::EmptyInput(
            "weights need nonempty test and production sets".into(),
        ));
    }
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::Domain(format!("threshold {threshold} is negative")));
    }
    let mut t = vec![0usize; k];
    let mut p = vec![0usize; k];
    for &c in test_assignments {
        *t.get_mut(c)
            .ok_or_else(|| Error::Domain(format!("codeword {c} out of range")))? += 1;
    }
    for &c in production_assignments {
        *p.get_mut(c)
            .ok_or_else(|| Error::Domain(format!("codeword {c} out of range")))? += 1;
    }
    let selection = test_assignments.len() as f64 / production_assignments.len() as f64;
    Ok(test_assignments
        .iter()
        .map(|&c| {
            if p[c] == 0 {
                return 0.0;
            }
            let w = selection / (t[c] as f64 / p[c] as f64);
            if w < threshold {
                0.0
            } else {
                w
            }
        })
        .collect())
}

/// Test members with their weights and upsample multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTestSet {
    pub ids: Vec<u64>,
    pub raw_weights: Vec<f64>,
    pub multiplicities: Vec<u32>,
    pub codewords: Vec<usize>,
}

impl WeightedTestSet {
    /// Size of the upsampled multiset.
    pub fn resampled_len(&self) -> u64 {
        self.multiplicities.iter().map(|&m| u64::from(m)).sum()
    }

    /// Accuracy on the upsampled multiset, `Σ m·o / Σ m`.
    pub fn weighted_accuracy(&self, outcomes: &[u8]) -> f64 {
        let hits: u64 = self
            .multiplicities
            .iter()
            .zip(outcomes)
            .map(|(&m, &o)| u64::from(m) * u64::from(o))
            .sum();
        hits as f64 / self.resampled_len() as f64
    }
}

/// Divides by the smallest positive weight and rounds half-up.
pub fn upsample(ids: &[u64], weights: &[f64], codewords: &[usize]) -> Result<WeightedTestSet> {
    if ids.len() != weights.len() || ids.len() != codewords.len() {
        return Err(Error::Schema(
            "ids, weights and codewords differ in length".into(),
        ));
    }
    let w_min = weights
        .iter()
        .copied()
        .filter(|&w| w > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !w_min.is_finite() {
        return Err(Error::DegenerateResample);
    }
    let multiplicities = weights
        .iter()
        .map(|&w| {
            if w > 0.0 {
                (w / w_min + 0.5).floor() as u32
            } else {
                0
            }
        })
        .collect();
    Ok(WeightedTestSet {
        ids: ids.to_vec(),
        raw_weights: weights.to_vec(),
        multiplicities,
        codewords: codewords.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        // |T| = 2, |P| = 4
        let w = compute_weights(&[0, 1], &[0, 0, 1, 2], 3, 0.0).unwrap();
        assert_eq!(w[0], 1.0);
        let w = compute_weights(&[0, 0], &[0, 0, 1, 1], 2, 0.0).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn threshold_and_missing_codeword() {
        // |T| = 1, |P| = 20, t = 1, p = 1 -> w = 0.05
        let mut prod = vec![1usize; 19];
        prod.push(0);
        let w = compute_weights(&[0], &prod, 2, 0.1).unwrap();
        assert_eq!(w, vec![0.0]);
        let w = compute_weights(&[0], &prod, 2, 0.0).unwrap();
        assert!((w[0] - 0.05).abs() < 1e-15);
        let w = compute_weights(&[2, 1], &[1, 1], 3, 0.0).unwrap();
        assert_eq!(w[0], 0.0);
        assert!(compute_weights(&[], &[0], 1, 0.1).is_err());
    }

    #[test]
    fn upsample_examples() {
        let ws = upsample(&[1, 2, 3], &[0.5, 1.0, 2.0], &[0, 0, 0]).unwrap();
        assert_eq!(ws.multiplicities, vec![1, 2, 4]);
        assert_eq!(ws.resampled_len(), 7);

        let ws = upsample(&[1, 2], &[0.7, 0.7], &[0, 1]).unwrap();
        assert_eq!(ws.multiplicities, vec![1, 1]);

        // 0.4 thresholded at 0.5 upstream
        let ws = upsample(&[1, 2], &[0.0, 1.0], &[0, 1]).unwrap();
        assert_eq!(ws.multiplicities, vec![0, 1]);

        assert!(matches!(
            upsample(&[1], &[0.0], &[0]),
            Err(Error::DegenerateResample)
        ));
    }

    #[test]
    fn half_up_rounding() {
        let ws = upsample(&[1, 2], &[1.0, 2.5], &[0, 0]).unwrap();
        assert_eq!(ws.multiplicities, vec![1, 3]);
    }

    #[test]
    fn single_codeword_is_global_mean() {
        let pts = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, -1.0]];
        let cb = Codebook::fit(&pts, 1, 5).unwrap();
        assert!((cb.centroids[0][0] - 2.0).abs() < 1e-12);
        assert!((cb.centroids[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_codeword_per_point() {
        let pts: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let cb = Codebook::fit(&pts, 9, 1).unwrap();
        assert_eq!(cb.quantization_error(&pts), 0.0);
    }

    #[test]
    fn capacity_and_domain() {
        let pts = vec![vec![0.0]; 3];
        assert!(matches!(
            Codebook::fit(&pts, 4, 0),
            Err(Error::Capacity { .. })
        ));
        assert!(matches!(Codebook::fit(&pts, 0, 0), Err(Error::Domain(_))));
        // duplicates only: still returns K centroids
        assert_eq!(Codebook::fit(&pts, 3, 0).unwrap().len(), 3);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let cb = Codebook {
            centroids: vec![vec![-1.0], vec![1.0]],
        };
        assert_eq!(cb.assign(&[0.0]), 0);
    }

    #[test]
    fn default_codeword_counts() {
        assert_eq!(default_codewords(20, 2), 22);
        assert_eq!(default_codewords(784, 10), 256);
    }
}
