//! Confidence-binning performance predictor.
//!
//! Confidences in `[0, 1]` are assigned to `M` equal-width bins, half-open
//! `[l, u)` except the last, which is closed. Each bin stores the mean and
//! population standard deviation of the base model's binary outcomes. An
//! instance prediction is a bin lookup; a batch estimate is the mean of the
//! instance predictions.

use serde::{Deserialize, Serialize};

use crate::basemodel::ScoredDataset;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

/// Standard deviation reported for confidences landing in an empty bin.
pub const EMPTY_BIN_STD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    /// Mean outcome; 0 when the bin is empty.
    pub accuracy: f64,
    /// Population std of outcomes; 0 when the bin is empty.
    pub std_dev: f64,
    /// Number of samples assigned, counting upsample multiplicities.
    pub count: u64,
}

impl Bin {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedPredictor {
    pub bins: Vec<Bin>,
    pub global_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstancePrediction {
    pub accuracy: f64,
    pub std_dev: f64,
}

fn check_confidence(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Domain(format!("confidence {s} outside [0, 1]")))
    }
}

fn lower_edge(i: usize, m: usize) -> f64 {
    i as f64 / m as f64
}

/// Bin of `s` among `m` equal-width bins. `s` must lie in `[0, 1]`.
pub fn bin_index(s: f64, m: usize) -> usize {
    let mut idx = ((s * m as f64).floor() as usize).min(m - 1);
    // Reconcile the multiplication with the stored edges.
    while idx > 0 && s < lower_edge(idx, m) {
        idx -= 1;
    }
    while idx + 1 < m && s >= lower_edge(idx + 1, m) {
        idx += 1;
    }
    idx
}

/// Mean and population std of a 0/1 sample with `ones` successes out of `n`.
fn bernoulli_stats(ones: u64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let mean = ones as f64 / nf;
    let std = ((ones as f64) * ((n - ones) as f64)).sqrt() / nf;
    (mean, std)
}

impl BinnedPredictor {
    /// Fits `bins` equal-width bins. `weights`, when given, are integer
    /// upsample multiplicities: the result equals fitting on the replicated
    /// multiset.
    pub fn fit(
        confidences: &[f64],
        outcomes: &[u8],
        bins: usize,
        weights: Option<&[u32]>,
    ) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Domain("bin count must be at least 1".into()));
        }
        if confidences.is_empty() {
            return Err(Error::EmptyInput("no confidences to fit".into()));
        }
        if confidences.len() != outcomes.len() {
            return Err(Error::Schema(format!(
                "{} confidences but {} outcomes",
                confidences.len(),
                outcomes.len()
            )));
        }
        if let Some(w) = weights {
            if w.len() != confidences.len() {
                return Err(Error::Schema(format!(
                    "{} weights for {} samples",
                    w.len(),
                    confidences.len()
                )));
            }
        }
        let mut ones = vec![0u64; bins];
        let mut counts = vec![0u64; bins];
        for (i, (&s, &o)) in confidences.iter().zip(outcomes).enumerate() {
            check_confidence(s)?;
            if o > 1 {
                return Err(Error::Domain(format!("outcome {o} is not binary")));
            }
            let m = weights.map_or(1, |w| u64::from(w[i]));
            let b = bin_index(s, bins);
            counts[b] += m;
            ones[b] += m * u64::from(o);
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyInput("all weights are zero".into()));
        }
        let bins_out = (0..bins)
            .map(|i| {
                let (accuracy, std_dev) = if counts[i] > 0 {
                    bernoulli_stats(ones[i], counts[i])
                } else {
                    (0.0, 0.0)
                };
                Bin {
                    lower: lower_edge(i, bins),
                    upper: lower_edge(i + 1, bins),
                    accuracy,
                    std_dev,
                    count: counts[i],
                }
            })
            .collect();
        Ok(Self {
            bins: bins_out,
            global_accuracy: ones.iter().sum::<u64>() as f64 / total as f64,
        })
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    /// Looks up `s`'s bin. Empty bins fall back to the global training
    /// accuracy with the maximal Bernoulli std of 0.5.
    pub fn predict_instance(&self, s: f64) -> Result<InstancePrediction> {
        check_confidence(s)?;
        let bin = &self.bins[bin_index(s, self.bins.len())];
        Ok(if bin.is_empty() {
            InstancePrediction {
                accuracy: self.global_accuracy,
                std_dev: EMPTY_BIN_STD,
            }
        } else {
            InstancePrediction {
                accuracy: bin.accuracy,
                std_dev: bin.std_dev,
            }
        })
    }

    /// Mean predicted accuracy over a batch of confidences.
    pub fn predict_mean(&self, confidences: &[f64]) -> Result<f64> {
        if confidences.is_empty() {
            return Err(Error::EmptyInput("empty batch".into()));
        }
        let mut sum = 0.0;
        for &s in confidences {
            sum += self.predict_instance(s)?.accuracy;
        }
        Ok(sum / confidences.len() as f64)
    }

    pub fn predict_batch(&self, scored: &ScoredDataset) -> Result<f64> {
        self.predict_mean(scored.confidence())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
