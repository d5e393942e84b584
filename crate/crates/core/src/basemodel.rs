//! Blackbox base models and their scored outputs.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, MaskedDataset, Standardizer};
use crate::error::{Error, Result};
use crate::seed;

/// Anything that maps a feature vector to a class-probability vector.
pub trait BlackboxModel: Send + Sync {
    fn class_count(&self) -> usize;
    fn dim(&self) -> usize;
    fn score(&self, features: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 200,
            seed: 0,
        }
    }
}

/// Multinomial logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSoftmax {
    /// `class_count` rows of `dim` weights.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub class_count: usize,
    /// Applied by [`LinearSoftmax::score_raw`]; [`BlackboxModel::score`]
    /// expects already standardized input.
    pub standardizer: Option<Standardizer>,
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
}

impl LinearSoftmax {
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    pub fn score_raw(&self, raw: &[f64]) -> Vec<f64> {
        match &self.standardizer {
            Some(st) => self.score(&st.apply(raw)),
            None => self.score(raw),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl BlackboxModel for LinearSoftmax {
    fn class_count(&self) -> usize {
        self.class_count
    }

    fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn score(&self, features: &[f64]) -> Vec<f64> {
        let mut p = self.logits(features);
        softmax_in_place(&mut p);
        p
    }
}

/// Trains a linear-softmax classifier by full-batch gradient descent on the
/// mean cross-entropy. Weights start from N(0, 0.01²) drawn from `hyper.seed`.
pub fn train_builtin(train: &Dataset, hyper: &TrainParams) -> Result<LinearSoftmax> {
    let c = train.class_count();
    let d = train.dim();
    let present: BTreeSet<usize> = train.labels().iter().copied().collect();
    if present.len() < 2 {
        return Err(Error::DegenerateData(format!(
            "training data holds {} distinct class(es), need at least 2",
            present.len()
        )));
    }
    if train.len() < c {
        return Err(Error::DegenerateData(format!(
            "{} training rows for {c} classes",
            train.len()
        )));
    }

    let mut rng = seed::rng(hyper.seed);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut model = LinearSoftmax {
        weights: (0..c)
            .map(|_| (0..d).map(|_| init.sample(&mut rng)).collect())
            .collect(),
        bias: vec![0.0; c],
        class_count: c,
        standardizer: None,
    };

    let n = train.len() as f64;
    let mut grad_w = vec![vec![0.0; d]; c];
    let mut grad_b = vec![0.0; c];
    for _ in 0..hyper.epochs {
        grad_w.iter_mut().for_each(|g| g.fill(0.0));
        grad_b.fill(0.0);
        for (x, &y) in train.rows().zip(train.labels()) {
            let p = model.score(x);
            for k in 0..c {
                let delta = p[k] - if k == y { 1.0 } else { 0.0 };
                grad_b[k] += delta;
                for (g, xj) in grad_w[k].iter_mut().zip(x) {
                    *g += delta * xj;
                }
            }
        }
        for k in 0..c {
            model.bias[k] -= hyper.learning_rate * grad_b[k] / n;
            for (w, g) in model.weights[k].iter_mut().zip(&grad_w[k]) {
                *w -= hyper.learning_rate * g / n;
            }
        }
    }
    Ok(model)
}

/// Base-model outputs for a batch: probabilities, argmax class, top
/// confidence, and binary outcomes when labels have been revealed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDataset {
    ids: Vec<u64>,
    class_probs: Vec<Vec<f64>>,
    predicted: Vec<usize>,
    confidence: Vec<f64>,
    outcome: Option<Vec<u8>>,
    positions: HashMap<u64, usize>,
}

/// Lowest index wins ties.
fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = k;
        }
    }
    best
}

impl ScoredDataset {
    /// Builds a scored batch from probability rows. `labels`, when given,
    /// produce the outcome vector.
    pub fn from_probs(
        ids: Vec<u64>,
        class_probs: Vec<Vec<f64>>,
        labels: Option<&[usize]>,
    ) -> Result<Self> {
        if ids.len() != class_probs.len() {
            return Err(Error::Schema(format!(
                "{} ids for {} probability rows",
                ids.len(),
                class_probs.len()
            )));
        }
        let mut positions = HashMap::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            if positions.insert(id, i).is_some() {
                return Err(Error::Schema(format!("duplicate id {id}")));
            }
        }
        let predicted: Vec<usize> = class_probs.iter().map(|p| argmax(p)).collect();
        let confidence = class_probs
            .iter()
            .zip(&predicted)
            .map(|(p, &k)| p[k])
            .collect();
        let outcome = match labels {
            None => None,
            Some(labels) => {
                if labels.len() != ids.len() {
                    return Err(Error::Schema(format!(
                        "{} labels for {} rows",
                        labels.len(),
                        ids.len()
                    )));
                }
                Some(
                    predicted
                        .iter()
                        .zip(labels)
                        .map(|(p, l)| u8::from(p == l))
                        .collect(),
                )
            }
        };
        Ok(Self {
            ids,
            class_probs,
            predicted,
            confidence,
            outcome,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn class_probs(&self) -> &[Vec<f64>] {
        &self.class_probs
    }

    pub fn predicted(&self) -> &[usize] {
        &self.predicted
    }

    pub fn confidence(&self) -> &[f64] {
        &self.confidence
    }

    pub fn outcome(&self) -> Option<&[u8]> {
        self.outcome.as_deref()
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.positions.get(&id).copied()
    }

    /// Mean outcome, i.e. conventional accuracy, when labels are revealed.
    pub fn accuracy(&self) -> Option<f64> {
        let o = self.outcome.as_ref()?;
        if o.is_empty() {
            return None;
        }
        Some(o.iter().map(|&v| f64::from(v)).sum::<f64>() / o.len() as f64)
    }

    /// Rows for `ids`, in that order; outcomes are attached from `labels`.
    pub fn subset(&self, ids: &[u64], labels: Option<&[usize]>) -> Result<Self> {
        let rows = ids
            .iter()
            .map(|id| {
                self.position(*id)
                    .map(|i| self.class_probs[i].clone())
                    .ok_or_else(|| Error::Schema(format!("no scores for id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_probs(ids.to_vec(), rows, labels)
    }
}

fn score_rows<'a>(
    model: &dyn BlackboxModel,
    dim: usize,
    rows: impl Iterator<Item = &'a [f64]>,
) -> Result<Vec<Vec<f64>>> {
    if dim != model.dim() {
        return Err(Error::Shape {
            expected: model.dim(),
            actual: dim,
        });
    }
    Ok(rows.map(|x| model.score(x)).collect())
}

pub fn score_batch(
    model: &dyn BlackboxModel,
    ds: &Dataset,
    reveal_labels: bool,
) -> Result<ScoredDataset> {
    let probs = score_rows(model, ds.dim(), ds.rows())?;
    ScoredDataset::from_probs(ds.ids().to_vec(), probs, reveal_labels.then(|| ds.labels()))
}

/// Scores a masked partition without touching its labels.
pub fn score_masked(model: &dyn BlackboxModel, ds: &MaskedDataset) -> Result<ScoredDataset> {
    let probs = score_rows(model, ds.dim(), (0..ds.len()).map(|i| ds.row(i)))?;
    ScoredDataset::from_probs(ds.ids().to_vec(), probs, None)
}

/// Labels carried by an external score file, keyed by id.
pub type ScoreLabels = HashMap<u64, usize>;

/// Reads `id, prob_0..prob_{C-1}[, label]`. Rows whose probabilities sum
/// outside `[1 - 1e-3, 1 + 1e-3]` are renormalized.
pub fn ingest_scores(path: impl AsRef<Path>) -> Result<ScoredDataset> {
    ingest_scores_with_labels(path).map(|(s, _)| s)
}

pub fn ingest_scores_with_labels(path: impl AsRef<Path>) -> Result<(ScoredDataset, ScoreLabels)> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| Error::Schema(format!("{} lacks an `id` column", path.display())))?;
    let mut prob_cols = Vec::new();
    while let Some(c) = headers
        .iter()
        .position(|h| *h == format!("prob_{}", prob_cols.len()))
    {
        prob_cols.push(c);
    }
    if prob_cols.len() < 2 {
        return Err(Error::Schema(format!(
            "{} needs at least prob_0 and prob_1 columns",
            path.display()
        )));
    }
    let label_col = headers.iter().position(|h| h == "label");

    let mut ids = Vec::new();
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = r + 1;
        let parse = |c: usize| -> Result<f64> {
            rec.get(c)
                .ok_or_else(|| Error::Parse {
                    row,
                    column: headers[c].clone(),
                    message: "missing field".into(),
                })?
                .parse::<f64>()
                .map_err(|e| Error::Parse {
                    row,
                    column: headers[c].clone(),
                    message: e.to_string(),
                })
        };
        let id = rec[id_col].parse::<u64>().map_err(|e| Error::Parse {
            row,
            column: "id".into(),
            message: e.to_string(),
        })?;
        let mut p = Vec::with_capacity(prob_cols.len());
        for &c in &prob_cols {
            let v = parse(c)?;
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: headers[c].clone(),
                    message: format!("probability {v} is not a finite nonnegative number"),
                });
            }
            p.push(v);
        }
        let sum: f64 = p.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Parse {
                row,
                column: "prob_*".into(),
                message: "probabilities sum to zero".into(),
            });
        }
        if (sum - 1.0).abs() > 1e-3 {
            p.iter_mut().for_each(|v| *v /= sum);
        }
        if let Some(c) = label_col {
            let l = rec[c].parse::<usize>().map_err(|e| Error::Parse {
                row,
                column: "label".into(),
                message: e.to_string(),
            })?;
            if l >= prob_cols.len() {
                return Err(Error::Parse {
                    row,
                    column: "label".into(),
                    message: format!("label {l} outside [0, {})", prob_cols.len()),
                });
            }
            labels.push(l);
        }
        ids.push(id);
        probs.push(p);
    }
    if ids.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no score rows",
            path.display()
        )));
    }
    let label_map: ScoreLabels = if label_col.is_some() {
        ids.iter().copied().zip(labels.iter().copied()).collect()
    } else {
        HashMap::new()
    };
    let scored = ScoredDataset::from_probs(ids, probs, label_col.map(|_| labels.as_slice()))?;
    Ok((scored, label_map))
}
