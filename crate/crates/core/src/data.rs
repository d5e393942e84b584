//! Datasets, CSV ingestion, biased train/test/production splitting and pool
//! carving.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Feature matrix (row-major), class labels and stable ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    ids: Vec<u64>,
    class_count: usize,
    feature_names: Vec<String>,
    vocabularies: BTreeMap<usize, Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from row-major features. Every row must have `dim`
    /// entries, every label must be below `class_count` and ids must be unique.
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        ids: Vec<u64>,
        class_count: usize,
    ) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    actual: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        Self::from_flat(features, dim, labels, ids, class_count)
    }

    pub fn from_flat(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<usize>,
        ids: Vec<u64>,
        class_count: usize,
    ) -> Result<Self> {
        let n = labels.len();
        if ids.len() != n {
            return Err(Error::Schema(format!("{} labels but {} ids", n, ids.len())));
        }
        if features.len() != n * dim {
            return Err(Error::Schema(format!(
                "feature matrix holds {} values, expected {n} rows x {dim} columns",
                features.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Schema(format!(
                "label {bad} outside [0, {class_count})"
            )));
        }
        let mut seen = BTreeSet::new();
        for &id in &ids {
            if !seen.insert(id) {
                return Err(Error::Schema(format!("duplicate id {id}")));
            }
        }
        Ok(Self {
            features,
            dim,
            labels,
            ids,
            class_count,
            feature_names: (0..dim).map(|j| format!("x{j}")).collect(),
            vocabularies: BTreeMap::new(),
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                actual: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Sorted vocabulary of a categorical column, if the column was encoded.
    pub fn vocabulary(&self, column: usize) -> Option<&[String]> {
        self.vocabularies.get(&column).map(Vec::as_slice)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
            class_count: self.class_count,
            feature_names: self.feature_names.clone(),
            vocabularies: self.vocabularies.clone(),
        }
    }

    fn id_positions(&self) -> HashMap<u64, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect()
    }

    fn standardized(&self, st: &Standardizer) -> Dataset {
        let mut out = self.clone();
        for row in out.features.chunks_mut(self.dim.max(1)) {
            st.apply_in_place(row);
        }
        out
    }
}

/// Where row ids come from when loading a CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdPolicy {
    RowIndex,
    Column(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub label_column: String,
    #[serde(default = "default_id_policy")]
    pub id_policy: IdPolicy,
    /// Columns holding text categories; encoded by sorted vocabulary.
    #[serde(default)]
    pub categorical: Vec<String>,
}

fn default_id_policy() -> IdPolicy {
    IdPolicy::RowIndex
}

impl CsvOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            id_policy: IdPolicy::RowIndex,
            categorical: Vec::new(),
        }
    }
}

fn sorted_vocabulary<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    values
        .map(str::to_owned)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Loads a headed, comma-separated UTF-8 file.
///
/// Every column other than the label (and the id column, if any) becomes a
/// feature. Numeric columns pass through unchanged; declared categorical
/// columns are integer-encoded by sorted vocabulary. Labels that are all
/// non-negative integers are used as class indices directly, otherwise they
/// are encoded by sorted vocabulary as well.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::EmptyInput(format!(
            "{} has no header",
            path.display()
        )));
    }
    let label_col = headers
        .iter()
        .position(|h| *h == opts.label_column)
        .ok_or_else(|| {
            Error::Schema(format!(
                "label column `{}` not found in {}",
                opts.label_column,
                path.display()
            ))
        })?;
    let id_col = match &opts.id_policy {
        IdPolicy::RowIndex => None,
        IdPolicy::Column(name) => {
            Some(headers.iter().position(|h| h == name).ok_or_else(|| {
                Error::Schema(format!(
                    "id column `{name}` not found in {}",
                    path.display()
                ))
            })?)
        }
    };
    for cat in &opts.categorical {
        if !headers.contains(cat) {
            return Err(Error::Schema(format!(
                "categorical column `{cat}` not found"
            )));
        }
    }
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != label_col && Some(c) != id_col)
        .collect();

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                row: records.len() + 1,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no data rows",
            path.display()
        )));
    }

    let n = records.len();
    let dim = feature_cols.len();
    let mut features = vec![0.0; n * dim];
    let mut vocabularies = BTreeMap::new();
    for (j, &c) in feature_cols.iter().enumerate() {
        if opts.categorical.contains(&headers[c]) {
            let vocab = sorted_vocabulary(records.iter().map(|r| &r[c]));
            for (i, r) in records.iter().enumerate() {
                let code = vocab
                    .binary_search_by(|v| v.as_str().cmp(&r[c]))
                    .unwrap_or(0);
                features[i * dim + j] = code as f64;
            }
            vocabularies.insert(j, vocab);
        } else {
            for (i, r) in records.iter().enumerate() {
                features[i * dim + j] = r[c].parse::<f64>().map_err(|e| Error::Parse {
                    row: i + 1,
                    column: headers[c].clone(),
                    message: format!("`{}`: {e}", &r[c]),
                })?;
            }
        }
    }

    let raw_labels: Vec<&str> = records.iter().map(|r| &r[label_col]).collect();
    let numeric: Option<Vec<usize>> = raw_labels.iter().map(|s| s.parse().ok()).collect();
    let (labels, class_count) = match numeric {
        Some(labels) => {
            let c = labels.iter().max().map_or(0, |m| m + 1);
            (labels, c)
        }
        None => {
            let vocab = sorted_vocabulary(raw_labels.iter().copied());
            let labels = raw_labels
                .iter()
                .map(|s| vocab.binary_search_by(|v| v.as_str().cmp(s)).unwrap_or(0))
                .collect();
            (labels, vocab.len())
        }
    };

    let ids = match id_col {
        None => (0..n as u64).collect(),
        Some(c) => records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[c].parse::<u64>().map_err(|e| Error::Parse {
                    row: i + 1,
                    column: headers[c].clone(),
                    message: format!("`{}`: {e}", &r[c]),
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };

    let mut ds = Dataset::from_flat(features, dim, labels, ids, class_count)?;
    ds.feature_names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    ds.vocabularies = vocabularies;
    Ok(ds)
}

/// Writes a dataset as CSV with an `id` column, the feature columns and `label`.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["id".to_owned()];
    header.extend(ds.feature_names.iter().cloned());
    header.push("label".to_owned());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..ds.len() {
        let mut rec = vec![ds.ids[i].to_string()];
        rec.extend(ds.row(i).iter().map(f64::to_string));
        rec.push(ds.labels[i].to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    GreaterThan(f64),
    Equals(f64),
}

/// Binary criterion on one feature; rows where it holds form bin A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCondition {
    pub feature_index: usize,
    pub predicate: Predicate,
}

impl SplitCondition {
    pub fn greater_than(feature_index: usize, threshold: f64) -> Self {
        Self {
            feature_index,
            predicate: Predicate::GreaterThan(threshold),
        }
    }

    pub fn equals(feature_index: usize, value: f64) -> Self {
        Self {
            feature_index,
            predicate: Predicate::Equals(value),
        }
    }

    pub fn holds(&self, row: &[f64]) -> bool {
        let v = row[self.feature_index];
        match self.predicate {
            Predicate::GreaterThan(t) => v > t,
            Predicate::Equals(x) => v == x,
        }
    }

    /// Parses `column>value` or `column=value`. The column may be a feature
    /// name or a zero-based index; for `=` on a categorical column the value
    /// is looked up in the column's vocabulary.
    pub fn parse(expr: &str, ds: &Dataset) -> Result<Self> {
        let (col, op, value) = if let Some((c, v)) = expr.split_once('>') {
            (c.trim(), '>', v.trim())
        } else if let Some((c, v)) = expr.split_once('=') {
            (c.trim(), '=', v.trim())
        } else {
            return Err(Error::Domain(format!(
                "split condition `{expr}` must look like `column>value` or `column=value`"
            )));
        };
        let feature_index = ds
            .column_index(col)
            .or_else(|| col.parse().ok().filter(|&i: &usize| i < ds.dim()))
            .ok_or_else(|| Error::Schema(format!("unknown feature column `{col}`")))?;
        let value = value.trim_matches('"');
        let numeric = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Domain(format!("`{v}` is not a number")))
        };
        let cond = match op {
            '>' => Self::greater_than(feature_index, numeric(value)?),
            _ => match ds.vocabulary(feature_index) {
                Some(vocab) => {
                    let code = vocab.iter().position(|v| v == value).ok_or_else(|| {
                        Error::Domain(format!("`{value}` not in vocabulary of `{col}`"))
                    })?;
                    Self::equals(feature_index, code as f64)
                }
                None => Self::equals(feature_index, numeric(value)?),
            },
        };
        Ok(cond)
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.feature_index >= dim {
            return Err(Error::Domain(format!(
                "split feature {} out of range for {dim} features",
                self.feature_index
            )));
        }
        Ok(())
    }
}

impl fmt::Display for SplitCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.predicate {
            Predicate::GreaterThan(t) => write!(f, "x{} > {t}", self.feature_index),
            Predicate::Equals(v) => write!(f, "x{} = {v}", self.feature_index),
        }
    }
}

/// Percentage of bin A in train and test; production gets the mirror image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Proportion(u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProportionGroup {
    Moderate,
    Extreme,
}

impl Proportion {
    pub const ALL: [u8; 8] = [10, 20, 30, 40, 60, 70, 80, 90];

    pub fn new(k: u8) -> Result<Self> {
        if Self::ALL.contains(&k) {
            Ok(Self(k))
        } else {
            Err(Error::Domain(format!(
                "proportion {k} not in {{10, 20, 30, 40, 60, 70, 80, 90}}"
            )))
        }
    }

    pub fn all() -> Vec<Proportion> {
        Self::ALL.iter().map(|&k| Proportion(k)).collect()
    }

    pub fn percent(self) -> u8 {
        self.0
    }

    pub fn group(self) -> ProportionGroup {
        match self.0 {
            30 | 40 | 60 | 70 => ProportionGroup::Moderate,
            _ => ProportionGroup::Extreme,
        }
    }
}

impl TryFrom<u8> for Proportion {
    type Error = Error;
    fn try_from(k: u8) -> Result<Self> {
        Self::new(k)
    }
}

impl From<Proportion> for u8 {
    fn from(p: Proportion) -> u8 {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub test: usize,
    pub prod: usize,
}

/// Per-column z-score parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Population statistics over `rows`; constant columns get scale 1.
    pub fn fit<'a>(dim: usize, rows: impl Iterator<Item = &'a [f64]> + Clone) -> Self {
        let mut means = vec![0.0; dim];
        let mut n = 0usize;
        for r in rows.clone() {
            for (m, &v) in means.iter_mut().zip(r) {
                *m += v;
            }
            n += 1;
        }
        if n == 0 {
            return Self::identity(dim);
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut vars = vec![0.0; dim];
        for r in rows {
            for ((s, &v), m) in vars.iter_mut().zip(r).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = vars
            .into_iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, stds }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    pub fn apply_in_place(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.means).zip(&self.stds) {
            *v = (*v - m) / s;
        }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        let mut out = row.to_vec();
        self.apply_in_place(&mut out);
        out
    }
}

/// A dataset whose labels must be explicitly revealed.
///
/// Every label access goes through [`MaskedDataset::reveal`] or
/// [`MaskedDataset::reveal_all`], both of which are counted. Counters are
/// per instance: a clone starts from zero.
#[derive(Debug)]
pub struct MaskedDataset {
    inner: Dataset,
    full_passes: AtomicUsize,
    single_reads: AtomicUsize,
}

impl Clone for MaskedDataset {
    fn clone(&self) -> Self {
        Self::new(self.inner.clone())
    }
}

impl PartialEq for MaskedDataset {
    fn eq(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

impl MaskedDataset {
    pub fn new(inner: Dataset) -> Self {
        Self {
            inner,
            full_passes: AtomicUsize::new(0),
            single_reads: AtomicUsize::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn class_count(&self) -> usize {
        self.inner.class_count()
    }

    pub fn ids(&self) -> &[u64] {
        self.inner.ids()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.inner.row(i)
    }

    pub fn features(&self) -> &[f64] {
        self.inner.features()
    }

    /// Reveals the label of row `i`.
    pub fn reveal(&self, i: usize) -> usize {
        self.single_reads.fetch_add(1, Ordering::Relaxed);
        self.inner.labels[i]
    }

    /// Reveals every label in one pass.
    pub fn reveal_all(&self) -> &[usize] {
        self.full_passes.fetch_add(1, Ordering::Relaxed);
        &self.inner.labels
    }

    pub fn full_passes(&self) -> usize {
        self.full_passes.load(Ordering::Relaxed)
    }

    pub fn single_reads(&self) -> usize {
        self.single_reads.load(Ordering::Relaxed)
    }
}

/// Train, test, pool and production-eval partitions of one biased split.
/// All features are standardized with [`BiasedSplit::standardizer`].
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub pool: MaskedDataset,
    pub production_eval: MaskedDataset,
    pub proportion: Proportion,
    pub condition: SplitCondition,
    pub sizes: SplitSizes,
    pub seed: u64,
    pub standardizer: Standardizer,
}

/// Ids per partition plus everything needed to replay a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub proportion: Proportion,
    pub condition: SplitCondition,
    pub sizes: SplitSizes,
    pub train_ids: Vec<u64>,
    pub test_ids: Vec<u64>,
    pub pool_ids: Vec<u64>,
    pub production_eval_ids: Vec<u64>,
}

fn bin_a_count(total: usize, percent: u8) -> usize {
    total * usize::from(percent) / 100
}

/// Draws train and test with `k`% from bin A and production with `100-k`%
/// from bin A, without replacement, then carves a pool of `|test|` rows out of
/// production. Fractional bin counts are floored for bin A.
pub fn biased_split(
    ds: &Dataset,
    cond: &SplitCondition,
    k: Proportion,
    sizes: SplitSizes,
    seed: u64,
) -> Result<BiasedSplit> {
    cond.check(ds.dim())?;
    let (mut bin_a, mut bin_b): (Vec<usize>, Vec<usize>) =
        (0..ds.len()).partition(|&i| cond.holds(ds.row(i)));
    let mut rng = seed::rng(seed::derive(seed, "bins", &[]));
    bin_a.shuffle(&mut rng);
    bin_b.shuffle(&mut rng);

    let kp = k.percent();
    let test_a = bin_a_count(sizes.test, kp);
    let train_a = bin_a_count(sizes.train, kp);
    let prod_a = bin_a_count(sizes.prod, 100 - kp);
    let need_a = test_a + train_a + prod_a;
    let need_b = sizes.test + sizes.train + sizes.prod - need_a;
    if need_a > bin_a.len() {
        return Err(Error::Capacity {
            what: format!("bin A ({cond})"),
            required: need_a,
            available: bin_a.len(),
        });
    }
    if need_b > bin_b.len() {
        return Err(Error::Capacity {
            what: format!("bin B (not {cond})"),
            required: need_b,
            available: bin_b.len(),
        });
    }

    let mut take_a = bin_a.into_iter();
    let mut take_b = bin_b.into_iter();
    let mut draw = |n_a: usize, n_b: usize| {
        let mut idx: Vec<usize> = take_a.by_ref().take(n_a).collect();
        idx.extend(take_b.by_ref().take(n_b));
        idx.sort_unstable();
        idx
    };
    let test_idx = draw(test_a, sizes.test - test_a);
    let train_idx = draw(train_a, sizes.train - train_a);
    let prod_idx = draw(prod_a, sizes.prod - prod_a);

    let mut all: Vec<usize> = [&train_idx[..], &test_idx, &prod_idx].concat();
    all.sort_unstable();
    let standardizer = Standardizer::fit(ds.dim(), all.iter().map(|&i| ds.row(i)));

    let production = ds.select(&prod_idx).standardized(&standardizer);
    let (pool, production_eval) =
        carve_pool(&production, sizes.test, seed::derive(seed, "pool", &[]))?;
    Ok(BiasedSplit {
        train: ds.select(&train_idx).standardized(&standardizer),
        test: ds.select(&test_idx).standardized(&standardizer),
        pool: MaskedDataset::new(pool),
        production_eval: MaskedDataset::new(production_eval),
        proportion: k,
        condition: *cond,
        sizes,
        seed,
        standardizer,
    })
}

/// Uniform random pool of `pool_size` rows and its complement, both in the
/// original row order.
pub fn carve_pool(production: &Dataset, pool_size: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if pool_size > production.len() {
        return Err(Error::Capacity {
            what: "pool".into(),
            required: pool_size,
            available: production.len(),
        });
    }
    let mut rng = seed::rng(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, production.len(), pool_size).into_vec();
    chosen.sort_unstable();
    let mut in_pool = vec![false; production.len()];
    for &i in &chosen {
        in_pool[i] = true;
    }
    let rest: Vec<usize> = (0..production.len()).filter(|&i| !in_pool[i]).collect();
    Ok((production.select(&chosen), production.select(&rest)))
}

impl BiasedSplit {
    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            seed: self.seed,
            proportion: self.proportion,
            condition: self.condition,
            sizes: self.sizes,
            train_ids: self.train.ids().to_vec(),
            test_ids: self.test.ids().to_vec(),
            pool_ids: self.pool.ids().to_vec(),
            production_eval_ids: self.production_eval.ids().to_vec(),
        }
    }

    /// Rebuilds the split recorded in `manifest` from the raw dataset it was
    /// drawn from.
    pub fn from_manifest(ds: &Dataset, manifest: &SplitManifest) -> Result<Self> {
        let pos = ds.id_positions();
        let lookup = |ids: &[u64]| -> Result<Vec<usize>> {
            ids.iter()
                .map(|id| {
                    pos.get(id)
                        .copied()
                        .ok_or_else(|| Error::Schema(format!("manifest id {id} not in dataset")))
                })
                .collect()
        };
        let train_idx = lookup(&manifest.train_ids)?;
        let test_idx = lookup(&manifest.test_ids)?;
        let pool_idx = lookup(&manifest.pool_ids)?;
        let eval_idx = lookup(&manifest.production_eval_ids)?;
        let mut all: Vec<usize> = [&train_idx[..], &test_idx, &pool_idx, &eval_idx].concat();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Consistency("manifest partitions overlap".into()));
        }
        let standardizer = Standardizer::fit(ds.dim(), all.iter().map(|&i| ds.row(i)));
        let part = |idx: &[usize]| ds.select(idx).standardized(&standardizer);
        Ok(BiasedSplit {
            train: part(&train_idx),
            test: part(&test_idx),
            pool: MaskedDataset::new(part(&pool_idx)),
            production_eval: MaskedDataset::new(part(&eval_idx)),
            proportion: manifest.proportion,
            condition: manifest.condition,
            sizes: manifest.sizes,
            seed: manifest.seed,
            standardizer,
        })
    }
}
