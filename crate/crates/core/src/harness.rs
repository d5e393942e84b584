//! Experiment orchestration: synthetic data, single runs of one strategy on
//! one split, and the full proportions x strategies x repetitions grid.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basemodel::{
    ingest_scores, score_batch, score_masked, train_builtin, BlackboxModel, LinearSoftmax,
    ScoredDataset, TrainParams,
};
use crate::data::{
    biased_split, load_csv, BiasedSplit, CsvOptions, Dataset, Proportion, SplitCondition,
    SplitManifest, SplitSizes,
};
use crate::error::{Error, Result};
use crate::metrics::{
    abs_error, aggregate, summarize, write_curves_csv, AggregatedCurve, CurvePoint, ErrorCurve,
    Method, MethodTable, Summary, DEFAULT_TOLERANCES,
};
use crate::predictor::{BinnedPredictor, DEFAULT_BINS};
use crate::resample::{
    build_codebook, compute_weights, data_vectors, default_codewords, upsample, DEFAULT_THRESHOLD,
};
use crate::seed;
use crate::strategy::{
    apply_iteration, batch_budget, select_additions, select_deletions, StrategyKind, TestSetState,
    DEFAULT_ITERATIONS,
};

/// Two Gaussian clusters per class. A biasing feature (column 0) is centred
/// at `+bias_shift` for the "easy" cluster and `-bias_shift` for the "hard"
/// one; the easy cluster separates classes by `easy_separation`, the hard one
/// by `hard_separation`. Labels depend on the features only through the
/// generating model, so any split on column 0 is a pure covariate shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub size: usize,
    pub dim: usize,
    pub classes: usize,
    pub bias_shift: f64,
    pub easy_separation: f64,
    pub hard_separation: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            size: 16_000,
            dim: 6,
            classes: 2,
            bias_shift: 1.5,
            easy_separation: 3.0,
            hard_separation: 1.2,
            noise_std: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Bin A: biasing feature above zero.
    pub fn biasing_condition(&self) -> SplitCondition {
        SplitCondition::greater_than(0, 0.0)
    }

    /// Partition sizes in the 1 : 2 : 3 test : train : production shape,
    /// with a 2000-sample pool.
    pub fn default_sizes() -> SplitSizes {
        SplitSizes {
            train: 4000,
            test: 2000,
            prod: 6000,
        }
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.size == 0 {
        return Err(Error::Domain("synthetic size must be positive".into()));
    }
    if spec.dim < 2 || spec.classes < 2 {
        return Err(Error::Domain(format!(
            "synthetic data needs dim >= 2 and classes >= 2, got {} and {}",
            spec.dim, spec.classes
        )));
    }
    if !spec.noise_std.is_finite() || spec.noise_std <= 0.0 {
        return Err(Error::Domain(format!(
            "degenerate covariance: noise std {}",
            spec.noise_std
        )));
    }
    let noise = Normal::new(0.0, spec.noise_std).expect("checked std");
    let mut rng = seed::rng(spec.seed);
    let d = spec.dim;
    let mut features = Vec::with_capacity(spec.size * d);
    let mut labels = Vec::with_capacity(spec.size);
    for _ in 0..spec.size {
        let easy = rng.random_bool(0.5);
        let class = rng.random_range(0..spec.classes);
        let (shift, sep) = if easy {
            (spec.bias_shift, spec.easy_separation)
        } else {
            (-spec.bias_shift, spec.hard_separation)
        };
        let signal_axis = 1 + class % (d - 1);
        for j in 0..d {
            let mean = if j == 0 {
                shift
            } else if j == signal_axis {
                sep
            } else {
                0.0
            };
            features.push(mean + noise.sample(&mut rng));
        }
        labels.push(class);
    }
    let ids = (0..spec.size as u64).collect();
    let names = (0..d)
        .map(|j| {
            if j == 0 {
                "bias".to_owned()
            } else {
                format!("x{j}")
            }
        })
        .collect();
    Dataset::from_flat(features, d, labels, ids, spec.classes)?.with_feature_names(names)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        #[serde(flatten)]
        options: CsvOptions,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Builtin {
        learning_rate: f64,
        epochs: usize,
    },
    /// Score CSV covering every id of the dataset.
    External {
        scores: PathBuf,
    },
}

impl Default for ModelChoice {
    fn default() -> Self {
        let p = TrainParams::default();
        ModelChoice::Builtin {
            learning_rate: p.learning_rate,
            epochs: p.epochs,
        }
    }
}

fn default_proportions() -> Vec<Proportion> {
    Proportion::all()
}
fn default_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}
fn default_repetitions() -> usize {
    4
}
fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}
fn default_bins() -> usize {
    DEFAULT_BINS
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_sizes() -> SplitSizes {
    SyntheticSpec::default_sizes()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// `column>value` or `column=value`; defaults to the synthetic biasing
    /// feature for synthetic data.
    #[serde(default)]
    pub condition: Option<String>,
    #[serde(default = "default_sizes")]
    pub sizes: SplitSizes,
    #[serde(default = "default_proportions")]
    pub proportions: Vec<Proportion>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Defaults to features + classes, or 256 for image-like data.
    #[serde(default)]
    pub codewords: Option<usize>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelChoice,
}

impl ExperimentConfig {
    pub fn synthetic(spec: SyntheticSpec) -> Self {
        Self {
            dataset: DatasetSource::Synthetic(spec),
            condition: None,
            sizes: default_sizes(),
            proportions: default_proportions(),
            strategies: default_strategies(),
            repetitions: default_repetitions(),
            iterations: default_iterations(),
            bins: default_bins(),
            codewords: None,
            threshold: default_threshold(),
            seed: 0,
            model: ModelChoice::default(),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Domain("repetitions must be at least 1".into()));
        }
        if self.proportions.is_empty() {
            return Err(Error::Domain("no proportions configured".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Domain("no strategies configured".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Domain("iterations must be at least 1".into()));
        }
        if self.bins == 0 {
            return Err(Error::Domain("bin count must be at least 1".into()));
        }
        if self.codewords == Some(0) {
            return Err(Error::Domain("codeword count must be at least 1".into()));
        }
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return Err(Error::Domain("threshold must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn run_params(&self) -> RunParams {
        RunParams {
            iterations: self.iterations,
            bins: self.bins,
            codewords: self.codewords,
            threshold: self.threshold,
            verbose_weights: false,
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetSource::Synthetic(spec) => generate_synthetic(spec),
            DatasetSource::Csv { path, options } => load_csv(path, options),
        }
    }

    pub fn split_condition(&self, ds: &Dataset) -> Result<SplitCondition> {
        match (&self.condition, &self.dataset) {
            (Some(expr), _) => SplitCondition::parse(expr, ds),
            (None, DatasetSource::Synthetic(spec)) => Ok(spec.biasing_condition()),
            (None, DatasetSource::Csv { .. }) => Err(Error::Schema(
                "a split condition is required for CSV datasets".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub iterations: usize,
    pub bins: usize,
    pub codewords: Option<usize>,
    pub threshold: f64,
    pub verbose_weights: bool,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            bins: DEFAULT_BINS,
            codewords: None,
            threshold: DEFAULT_THRESHOLD,
            verbose_weights: false,
        }
    }
}

/// Base-model scores for every partition a run touches. Only the test
/// partition carries outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitScores {
    pub test: ScoredDataset,
    pub pool: ScoredDataset,
    pub production_eval: ScoredDataset,
}

pub fn score_split(model: &dyn BlackboxModel, split: &BiasedSplit) -> Result<SplitScores> {
    Ok(SplitScores {
        test: score_batch(model, &split.test, true)?,
        pool: score_masked(model, &split.pool)?,
        production_eval: score_masked(model, &split.production_eval)?,
    })
}

/// Looks up externally produced scores for each partition by id.
pub fn scores_from_table(table: &ScoredDataset, split: &BiasedSplit) -> Result<SplitScores> {
    Ok(SplitScores {
        test: table.subset(split.test.ids(), Some(split.test.labels()))?,
        pool: table.subset(split.pool.ids(), None)?,
        production_eval: table.subset(split.production_eval.ids(), None)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationEvent {
    pub iteration: usize,
    pub labels_added: usize,
    pub test_size: usize,
    pub initial_members: usize,
    pub resampled_size: u64,
    pub resample_fallback: bool,
    pub estimates: MethodTable,
    pub errors: MethodTable,
    /// Ids moved in by the step that follows this evaluation.
    pub added: Vec<u64>,
    /// Ids retired by the step that follows this evaluation.
    pub deleted: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub iteration: usize,
    pub id: u64,
    pub codeword: usize,
    pub raw_weight: f64,
    pub multiplicity: u32,
}

/// Label reads observed during one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAccess {
    pub production_eval_passes: usize,
    pub production_eval_single_reads: usize,
    pub pool_single_reads: usize,
    pub pool_passes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// One curve per [`Method::ALL`] entry, in that order.
    pub curves: Vec<ErrorCurve>,
    pub events: Vec<IterationEvent>,
    pub true_accuracy: f64,
    pub resample_fallbacks: usize,
    pub label_access: LabelAccess,
    pub final_test_ids: Vec<u64>,
    pub weights: Vec<WeightRecord>,
}

impl RunOutput {
    pub fn curve(&self, method: Method) -> &ErrorCurve {
        self.curves
            .iter()
            .find(|c| c.method == method)
            .expect("every method has a curve")
    }
}

struct KnownMember {
    confidence: f64,
    outcome: u8,
    codeword: usize,
}

fn mean_outcome(outcomes: &[u8]) -> f64 {
    outcomes.iter().map(|&o| f64::from(o)).sum::<f64>() / outcomes.len() as f64
}

/// Runs one maintenance strategy on one split.
///
/// The codebook is built once over the test set and the full unlabeled batch
/// (pool and production-eval) and then frozen. At every iteration `t` in
/// `0..=iterations` the predictor is refit on the current test set, weights
/// and multiplicities are recomputed, and the four estimates are scored
/// against the production-eval accuracy; for `t < iterations` the strategy
/// then adds and possibly deletes one minibatch.
pub fn run_single(
    split: &BiasedSplit,
    scores: &SplitScores,
    kind: StrategyKind,
    params: &RunParams,
    seed: u64,
) -> Result<RunOutput> {
    if split.test.is_empty() {
        return Err(Error::EmptyInput("test set is empty".into()));
    }
    if split.production_eval.is_empty() {
        return Err(Error::EmptyInput("production-eval set is empty".into()));
    }
    if scores.test.ids() != split.test.ids()
        || scores.pool.ids() != split.pool.ids()
        || scores.production_eval.ids() != split.production_eval.ids()
    {
        return Err(Error::Consistency(
            "scores do not line up with the split".into(),
        ));
    }
    let eval_before = (
        split.production_eval.full_passes(),
        split.production_eval.single_reads(),
    );
    let pool_before = (split.pool.full_passes(), split.pool.single_reads());

    let true_accuracy = {
        let labels = split.production_eval.reveal_all();
        let hits = scores
            .production_eval
            .predicted()
            .iter()
            .zip(labels)
            .filter(|(p, l)| p == l)
            .count();
        hits as f64 / labels.len() as f64
    };

    let dim = split.test.dim();
    let test_vecs = data_vectors(split.test.features(), dim, &scores.test);
    let pool_vecs = data_vectors(split.pool.features(), dim, &scores.pool);
    let eval_vecs = data_vectors(
        split.production_eval.features(),
        dim,
        &scores.production_eval,
    );
    let production_vecs: Vec<Vec<f64>> = pool_vecs.iter().chain(&eval_vecs).cloned().collect();
    let k = params
        .codewords
        .unwrap_or_else(|| default_codewords(dim, split.test.class_count()));
    let codebook = build_codebook(
        &test_vecs,
        &production_vecs,
        k,
        seed::derive(seed, "codebook", &[]),
    )?;
    let production_codes = codebook.assign_all(&production_vecs);
    let pool_codes = &production_codes[..pool_vecs.len()];

    let test_outcomes = scores
        .test
        .outcome()
        .ok_or_else(|| Error::Consistency("test scores carry no outcomes".into()))?;
    let mut known: HashMap<u64, KnownMember> = split
        .test
        .ids()
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            (
                id,
                KnownMember {
                    confidence: scores.test.confidence()[i],
                    outcome: test_outcomes[i],
                    codeword: codebook.assign(&test_vecs[i]),
                },
            )
        })
        .collect();

    let budget = batch_budget(split.pool.len(), params.iterations)?;
    let mut state = TestSetState::new(split.test.ids(), split.pool.ids())?;
    let mut points: BTreeMap<Method, Vec<CurvePoint>> = BTreeMap::new();
    let mut events = Vec::with_capacity(params.iterations + 1);
    let mut weight_trace = Vec::new();
    let mut fallbacks = 0;

    for t in 0..=params.iterations {
        let ids: Vec<u64> = state.member_ids().collect();
        let members: Vec<&KnownMember> = ids.iter().map(|id| &known[id]).collect();
        let conf: Vec<f64> = members.iter().map(|m| m.confidence).collect();
        let outcomes: Vec<u8> = members.iter().map(|m| m.outcome).collect();
        let codes: Vec<usize> = members.iter().map(|m| m.codeword).collect();

        let raw = BinnedPredictor::fit(&conf, &outcomes, params.bins, None)?;
        let test_set = mean_outcome(&outcomes);
        let perf_pred = raw.predict_batch(&scores.production_eval)?;

        let weights = compute_weights(&codes, &production_codes, k, params.threshold)?;
        let (test_set_resampled, perf_pred_resampled, resampled_size, fallback) =
            match upsample(&ids, &weights, &codes) {
                Ok(ws) => {
                    let refit = BinnedPredictor::fit(
                        &conf,
                        &outcomes,
                        params.bins,
                        Some(&ws.multiplicities),
                    )?;
                    if params.verbose_weights {
                        weight_trace.extend(ws.ids.iter().enumerate().map(|(i, &id)| {
                            WeightRecord {
                                iteration: t,
                                id,
                                codeword: ws.codewords[i],
                                raw_weight: ws.raw_weights[i],
                                multiplicity: ws.multiplicities[i],
                            }
                        }));
                    }
                    (
                        ws.weighted_accuracy(&outcomes),
                        refit.predict_batch(&scores.production_eval)?,
                        ws.resampled_len(),
                        false,
                    )
                }
                Err(Error::DegenerateResample) => {
                    fallbacks += 1;
                    (test_set, perf_pred, ids.len() as u64, true)
                }
                Err(e) => return Err(e),
            };

        let estimates: MethodTable = [
            (Method::PerfPredResampled, perf_pred_resampled),
            (Method::PerfPred, perf_pred),
            (Method::TestSetResampled, test_set_resampled),
            (Method::TestSet, test_set),
        ]
        .into_iter()
        .collect();
        let errors: MethodTable = estimates
            .iter()
            .map(|(&m, &e)| (m, abs_error(e, true_accuracy)))
            .collect();
        let labels_added = state.revealed().len();
        for (&m, &error) in &errors {
            points.entry(m).or_default().push(CurvePoint {
                iteration: t,
                labels_added,
                error,
            });
        }

        let (added, deleted) = if t < params.iterations {
            let b = budget.at(t);
            let adds = select_additions(
                kind,
                &state,
                &scores.pool,
                &raw,
                b,
                seed::derive(seed, "add", &[t as u64]),
            )?;
            let dels = select_deletions(
                kind,
                &state,
                &scores.test,
                &raw,
                adds.len(),
                seed::derive(seed, "delete", &[t as u64]),
            )?;
            state = apply_iteration(state, &adds, &dels)?;
            for &id in &adds {
                let row = scores
                    .pool
                    .position(id)
                    .ok_or_else(|| Error::Consistency(format!("pool id {id} unscored")))?;
                let label = split.pool.reveal(row);
                known.insert(
                    id,
                    KnownMember {
                        confidence: scores.pool.confidence()[row],
                        outcome: u8::from(scores.pool.predicted()[row] == label),
                        codeword: pool_codes[row],
                    },
                );
            }
            (adds, dels)
        } else {
            (Vec::new(), Vec::new())
        };

        events.push(IterationEvent {
            iteration: t,
            labels_added,
            test_size: ids.len(),
            initial_members: ids
                .iter()
                .filter(|id| scores.test.position(**id).is_some())
                .count(),
            resampled_size,
            resample_fallback: fallback,
            estimates,
            errors,
            added,
            deleted,
        });
    }

    let curves = Method::ALL
        .iter()
        .map(|m| ErrorCurve::new(*m, points.remove(m).unwrap_or_default()))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput {
        curves,
        events,
        true_accuracy,
        resample_fallbacks: fallbacks,
        label_access: LabelAccess {
            production_eval_passes: split.production_eval.full_passes() - eval_before.0,
            production_eval_single_reads: split.production_eval.single_reads() - eval_before.1,
            pool_passes: split.pool.full_passes() - pool_before.0,
            pool_single_reads: split.pool.single_reads() - pool_before.1,
        },
        final_test_ids: state.member_ids().collect(),
        weights: weight_trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub repetition: usize,
    pub manifest: SplitManifest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub proportion: Proportion,
    pub strategy: StrategyKind,
    pub repetition: usize,
    pub seed: u64,
    pub output: RunOutput,
}

impl CellResult {
    pub fn name(&self) -> String {
        format!(
            "k{}-{}-rep{}",
            self.proportion.percent(),
            self.strategy,
            self.repetition
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub config: ExperimentConfig,
    pub splits: Vec<SplitRecord>,
    pub models: Vec<(Proportion, usize, LinearSoftmax)>,
    pub cells: Vec<CellResult>,
    pub curves: Vec<AggregatedCurve>,
    pub summary: Summary,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Worker threads; 0 lets the pool decide.
    pub parallelism: usize,
    pub verbose_weights: bool,
}

struct PreparedSplit {
    proportion: Proportion,
    repetition: usize,
    split: BiasedSplit,
    scores: SplitScores,
    model: Option<LinearSoftmax>,
}

fn prepare_split(
    config: &ExperimentConfig,
    ds: &Dataset,
    cond: &SplitCondition,
    external: Option<&ScoredDataset>,
    proportion: Proportion,
    repetition: usize,
) -> Result<PreparedSplit> {
    let key = [u64::from(proportion.percent()), repetition as u64];
    let split = biased_split(
        ds,
        cond,
        proportion,
        config.sizes,
        seed::derive(config.seed, "split", &key),
    )?;
    let (scores, model) = match (&config.model, external) {
        (_, Some(table)) => (scores_from_table(table, &split)?, None),
        (
            ModelChoice::Builtin {
                learning_rate,
                epochs,
            },
            None,
        ) => {
            let mut model = train_builtin(
                &split.train,
                &TrainParams {
                    learning_rate: *learning_rate,
                    epochs: *epochs,
                    seed: seed::derive(config.seed, "model", &key),
                },
            )?;
            let scores = score_split(&model, &split)?;
            model.standardizer = Some(split.standardizer.clone());
            (scores, Some(model))
        }
        (ModelChoice::External { .. }, None) => {
            return Err(Error::Consistency("external score table not loaded".into()))
        }
    };
    Ok(PreparedSplit {
        proportion,
        repetition,
        split,
        scores,
        model,
    })
}

/// Runs every (proportion, strategy, repetition) cell. Splits and base models
/// depend on (proportion, repetition) only, so the strategies of one
/// repetition are compared on identical data.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<ResultSet> {
    config.validate()?;
    let ds = config.load_dataset()?;
    let cond = config.split_condition(&ds)?;
    let external = match &config.model {
        ModelChoice::External { scores } => Some(ingest_scores(scores)?),
        ModelChoice::Builtin { .. } => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism)
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    let mut params = config.run_params();
    params.verbose_weights = opts.verbose_weights;

    pool.install(|| {
        let split_keys: Vec<(Proportion, usize)> = config
            .proportions
            .iter()
            .flat_map(|&k| (0..config.repetitions).map(move |r| (k, r)))
            .collect();
        let prepared = split_keys
            .par_iter()
            .map(|&(k, r)| prepare_split(config, &ds, &cond, external.as_ref(), k, r))
            .collect::<Result<Vec<_>>>()?;

        let cell_keys: Vec<(usize, StrategyKind)> = (0..prepared.len())
            .flat_map(|i| config.strategies.iter().map(move |&s| (i, s)))
            .collect();
        let cells = cell_keys
            .par_iter()
            .map(|&(i, strategy)| {
                let p = &prepared[i];
                let cell_seed = seed::derive(
                    config.seed,
                    "cell",
                    &[
                        u64::from(p.proportion.percent()),
                        strategy.index(),
                        p.repetition as u64,
                    ],
                );
                // Fresh label-access counters per cell.
                let split = p.split.clone();
                run_single(&split, &p.scores, strategy, &params, cell_seed)
                    .map(|output| CellResult {
                        proportion: p.proportion,
                        strategy,
                        repetition: p.repetition,
                        seed: cell_seed,
                        output,
                    })
                    .map_err(|e| Error::Cell {
                        proportion: p.proportion.percent(),
                        strategy: strategy.to_string(),
                        repetition: p.repetition,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut curves = Vec::new();
        for &k in &config.proportions {
            for &strategy in &config.strategies {
                let reps: Vec<&CellResult> = cells
                    .iter()
                    .filter(|c| c.proportion == k && c.strategy == strategy)
                    .collect();
                for m in Method::ALL {
                    let per_rep: Vec<&ErrorCurve> =
                        reps.iter().map(|c| c.output.curve(m)).collect();
                    curves.push(aggregate(k, strategy, &per_rep)?);
                }
            }
        }
        let summary = summarize(&curves, &DEFAULT_TOLERANCES)?;
        let splits = prepared
            .iter()
            .map(|p| SplitRecord {
                repetition: p.repetition,
                manifest: p.split.manifest(),
            })
            .collect();
        let models = prepared
            .iter()
            .filter_map(|p| p.model.clone().map(|m| (p.proportion, p.repetition, m)))
            .collect();
        Ok(ResultSet {
            config: config.clone(),
            splits,
            models,
            cells,
            curves,
            summary,
        })
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub name: String,
    pub proportion: Proportion,
    pub strategy: StrategyKind,
    pub repetition: usize,
    pub seed: u64,
    pub true_accuracy: f64,
    pub resample_fallbacks: usize,
    pub label_access: LabelAccess,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsManifest {
    pub config: ExperimentConfig,
    pub splits: Vec<SplitRecord>,
    pub cells: Vec<CellRecord>,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes `manifest.json`, `curves.csv`, `summary.json`, `events/<cell>.jsonl`,
/// `models/<split>.json` for built-in models and, when weights were traced,
/// `weights/<cell>.csv`.
pub fn write_results(results: &ResultSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let mkdir = |p: &Path| {
        fs::create_dir_all(p).map_err(|e| Error::io(format!("creating {}", p.display()), e))
    };
    mkdir(dir)?;
    mkdir(&dir.join("events"))?;

    let manifest = ResultsManifest {
        config: results.config.clone(),
        splits: results.splits.clone(),
        cells: results
            .cells
            .iter()
            .map(|c| CellRecord {
                name: c.name(),
                proportion: c.proportion,
                strategy: c.strategy,
                repetition: c.repetition,
                seed: c.seed,
                true_accuracy: c.output.true_accuracy,
                resample_fallbacks: c.output.resample_fallbacks,
                label_access: c.output.label_access,
            })
            .collect(),
    };
    write_file(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    write_curves_csv(dir.join("curves.csv"), &results.curves)?;
    write_file(
        &dir.join("summary.json"),
        serde_json::to_string_pretty(&results.summary)?.as_bytes(),
    )?;

    for cell in &results.cells {
        let mut buf = Vec::new();
        for ev in &cell.output.events {
            serde_json::to_writer(&mut buf, ev)?;
            buf.push(b'\n');
        }
        write_file(
            &dir.join("events").join(format!("{}.jsonl", cell.name())),
            &buf,
        )?;
    }

    if !results.models.is_empty() {
        mkdir(&dir.join("models"))?;
        for (k, rep, model) in &results.models {
            write_file(
                &dir.join("models")
                    .join(format!("k{}-rep{rep}.json", k.percent())),
                model.to_json()?.as_bytes(),
            )?;
        }
    }

    let traced: Vec<&CellResult> = results
        .cells
        .iter()
        .filter(|c| !c.output.weights.is_empty())
        .collect();
    if !traced.is_empty() {
        mkdir(&dir.join("weights"))?;
        for cell in traced {
            let path = dir.join("weights").join(format!("{}.csv", cell.name()));
            let mut f = fs::File::create(&path)
                .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
            let mut text = String::from("iteration,id,codeword,raw_weight,multiplicity\n");
            for w in &cell.output.weights {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    w.iteration, w.id, w.codeword, w.raw_weight, w.multiplicity
                ));
            }
            f.write_all(text.as_bytes())
                .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        }
    }
    Ok(())
}
