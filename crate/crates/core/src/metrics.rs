//! Error curves and their summaries: AUC, rank order and labeling effort
//! saved relative to the plain test-set baseline.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Proportion, ProportionGroup};
use crate::error::{Error, Result};
use crate::strategy::StrategyKind;

/// Tolerances (percentage points) reported in every summary.
pub const DEFAULT_TOLERANCES: [f64; 3] = [3.0, 6.0, 9.0];

/// The four accuracy estimates compared per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PerfPredResampled,
    PerfPred,
    TestSetResampled,
    TestSet,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::PerfPredResampled,
        Method::PerfPred,
        Method::TestSetResampled,
        Method::TestSet,
    ];

    /// The traditional test-set estimate every other method is compared to.
    pub const BASELINE: Method = Method::TestSet;

    pub fn name(self) -> &'static str {
        match self {
            Self::PerfPredResampled => "perf-pred-resampled",
            Self::PerfPred => "perf-pred",
            Self::TestSetResampled => "test-set-resampled",
            Self::TestSet => "test-set",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown method `{s}`")))
    }
}

/// Absolute accuracy-estimation error in percentage points.
pub fn abs_error(estimate: f64, true_acc: f64) -> f64 {
    100.0 * (estimate - true_acc).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub labels_added: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub method: Method,
    pub points: Vec<CurvePoint>,
}

impl ErrorCurve {
    /// Iterations must run 0, 1, 2, ...; label counts must not decrease and
    /// errors must be nonnegative.
    pub fn new(method: Method, points: Vec<CurvePoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if p.iteration != i {
                return Err(Error::Domain(format!(
                    "curve point {i} has iteration {}",
                    p.iteration
                )));
            }
            if p.error.is_nan() || p.error < 0.0 {
                return Err(Error::Domain(format!("negative error {}", p.error)));
            }
        }
        if points
            .windows(2)
            .any(|w| w[1].labels_added < w[0].labels_added)
        {
            return Err(Error::Domain("labels_added decreases".into()));
        }
        Ok(Self { method, points })
    }

    pub fn final_error(&self) -> Option<f64> {
        self.points.last().map(|p| p.error)
    }
}

/// Trapezoidal area under error-vs-iteration.
pub fn auc(points: &[CurvePoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Domain("AUC needs at least two points".into()));
    }
    Ok(points
        .windows(2)
        .map(|w| {
            let dx = w[1].iteration as f64 - w[0].iteration as f64;
            0.5 * dx * (w[0].error + w[1].error)
        })
        .sum())
}

/// Relative labeling effort saved against the baseline at one tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffortSaved {
    /// Percentage of the baseline's labels that were not needed.
    Saved(f64),
    /// The method never got within tolerance.
    NotReached,
    /// The baseline never got within tolerance, or needed zero labels while
    /// the method needed some.
    Undefined,
}

/// Labels added at the first point whose error is within `tolerance`.
pub fn labels_to_reach(points: &[CurvePoint], tolerance: f64) -> Option<usize> {
    points
        .iter()
        .find(|p| p.error <= tolerance)
        .map(|p| p.labels_added)
}

pub fn effort_saved(
    baseline: &[CurvePoint],
    method: &[CurvePoint],
    tolerance: f64,
) -> Result<EffortSaved> {
    let aligned = baseline.len() == method.len()
        && baseline
            .iter()
            .zip(method)
            .all(|(a, b)| a.iteration == b.iteration && a.labels_added == b.labels_added);
    if !aligned {
        return Err(Error::Alignment(
            "baseline and method curves are on different grids".into(),
        ));
    }
    let Some(n_base) = labels_to_reach(baseline, tolerance) else {
        return Ok(EffortSaved::Undefined);
    };
    let Some(n_method) = labels_to_reach(method, tolerance) else {
        return Ok(EffortSaved::NotReached);
    };
    Ok(match (n_base, n_method) {
        (0, 0) => EffortSaved::Saved(0.0),
        (0, _) => EffortSaved::Undefined,
        (_, 0) => EffortSaved::Saved(100.0),
        (b, m) => EffortSaved::Saved(100.0 * (b as f64 - m as f64) / b as f64),
    })
}

/// Fractional ranks, 1 = smallest; ties share the mean of their positions.
pub fn rank_order(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank mean((i+1)..=(j+1))
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = shared;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatedPoint {
    pub iteration: usize,
    pub labels_added: usize,
    pub error_mean: f64,
    pub error_std: f64,
}

impl AggregatedPoint {
    fn as_point(&self) -> CurvePoint {
        CurvePoint {
            iteration: self.iteration,
            labels_added: self.labels_added,
            error: self.error_mean,
        }
    }
}

/// One method's curve averaged over repetitions of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedCurve {
    pub experiment_id: String,
    pub split_k: Proportion,
    pub strategy: StrategyKind,
    pub method: Method,
    pub points: Vec<AggregatedPoint>,
}

impl AggregatedCurve {
    pub fn mean_points(&self) -> Vec<CurvePoint> {
        self.points.iter().map(AggregatedPoint::as_point).collect()
    }
}

pub fn experiment_id(k: Proportion, strategy: StrategyKind) -> String {
    format!("k{}-{}", k.percent(), strategy)
}

/// Pointwise mean and population std over repetitions.
pub fn aggregate(
    k: Proportion,
    strategy: StrategyKind,
    repetitions: &[&ErrorCurve],
) -> Result<AggregatedCurve> {
    let first = repetitions
        .first()
        .ok_or_else(|| Error::EmptyInput("no repetitions to aggregate".into()))?;
    let len = first.points.len();
    if repetitions
        .iter()
        .any(|c| c.method != first.method || c.points.len() != len)
    {
        return Err(Error::Alignment("repetition curves differ in shape".into()));
    }
    let n = repetitions.len() as f64;
    let points = (0..len)
        .map(|i| {
            let p0 = first.points[i];
            let errors: Vec<f64> = repetitions.iter().map(|c| c.points[i].error).collect();
            let mean = errors.iter().sum::<f64>() / n;
            let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
            AggregatedPoint {
                iteration: p0.iteration,
                labels_added: p0.labels_added,
                error_mean: mean,
                error_std: var.sqrt(),
            }
        })
        .collect();
    Ok(AggregatedCurve {
        experiment_id: experiment_id(k, strategy),
        split_k: k,
        strategy,
        method: first.method,
        points,
    })
}

pub type MethodTable = BTreeMap<Method, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment_id: String,
    pub split_k: Proportion,
    pub group: ProportionGroup,
    pub strategy: StrategyKind,
    pub auc: MethodTable,
    pub rank: MethodTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucRank {
    pub auc: MethodTable,
    pub rank: MethodTable,
    pub experiments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortRow {
    pub tolerance: f64,
    /// `None` pools every strategy.
    pub strategy: Option<StrategyKind>,
    pub method: Method,
    /// Mean over experiments where a saving was defined and reached.
    pub mean_saved: Option<f64>,
    pub saved: usize,
    pub not_reached: usize,
    pub undefined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiments: Vec<ExperimentSummary>,
    pub by_strategy: BTreeMap<StrategyKind, AucRank>,
    pub by_group: BTreeMap<ProportionGroup, AucRank>,
    pub overall: AucRank,
    pub effort_saved: Vec<EffortRow>,
}

fn mean_tables<'a>(rows: impl Iterator<Item = &'a ExperimentSummary> + Clone) -> AucRank {
    let mut auc = MethodTable::new();
    let mut rank = MethodTable::new();
    let mut n = 0usize;
    for e in rows {
        n += 1;
        for (m, v) in &e.auc {
            *auc.entry(*m).or_insert(0.0) += v;
        }
        for (m, v) in &e.rank {
            *rank.entry(*m).or_insert(0.0) += v;
        }
    }
    for v in auc.values_mut().chain(rank.values_mut()) {
        *v /= n as f64;
    }
    AucRank {
        auc,
        rank,
        experiments: n,
    }
}

/// Builds the summary from per-experiment mean curves. Ranks are computed per
/// experiment from the AUCs of its methods.
pub fn summarize(curves: &[AggregatedCurve], tolerances: &[f64]) -> Result<Summary> {
    // experiment id -> curves, in order of first appearance
    let mut order: Vec<&str> = Vec::new();
    let mut by_exp: BTreeMap<&str, Vec<&AggregatedCurve>> = BTreeMap::new();
    for c in curves {
        let entry = by_exp.entry(&c.experiment_id).or_default();
        if entry.is_empty() {
            order.push(&c.experiment_id);
        }
        entry.push(c);
    }

    let mut experiments = Vec::new();
    let mut effort: BTreeMap<(usize, Option<StrategyKind>, Method), Vec<EffortSaved>> =
        BTreeMap::new();
    for id in &order {
        let group = &by_exp[id];
        if group.len() < 2 {
            return Err(Error::Domain(format!(
                "experiment {id} needs at least two methods to rank"
            )));
        }
        let aucs = group
            .iter()
            .map(|c| auc(&c.mean_points()))
            .collect::<Result<Vec<_>>>()?;
        let ranks = rank_order(&aucs);
        let head = group[0];
        experiments.push(ExperimentSummary {
            experiment_id: head.experiment_id.clone(),
            split_k: head.split_k,
            group: head.split_k.group(),
            strategy: head.strategy,
            auc: group.iter().map(|c| c.method).zip(aucs).collect(),
            rank: group.iter().map(|c| c.method).zip(ranks).collect(),
        });

        if let Some(base) = group.iter().find(|c| c.method == Method::BASELINE) {
            let base_pts = base.mean_points();
            for c in group.iter().filter(|c| c.method != Method::BASELINE) {
                let pts = c.mean_points();
                for (ti, &tol) in tolerances.iter().enumerate() {
                    let e = effort_saved(&base_pts, &pts, tol)?;
                    for s in [Some(head.strategy), None] {
                        effort.entry((ti, s, c.method)).or_default().push(e);
                    }
                }
            }
        }
    }

    let strategies: Vec<StrategyKind> = {
        let mut s: Vec<_> = experiments.iter().map(|e| e.strategy).collect();
        s.sort();
        s.dedup();
        s
    };
    let by_strategy = strategies
        .iter()
        .map(|&s| {
            (
                s,
                mean_tables(experiments.iter().filter(move |e| e.strategy == s)),
            )
        })
        .collect();
    let by_group = [ProportionGroup::Moderate, ProportionGroup::Extreme]
        .into_iter()
        .filter(|g| experiments.iter().any(|e| e.group == *g))
        .map(|g| {
            (
                g,
                mean_tables(experiments.iter().filter(move |e| e.group == g)),
            )
        })
        .collect();
    let overall = mean_tables(experiments.iter());

    let effort_saved = effort
        .into_iter()
        .map(|((ti, strategy, method), outcomes)| {
            let saved: Vec<f64> = outcomes
                .iter()
                .filter_map(|e| match e {
                    EffortSaved::Saved(v) => Some(*v),
                    _ => None,
                })
                .collect();
            EffortRow {
                tolerance: tolerances[ti],
                strategy,
                method,
                mean_saved: (!saved.is_empty())
                    .then(|| saved.iter().sum::<f64>() / saved.len() as f64),
                saved: saved.len(),
                not_reached: outcomes
                    .iter()
                    .filter(|e| matches!(e, EffortSaved::NotReached))
                    .count(),
                undefined: outcomes
                    .iter()
                    .filter(|e| matches!(e, EffortSaved::Undefined))
                    .count(),
            }
        })
        .collect();

    Ok(Summary {
        experiments,
        by_strategy,
        by_group,
        overall,
        effort_saved,
    })
}

pub const CURVES_HEADER: [&str; 8] = [
    "experiment_id",
    "split_k",
    "strategy",
    "method",
    "iteration",
    "labels_added",
    "error_mean",
    "error_std",
];

pub fn write_curves_csv(path: impl AsRef<Path>, curves: &[AggregatedCurve]) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CURVES_HEADER).map_err(csv_err)?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.experiment_id.clone(),
                c.split_k.percent().to_string(),
                c.strategy.to_string(),
                c.method.to_string(),
                p.iteration.to_string(),
                p.labels_added.to_string(),
                p.error_mean.to_string(),
                p.error_std.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_curves_csv(path: impl AsRef<Path>) -> Result<Vec<AggregatedCurve>> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(CURVES_HEADER) {
        return Err(Error::Schema(format!(
            "{} does not have the curves header",
            path.display()
        )));
    }
    let mut curves: Vec<AggregatedCurve> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = i + 1;
        let field = |c: usize| -> &str { rec.get(c).unwrap_or("") };
        let parse_err = |c: usize, message: String| Error::Parse {
            row,
            column: CURVES_HEADER[c].to_owned(),
            message,
        };
        let num = |c: usize| -> Result<usize> {
            field(c).parse().map_err(|e| parse_err(c, format!("{e}")))
        };
        let real = |c: usize| -> Result<f64> {
            field(c).parse().map_err(|e| parse_err(c, format!("{e}")))
        };
        let k = u8::try_from(num(1)?)
            .map_err(|e| parse_err(1, e.to_string()))
            .and_then(Proportion::new)?;
        let strategy: StrategyKind = field(2).parse()?;
        let method: Method = field(3).parse()?;
        let point = AggregatedPoint {
            iteration: num(4)?,
            labels_added: num(5)?,
            error_mean: real(6)?,
            error_std: real(7)?,
        };
        match curves.last_mut() {
            Some(c) if c.experiment_id == field(0) && c.method == method => c.points.push(point),
            _ => curves.push(AggregatedCurve {
                experiment_id: field(0).to_owned(),
                split_k: k,
                strategy,
                method,
                points: vec![point],
            }),
        }
    }
    Ok(curves)
}
