//! Test-set maintenance: add-only or add-delete, with random or
//! uncertainty-prioritized selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::basemodel::ScoredDataset;
use crate::error::{Error, Result};
use crate::predictor::BinnedPredictor;
use crate::seed;

pub const DEFAULT_ITERATIONS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    AddOnlyRandom,
    AddOnlyPrioritized,
    AddDeleteRandom,
    AddDeletePrioritized,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::AddOnlyRandom,
        StrategyKind::AddOnlyPrioritized,
        StrategyKind::AddDeleteRandom,
        StrategyKind::AddDeletePrioritized,
    ];

    pub fn deletes(self) -> bool {
        matches!(self, Self::AddDeleteRandom | Self::AddDeletePrioritized)
    }

    pub fn prioritized(self) -> bool {
        matches!(self, Self::AddOnlyPrioritized | Self::AddDeletePrioritized)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::AddOnlyRandom => "add-only-random",
            Self::AddOnlyPrioritized => "add-only-prioritized",
            Self::AddDeleteRandom => "add-delete-random",
            Self::AddDeletePrioritized => "add-delete-prioritized",
        }
    }

    pub fn index(self) -> u64 {
        Self::ALL.iter().position(|&k| k == self).unwrap() as u64
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown strategy `{s}`")))
    }
}

/// Per-iteration labeling budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub per_iteration: usize,
    pub iterations: usize,
    /// Added to the final iteration's budget.
    pub remainder: usize,
}

impl Budget {
    /// Labels available at step `t` (0-based).
    pub fn at(&self, t: usize) -> usize {
        if t + 1 == self.iterations {
            self.per_iteration + self.remainder
        } else if t < self.iterations {
            self.per_iteration
        } else {
            0
        }
    }
}

/// `floor(pool / iterations)` per iteration; the final iteration absorbs the
/// remainder.
pub fn batch_budget(pool_size: usize, iterations: usize) -> Result<Budget> {
    if iterations == 0 {
        return Err(Error::Domain("iterations must be at least 1".into()));
    }
    Ok(Budget {
        per_iteration: pool_size / iterations,
        iterations,
        remainder: pool_size % iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Initial,
    Pool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSetState {
    members: BTreeMap<u64, Origin>,
    revealed: BTreeSet<u64>,
    remaining: BTreeSet<u64>,
    iteration: usize,
}

impl TestSetState {
    pub fn new(initial: &[u64], pool: &[u64]) -> Result<Self> {
        let members: BTreeMap<u64, Origin> =
            initial.iter().map(|&id| (id, Origin::Initial)).collect();
        let remaining: BTreeSet<u64> = pool.iter().copied().collect();
        if members.len() != initial.len() || remaining.len() != pool.len() {
            return Err(Error::Consistency(
                "duplicate ids in test set or pool".into(),
            ));
        }
        if let Some(id) = remaining.iter().find(|id| members.contains_key(id)) {
            return Err(Error::Consistency(format!(
                "id {id} is in both the test set and the pool"
            )));
        }
        Ok(Self {
            members,
            revealed: BTreeSet::new(),
            remaining,
            iteration: 0,
        })
    }

    pub fn members(&self) -> &BTreeMap<u64, Origin> {
        &self.members
    }

    pub fn member_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.members.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn initial_count(&self) -> usize {
        self.members
            .values()
            .filter(|&&o| o == Origin::Initial)
            .count()
    }

    pub fn revealed(&self) -> &BTreeSet<u64> {
        &self.revealed
    }

    pub fn remaining(&self) -> &BTreeSet<u64> {
        &self.remaining
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn initial_ids(&self) -> Vec<u64> {
        self.members
            .iter()
            .filter(|(_, &o)| o == Origin::Initial)
            .map(|(&id, _)| id)
            .collect()
    }
}

fn uncertainty(pred: &BinnedPredictor, scored: &ScoredDataset, id: u64) -> Result<f64> {
    let row = scored
        .position(id)
        .ok_or_else(|| Error::Consistency(format!("no scores for id {id}")))?;
    Ok(pred.predict_instance(scored.confidence()[row])?.std_dev)
}

/// Ranks `candidates` (ascending ids) by predictor std, ties by ascending id.
fn ranked(
    candidates: &[u64],
    pred: &BinnedPredictor,
    scored: &ScoredDataset,
    descending: bool,
) -> Result<Vec<u64>> {
    let mut keyed = candidates
        .iter()
        .map(|&id| Ok((uncertainty(pred, scored, id)?, id)))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_by(|a, b| {
        let by_sigma = if descending {
            b.0.total_cmp(&a.0)
        } else {
            a.0.total_cmp(&b.0)
        };
        by_sigma.then(a.1.cmp(&b.1))
    });
    Ok(keyed.into_iter().map(|(_, id)| id).collect())
}

fn pick(
    candidates: &[u64],
    b: usize,
    prioritized: bool,
    descending: bool,
    pred: &BinnedPredictor,
    scored: &ScoredDataset,
    seed: u64,
) -> Result<Vec<u64>> {
    let b = b.min(candidates.len());
    if b == 0 {
        return Ok(Vec::new());
    }
    if prioritized {
        let mut order = ranked(candidates, pred, scored, descending)?;
        order.truncate(b);
        Ok(order)
    } else {
        let mut rng = seed::rng(seed);
        Ok(candidates.choose_multiple(&mut rng, b).copied().collect())
    }
}

/// Up to `b` pool ids to label next: uniformly at random, or the ones with
/// the highest predictor std.
pub fn select_additions(
    kind: StrategyKind,
    state: &TestSetState,
    pool_scored: &ScoredDataset,
    pred: &BinnedPredictor,
    b: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    let candidates: Vec<u64> = state.remaining.iter().copied().collect();
    pick(
        &candidates,
        b,
        kind.prioritized(),
        true,
        pred,
        pool_scored,
        seed,
    )
}

/// Up to `b` initial-origin members to retire: uniformly at random, or the
/// ones with the lowest predictor std. Add-only strategies never delete.
pub fn select_deletions(
    kind: StrategyKind,
    state: &TestSetState,
    test_scored: &ScoredDataset,
    pred: &BinnedPredictor,
    b: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    if !kind.deletes() {
        return Ok(Vec::new());
    }
    pick(
        &state.initial_ids(),
        b,
        kind.prioritized(),
        false,
        pred,
        test_scored,
        seed,
    )
}

/// Moves `additions` from the pool into the test set and retires
/// `deletions`.
pub fn apply_iteration(
    mut state: TestSetState,
    additions: &[u64],
    deletions: &[u64],
) -> Result<TestSetState> {
    let adds: BTreeSet<u64> = additions.iter().copied().collect();
    let dels: BTreeSet<u64> = deletions.iter().copied().collect();
    if adds.len() != additions.len() || dels.len() != deletions.len() {
        return Err(Error::Consistency(
            "repeated id within one iteration".into(),
        ));
    }
    for id in &adds {
        if state.members.contains_key(id) {
            return Err(Error::Consistency(format!("id {id} is already a member")));
        }
        if !state.remaining.contains(id) {
            return Err(Error::Consistency(format!(
                "id {id} is not in the remaining pool"
            )));
        }
    }
    for id in &dels {
        match state.members.get(id) {
            Some(Origin::Initial) => {}
            Some(Origin::Pool) => {
                return Err(Error::Consistency(format!(
                    "id {id} came from the pool and cannot be deleted"
                )))
            }
            None => return Err(Error::Consistency(format!("id {id} is not a member"))),
        }
    }
    for id in dels {
        state.members.remove(&id);
    }
    for id in adds {
        state.remaining.remove(&id);
        state.revealed.insert(id);
        state.members.insert(id, Origin::Pool);
    }
    state.iteration += 1;
    Ok(state)
}
