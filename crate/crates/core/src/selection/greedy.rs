//! Greedy influence maximization, lazy and naive, and the exhaustive optimum.
//!
//! The naive loop evaluates `f(S ∪ {v})` for every remaining `v` at every
//! step. The lazy variant keeps each candidate's last marginal gain in a
//! max-heap; because gains can only shrink as `S` grows, a candidate whose
//! refreshed gain still tops the heap is the argmax without looking at the
//! others. Both pick the same sequence whenever the objective is a fixed
//! submodular function of `S`, which holds for the exact oracle and for
//! Monte-Carlo estimates under [`RandomnessMode::Common`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use itertools::Itertools;
use rayon::prelude::*;

use crate::diffusion::{
    exact_influence, InfluenceEstimator, InfluenceTable, RandomnessMode, Workspace, DEFAULT_REPS,
};
use crate::error::{Error, Result};
use crate::graph::DiffusionGraph;

use super::{argmax_first, check_budget, Method, SelectionResult};

/// Largest number of size-`m` subsets [`brute_force_optimal`] will score.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

/// A set function evaluated on sorted vertex lists.
pub(crate) trait SetObjective: Sync {
    type Scratch: Send;

    fn scratch(&self) -> Self::Scratch;

    fn score(&self, sorted: &[usize], scratch: &mut Self::Scratch) -> f64;
}

/// Scores are total activated counts summed over all runs: integers, so
/// comparisons and differences are exact.
impl SetObjective for InfluenceEstimator<'_> {
    type Scratch = Workspace;

    fn scratch(&self) -> Workspace {
        Workspace::new(self.graph().n())
    }

    fn score(&self, sorted: &[usize], ws: &mut Workspace) -> f64 {
        self.tally_with(sorted, ws).sum as f64
    }
}

impl SetObjective for InfluenceTable {
    type Scratch = ();

    fn scratch(&self) {}

    fn score(&self, sorted: &[usize], _: &mut ()) -> f64 {
        self.value(sorted)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GreedyPath {
    pub selected: Vec<usize>,
    /// `f(S_1), ..., f(S_m)` in objective units.
    pub values: Vec<f64>,
    pub evaluations: u64,
}

fn with_vertex(sorted: &[usize], v: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(sorted.len() + 1);
    let at = sorted.partition_point(|&x| x < v);
    out.extend_from_slice(&sorted[..at]);
    out.push(v);
    out.extend_from_slice(&sorted[at..]);
    out
}

fn insert_sorted(sorted: &mut Vec<usize>, v: usize) {
    let at = sorted.partition_point(|&x| x < v);
    sorted.insert(at, v);
}

/// Score every candidate in `candidates` against `base` in parallel. The
/// output is in candidate order regardless of scheduling.
fn score_candidates<O: SetObjective>(
    objective: &O,
    base: &[usize],
    candidates: &[usize],
) -> Vec<(usize, f64)> {
    candidates
        .par_iter()
        .map_init(
            || objective.scratch(),
            |scratch, &v| (v, objective.score(&with_vertex(base, v), scratch)),
        )
        .collect()
}

pub(crate) fn naive_greedy<O: SetObjective>(objective: &O, n: usize, m: usize) -> GreedyPath {
    let mut chosen = vec![false; n];
    let mut sorted = Vec::with_capacity(m);
    let mut path = GreedyPath {
        selected: Vec::with_capacity(m),
        values: Vec::with_capacity(m),
        evaluations: 0,
    };
    for _ in 0..m {
        let candidates: Vec<usize> = (0..n).filter(|&v| !chosen[v]).collect();
        let scored = score_candidates(objective, &sorted, &candidates);
        path.evaluations += scored.len() as u64;
        let (v, value) = argmax_first(scored).expect("budget never exceeds the vertex count");
        chosen[v] = true;
        insert_sorted(&mut sorted, v);
        path.selected.push(v);
        path.values.push(value);
    }
    path
}

struct Bound {
    gain: f64,
    value: f64,
    vertex: usize,
    step: usize,
}

impl PartialEq for Bound {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Bound {}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bound {
    // Max-heap order: larger gain first, then lower vertex index.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

pub(crate) fn lazy_greedy<O: SetObjective>(objective: &O, n: usize, m: usize) -> GreedyPath {
    let all: Vec<usize> = (0..n).collect();
    let initial = score_candidates(objective, &[], &all);
    let mut path = GreedyPath {
        selected: Vec::with_capacity(m),
        values: Vec::with_capacity(m),
        evaluations: initial.len() as u64,
    };
    let mut heap: BinaryHeap<Bound> = initial
        .into_iter()
        .map(|(vertex, value)| Bound {
            gain: value,
            value,
            vertex,
            step: 0,
        })
        .collect();
    let mut sorted = Vec::with_capacity(m);
    let mut current = 0.0;
    let mut scratch = objective.scratch();
    while path.selected.len() < m {
        let step = path.selected.len();
        let top = heap.pop().expect("budget never exceeds the vertex count");
        if top.step == step {
            current = top.value;
            insert_sorted(&mut sorted, top.vertex);
            path.selected.push(top.vertex);
            path.values.push(current);
        } else {
            let value = objective.score(&with_vertex(&sorted, top.vertex), &mut scratch);
            path.evaluations += 1;
            heap.push(Bound {
                gain: value - current,
                value,
                vertex: top.vertex,
                step,
            });
        }
    }
    path
}

/// Monte-Carlo settings for [`greedy_select_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyConfig {
    pub reps: usize,
    pub seed: u64,
    pub lazy: bool,
    pub randomness: RandomnessMode,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            reps: DEFAULT_REPS,
            seed: 0,
            lazy: false,
            randomness: RandomnessMode::Fresh,
        }
    }
}

/// Greedy influence maximization with Monte-Carlo influence estimates and
/// fresh random streams per evaluated subset.
pub fn greedy_select(
    g: &DiffusionGraph,
    m: usize,
    reps: usize,
    seed: u64,
    lazy: bool,
) -> Result<SelectionResult> {
    greedy_select_with(
        g,
        m,
        &GreedyConfig {
            reps,
            seed,
            lazy,
            randomness: RandomnessMode::Fresh,
        },
    )
}

pub fn greedy_select_with(
    g: &DiffusionGraph,
    m: usize,
    config: &GreedyConfig,
) -> Result<SelectionResult> {
    check_budget(m, g.n())?;
    let start = Instant::now();
    let estimator = InfluenceEstimator::new(g, config.reps, config.seed, config.randomness)?;
    let path = if config.lazy {
        lazy_greedy(&estimator, g.n(), m)
    } else {
        naive_greedy(&estimator, g.n(), m)
    };
    let reps = config.reps as f64;
    let marginal_gains = gains(&path.values).map(|d| d / reps).collect();
    Ok(SelectionResult {
        method: if config.lazy {
            Method::IdealLazy
        } else {
            Method::Ideal
        },
        budget: m,
        selected: path.selected,
        marginal_gains,
        seed: Some(config.seed),
        wall_time: start.elapsed(),
        evaluations: path.evaluations,
    })
}

fn gains(values: &[f64]) -> impl Iterator<Item = f64> + '_ {
    values.iter().scan(0.0, |prev, &v| {
        let d = v - *prev;
        *prev = v;
        Some(d)
    })
}

/// Greedy run on exact influence values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactGreedy {
    pub selected: Vec<usize>,
    /// `f(S_1), ..., f(S_m)`.
    pub values: Vec<f64>,
    /// `f(S_t) - f(S_{t-1})` for `t = 1..=m`.
    pub gains: Vec<f64>,
    pub evaluations: u64,
}

/// Greedy selection on the exact influence table.
pub fn exact_greedy(table: &InfluenceTable, m: usize, lazy: bool) -> Result<ExactGreedy> {
    check_budget(m, table.n())?;
    let path = if lazy {
        lazy_greedy(table, table.n(), m)
    } else {
        naive_greedy(table, table.n(), m)
    };
    Ok(ExactGreedy {
        gains: gains(&path.values).collect(),
        selected: path.selected,
        values: path.values,
        evaluations: path.evaluations,
    })
}

fn binomial(n: usize, k: usize) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// The size-`m` subset with the largest exact influence; ties go to the
/// lexicographically smallest subset. `marginal_gains` holds the single
/// optimal value `f(S*)`.
pub fn brute_force_optimal(g: &DiffusionGraph, m: usize) -> Result<SelectionResult> {
    check_budget(m, g.n())?;
    let count = binomial(g.n(), m)
        .filter(|&c| c <= BRUTE_FORCE_LIMIT)
        .ok_or_else(|| {
            Error::SearchSpaceTooLarge(format!(
                "C({}, {m}) subsets exceed the limit of {BRUTE_FORCE_LIMIT}",
                g.n()
            ))
        })?;
    let start = Instant::now();
    let table = InfluenceTable::new(g).ok();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for subset in (0..g.n()).combinations(m) {
        let value = match &table {
            Some(t) => t.value(&subset),
            None => exact_influence(g, &subset)?,
        };
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((subset, value));
        }
    }
    let (selected, value) = best.expect("at least one subset");
    Ok(SelectionResult {
        method: Method::BruteForce,
        budget: m,
        selected,
        marginal_gains: vec![value],
        seed: None,
        wall_time: start.elapsed(),
        evaluations: count,
    })
}
