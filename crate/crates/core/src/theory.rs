//! Falsification harness for the guarantees behind greedy selection.
//!
//! Every check runs on exact influence values from [`InfluenceTable`], never
//! on Monte-Carlo estimates: a finite-sample estimate can break diminishing
//! returns without any bug, the expectation cannot.
//!
//! A check reports its worst *margin*, the slack by which the inequality
//! held. A margin below `-TOLERANCE` is a violation.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::InfluenceTable;
use crate::error::{Error, Result};
use crate::graph::DiffusionGraph;
use crate::rng::mix;
use crate::selection::exact_greedy;

pub const TOLERANCE: f64 = 1e-9;

/// Edge probabilities used by generated graphs. All are dyadic, so exact
/// influence sums carry no rounding error.
pub const PROBABILITIES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// The greedy guarantee `1 - (1 - 1/m)^m`.
pub fn bound_value(m: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::param("m", "must be at least 1"));
    }
    let base = 1.0 - 1.0 / m as f64;
    let power = match i32::try_from(m) {
        Ok(e) => base.powi(e),
        Err(_) => (m as f64 * (-1.0 / m as f64).ln_1p()).exp(),
    };
    Ok(1.0 - power)
}

/// Parameters for the seeded random graphs the checks run on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub min_n: usize,
    pub max_n: usize,
    /// Chance that an ordered pair gets an edge.
    pub density: f64,
    /// Cap on edges with probability strictly between 0 and 1.
    pub max_uncertain: usize,
}

/// Enough to rebuild a generated graph with [`random_graph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDescriptor {
    pub seed: u64,
    pub n: usize,
    pub edges: usize,
    pub uncertain_edges: usize,
}

/// A random graph with probabilities drawn from [`PROBABILITIES`]. Once the
/// uncertain-edge cap is reached, remaining edges get probability 0 or 1.
pub fn random_graph(spec: &GraphSpec, seed: u64) -> Result<(DiffusionGraph, GraphDescriptor)> {
    if spec.min_n == 0 || spec.min_n > spec.max_n {
        return Err(Error::param("n", "need 1 <= min_n <= max_n"));
    }
    if !(0.0..=1.0).contains(&spec.density) {
        return Err(Error::param("density", "must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(spec.min_n..=spec.max_n);
    let mut edges = Vec::new();
    let mut uncertain = 0;
    for src in 0..n {
        for dst in (0..n).filter(|&d| d != src) {
            if !rng.random_bool(spec.density) {
                continue;
            }
            let mut p = PROBABILITIES[rng.random_range(0..PROBABILITIES.len())];
            if p > 0.0 && p < 1.0 {
                if uncertain == spec.max_uncertain {
                    p = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
                } else {
                    uncertain += 1;
                }
            }
            edges.push((src, dst, p));
        }
    }
    let g = DiffusionGraph::from_edges(n, &edges)?;
    let descriptor = GraphDescriptor {
        seed,
        n,
        edges: edges.len(),
        uncertain_edges: uncertain,
    };
    Ok((g, descriptor))
}

/// Outcome of one check over one or more graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: u64,
    pub violations: u64,
    /// Smallest slack seen; `None` when nothing was tested.
    pub worst_margin: Option<f64>,
    /// Seed of the graph that produced `worst_margin`, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_graph: Option<u64>,
}

impl CheckResult {
    fn new(name: &str) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            instances: 0,
            violations: 0,
            worst_margin: None,
            worst_graph: None,
        }
    }

    fn record(&mut self, margin: f64) {
        self.instances += 1;
        if margin < -TOLERANCE {
            self.violations += 1;
        }
        if self.worst_margin.is_none_or(|w| margin < w) {
            self.worst_margin = Some(margin);
        }
    }

    /// Fold `other` in. Ties on the worst margin keep the earlier graph.
    pub fn merge(&mut self, other: &CheckResult) {
        self.instances += other.instances;
        self.violations += other.violations;
        if let Some(m) = other.worst_margin {
            if self.worst_margin.is_none_or(|w| m < w) {
                self.worst_margin = Some(m);
                self.worst_graph = other.worst_graph;
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn on_graph(mut self, seed: u64) -> CheckResult {
        self.worst_graph = Some(seed);
        self
    }
}

fn table_for(g: &DiffusionGraph, max_n: usize) -> Result<InfluenceTable> {
    if g.n() > max_n {
        return Err(Error::param(
            "n",
            format!(
                "{} vertices exceed the limit of {max_n} for this check",
                g.n()
            ),
        ));
    }
    InfluenceTable::new(g)
}

/// Influence never drops when a vertex is added, and re-adding a member
/// changes nothing. Exhaustive over all `(S, v)`; needs `n <= 8`.
pub fn check_monotone(g: &DiffusionGraph) -> Result<CheckResult> {
    let table = table_for(g, 8)?;
    let mut out = CheckResult::new("monotone");
    for set in 0..1usize << g.n() {
        let base = table.by_mask(set);
        for v in 0..g.n() {
            let diff = table.by_mask(set | 1 << v) - base;
            if set >> v & 1 == 1 {
                out.record(0.0 - diff.abs());
            } else {
                out.record(diff);
            }
        }
    }
    Ok(out)
}

/// The stronger claim that adding a non-member gains at least 1. It fails
/// whenever `S` already reaches `v` with positive probability (an edge
/// `s -> v` with `p = 0.5` gives a gain of 0.5), so it is reported for
/// information and never counts towards a verdict.
pub fn check_unit_gain(g: &DiffusionGraph) -> Result<CheckResult> {
    let table = table_for(g, 8)?;
    let mut out = CheckResult::new("unit-gain");
    for set in 0..1usize << g.n() {
        for v in (0..g.n()).filter(|v| set >> v & 1 == 0) {
            out.record(table.by_mask(set | 1 << v) - table.by_mask(set) - 1.0);
        }
    }
    Ok(out)
}

/// Diminishing returns, exhaustive over all `S_a ⊂ S_b` and all `v`; needs
/// `n <= 6`.
pub fn check_submodular(g: &DiffusionGraph) -> Result<CheckResult> {
    let table = table_for(g, 6)?;
    let f = |s: usize| table.by_mask(s);
    let mut out = CheckResult::new("submodular");
    for b in 0..1usize << g.n() {
        // Proper submasks of `b`, including the empty set.
        let mut a = b;
        while a != 0 {
            a = (a - 1) & b;
            for v in 0..g.n() {
                let bit = 1 << v;
                out.record((f(a | bit) - f(a)) - (f(b | bit) - f(b)));
            }
        }
    }
    Ok(out)
}

fn optimum(table: &InfluenceTable, m: usize) -> f64 {
    (0..1usize << table.n())
        .filter(|s| s.count_ones() as usize == m)
        .map(|s| table.by_mask(s))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `f(S*_m) <= f(S_t) + m * psi_{t+1}` for every greedy step `t` in
/// `[0, m - 1)`, where `psi_{t+1}` is the gain of greedy step `t + 1`.
pub fn check_proposition1(g: &DiffusionGraph, m: usize) -> Result<CheckResult> {
    let table = table_for(g, 20)?;
    let greedy = exact_greedy(&table, m, false)?;
    let best = optimum(&table, m);
    let mut out = CheckResult::new("proposition-1");
    for t in 0..m - 1 {
        let value = if t == 0 { 0.0 } else { greedy.values[t - 1] };
        out.record(value + m as f64 * greedy.gains[t] - best);
    }
    Ok(out)
}

/// Greedy reaches at least `bound_value(m)` of the optimum. The margin is
/// `ratio - bound`.
pub fn check_theorem1(g: &DiffusionGraph, m: usize) -> Result<CheckResult> {
    let table = table_for(g, 20)?;
    let greedy = exact_greedy(&table, m, false)?;
    let best = optimum(&table, m);
    let mut out = CheckResult::new("theorem-1");
    out.record(greedy.values[m - 1] / best - bound_value(m as u64)?);
    Ok(out)
}

/// Which checks to run and on how many graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Graphs per check.
    pub trials: usize,
    pub seed: u64,
    pub monotone_max_n: usize,
    pub submodular_max_n: usize,
    pub proposition_max_n: usize,
    pub theorem_max_n: usize,
    pub budgets: Vec<usize>,
    pub density: f64,
    pub max_uncertain: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            trials: 100,
            seed: 0,
            monotone_max_n: 7,
            submodular_max_n: 5,
            proposition_max_n: 7,
            theorem_max_n: 8,
            budgets: vec![2, 3],
            density: 0.4,
            max_uncertain: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckFamily {
    pub check: CheckResult,
    pub spec: GraphSpec,
    pub graphs: Vec<GraphDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub config: VerifyConfig,
    pub checks: Vec<CheckFamily>,
    pub pass: bool,
}

#[derive(Clone, Copy)]
enum Kind {
    Monotone,
    Submodular,
    Proposition,
    Theorem,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Monotone => "monotone",
            Kind::Submodular => "submodular",
            Kind::Proposition => "proposition-1",
            Kind::Theorem => "theorem-1",
        }
    }
}

fn run_family(config: &VerifyConfig, kind: Kind, tag: u64) -> Result<CheckFamily> {
    let max_n = match kind {
        Kind::Monotone => config.monotone_max_n,
        Kind::Submodular => config.submodular_max_n,
        Kind::Proposition => config.proposition_max_n,
        Kind::Theorem => config.theorem_max_n,
    };
    let min_budget = config.budgets.iter().copied().max().unwrap_or(1);
    let min_n = match kind {
        Kind::Monotone | Kind::Submodular => 1,
        Kind::Proposition | Kind::Theorem => min_budget.min(max_n),
    };
    let spec = GraphSpec {
        min_n: min_n.max(1),
        max_n,
        density: config.density,
        max_uncertain: config.max_uncertain,
    };
    let per_graph = (0..config.trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = mix(mix(config.seed, tag), i);
            let (g, descriptor) = random_graph(&spec, seed)?;
            let mut result = CheckResult::new(kind.name());
            match kind {
                Kind::Monotone => result.merge(&check_monotone(&g)?.on_graph(seed)),
                Kind::Submodular => result.merge(&check_submodular(&g)?.on_graph(seed)),
                Kind::Proposition | Kind::Theorem => {
                    for &m in config.budgets.iter().filter(|&&m| m >= 1 && m <= g.n()) {
                        let r = match kind {
                            Kind::Proposition => check_proposition1(&g, m)?,
                            _ => check_theorem1(&g, m)?,
                        };
                        result.merge(&r.on_graph(seed));
                    }
                }
            }
            Ok((descriptor, result))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut check = CheckResult::new(kind.name());
    let mut graphs = Vec::with_capacity(per_graph.len());
    for (descriptor, result) in per_graph {
        check.merge(&result);
        graphs.push(descriptor);
    }
    Ok(CheckFamily {
        check,
        spec,
        graphs,
    })
}

/// Run all four checks, each on `config.trials` fresh graphs. Results do not
/// depend on the number of threads.
pub fn run_theory_checks(config: &VerifyConfig) -> Result<TheoryReport> {
    if config.trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    if config.budgets.is_empty() || config.budgets.contains(&0) {
        return Err(Error::param("budgets", "need at least one positive budget"));
    }
    let kinds = [
        Kind::Monotone,
        Kind::Submodular,
        Kind::Proposition,
        Kind::Theorem,
    ];
    let checks = kinds
        .iter()
        .enumerate()
        .map(|(tag, &kind)| run_family(config, kind, tag as u64))
        .collect::<Result<Vec<_>>>()?;
    let pass = checks.iter().all(|c| c.check.passed());
    Ok(TheoryReport {
        config: config.clone(),
        checks,
        pass,
    })
}

impl TheoryReport {
    /// Plain-text summary, one row per check.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>7} {:>10} {:>11} {:>14}  result",
            "check", "graphs", "instances", "violations", "worst margin"
        );
        for family in &self.checks {
            let c = &family.check;
            let margin = c
                .worst_margin
                .map_or_else(|| "-".to_string(), |m| format!("{m:.3e}"));
            let _ = writeln!(
                out,
                "{:<14} {:>7} {:>10} {:>11} {:>14}  {}",
                c.name,
                family.graphs.len(),
                c.instances,
                c.violations,
                margin,
                if c.passed() { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(out, "overall: {}", if self.pass { "pass" } else { "FAIL" });
        out
    }
}
