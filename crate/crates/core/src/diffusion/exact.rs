//! Exact influence by live-edge enumeration.
//!
//! Under the independent-cascade model the final active set has the same
//! distribution as the set reachable from the seeds when every edge is kept
//! ("live") independently with its probability. Edges with `p = 0` or `p = 1`
//! are fixed, so only the uncertain ones are enumerated.

use crate::error::{Error, Result};
use crate::graph::DiffusionGraph;

use super::seed_set;

/// Largest number of `0 < p < 1` edges accepted for enumeration.
pub const MAX_UNCERTAIN_EDGES: usize = 20;

/// Largest graph for which [`InfluenceTable`] tabulates every subset.
const TABLE_MAX_VERTICES: usize = 20;
/// Bound on `configurations × subsets` work for a table.
const TABLE_MAX_WORK_LOG2: usize = 34;

struct LiveEdgeModel {
    uncertain: Vec<usize>,
}

impl LiveEdgeModel {
    fn new(g: &DiffusionGraph) -> Result<LiveEdgeModel> {
        let uncertain: Vec<usize> = (0..g.edge_count())
            .filter(|&e| {
                let p = g.prob(e);
                p > 0.0 && p < 1.0
            })
            .collect();
        if uncertain.len() > MAX_UNCERTAIN_EDGES {
            return Err(Error::TooManyUncertainEdges {
                uncertain: uncertain.len(),
                limit: MAX_UNCERTAIN_EDGES,
            });
        }
        Ok(LiveEdgeModel { uncertain })
    }

    fn configurations(&self) -> u64 {
        1u64 << self.uncertain.len()
    }

    /// Liveness of every edge and the probability of configuration `mask`.
    fn configuration(&self, g: &DiffusionGraph, mask: u64, live: &mut [bool]) -> f64 {
        for (e, slot) in live.iter_mut().enumerate() {
            *slot = g.prob(e) >= 1.0;
        }
        let mut weight = 1.0;
        for (bit, &e) in self.uncertain.iter().enumerate() {
            let p = g.prob(e);
            if mask >> bit & 1 == 1 {
                live[e] = true;
                weight *= p;
            } else {
                weight *= 1.0 - p;
            }
        }
        weight
    }
}

fn reach_count(
    g: &DiffusionGraph,
    seeds: &[usize],
    live: &[bool],
    seen: &mut [bool],
    stack: &mut Vec<usize>,
) -> usize {
    seen.fill(false);
    stack.clear();
    for &s in seeds {
        seen[s] = true;
        stack.push(s);
    }
    let mut count = seeds.len();
    while let Some(v) = stack.pop() {
        for e in g.edge_range(v) {
            let u = g.target(e);
            if live[e] && !seen[u] {
                seen[u] = true;
                count += 1;
                stack.push(u);
            }
        }
    }
    count
}

/// Expected number of vertices reachable from `s` (including `s`) over all
/// live-edge configurations.
pub fn exact_influence(g: &DiffusionGraph, s: &[usize]) -> Result<f64> {
    let seeds = seed_set(g, s)?;
    let model = LiveEdgeModel::new(g)?;
    let mut live = vec![false; g.edge_count()];
    let mut seen = vec![false; g.n()];
    let mut stack = Vec::new();
    let mut total = 0.0;
    for mask in 0..model.configurations() {
        let weight = model.configuration(g, mask, &mut live);
        if weight == 0.0 {
            continue;
        }
        total += weight * reach_count(g, &seeds, &live, &mut seen, &mut stack) as f64;
    }
    Ok(total)
}

/// Exact influence of every vertex subset of a small graph, indexed by
/// bitmask (bit `v` set when vertex `v` is in the subset).
#[derive(Debug, Clone)]
pub struct InfluenceTable {
    n: usize,
    values: Vec<f64>,
}

impl InfluenceTable {
    pub fn new(g: &DiffusionGraph) -> Result<InfluenceTable> {
        let n = g.n();
        if n > TABLE_MAX_VERTICES {
            return Err(Error::SearchSpaceTooLarge(format!(
                "{n} vertices exceed the subset-table limit of {TABLE_MAX_VERTICES}"
            )));
        }
        let model = LiveEdgeModel::new(g)?;
        if model.uncertain.len() + n > TABLE_MAX_WORK_LOG2 {
            return Err(Error::SearchSpaceTooLarge(format!(
                "2^{} configurations x 2^{n} subsets",
                model.uncertain.len()
            )));
        }

        let subsets = 1usize << n;
        let mut values = vec![0.0; subsets];
        let mut live = vec![false; g.edge_count()];
        let mut reach = vec![0u32; n];
        let mut union = vec![0u32; subsets];
        let mut stack = Vec::new();
        for mask in 0..model.configurations() {
            let weight = model.configuration(g, mask, &mut live);
            if weight == 0.0 {
                continue;
            }
            for (v, r) in reach.iter_mut().enumerate() {
                let mut seen = 1u32 << v;
                stack.clear();
                stack.push(v);
                while let Some(x) = stack.pop() {
                    for e in g.edge_range(x) {
                        let u = g.target(e);
                        if live[e] && seen >> u & 1 == 0 {
                            seen |= 1 << u;
                            stack.push(u);
                        }
                    }
                }
                *r = seen;
            }
            for set in 1..subsets {
                let low = set.trailing_zeros() as usize;
                union[set] = union[set & (set - 1)] | reach[low];
                values[set] += weight * union[set].count_ones() as f64;
            }
        }
        Ok(InfluenceTable { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn by_mask(&self, mask: usize) -> f64 {
        self.values[mask]
    }

    /// `f(S)` for a list of vertices; `f(∅) = 0`.
    pub fn value(&self, s: &[usize]) -> f64 {
        self.values[mask_of(s)]
    }
}

pub(crate) fn mask_of(s: &[usize]) -> usize {
    s.iter().fold(0, |m, &v| m | 1 << v)
}
