//! Independent-cascade diffusion and subset influence.
//!
//! A cascade starts with the seed set active. In each round every vertex
//! activated in the previous round (the frontier, visited in ascending index
//! order) tosses one coin per not-yet-active successor `u` and activates it
//! when `τ ≤ p(v, u)`. Newly activated vertices form the next frontier; the
//! process stops when a round activates nothing. The influence `f(S)` is the
//! expected number of active vertices at the end, seeds included.
//!
//! Randomness comes from [`Coins`]. Two sources are provided:
//!
//! * [`RandomnessMode::Fresh`] gives every `(subset, run)` its own ChaCha
//!   stream, consumed in toss order.
//! * [`RandomnessMode::Common`] draws the coin of edge `e` in run `r` as a
//!   pure function of `(seed, r, e)`. Every subset then sees the same sampled
//!   live-edge graphs, which makes the estimate itself monotone and
//!   submodular.

mod exact;
mod trace;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DiffusionGraph;
use crate::rng;

pub use exact::{exact_influence, InfluenceTable, MAX_UNCERTAIN_EDGES};
pub use trace::{export_cascade_trace, Activation, CascadeTrace};

/// Monte-Carlo repetitions used when none are given.
pub const DEFAULT_REPS: usize = 10;

/// Source of the uniform `τ` for each tossed edge.
pub trait Coins {
    fn toss(&mut self, edge: usize) -> f64;
}

/// Sequential draws from any random stream; the edge id is ignored.
pub struct StreamCoins<R>(pub R);

impl<R: RngCore> Coins for StreamCoins<R> {
    fn toss(&mut self, _edge: usize) -> f64 {
        self.0.random::<f64>()
    }
}

/// Counter-based coins: a pure function of the key and the edge id.
#[derive(Debug, Clone, Copy)]
pub struct EdgeCoins {
    key: u64,
}

impl Coins for EdgeCoins {
    fn toss(&mut self, edge: usize) -> f64 {
        rng::edge_coin(self.key, edge)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomnessMode {
    /// Independent streams per evaluated subset and run.
    #[default]
    Fresh,
    /// Common random numbers: one coin per (run, edge), shared by all subsets.
    Common,
}

impl std::str::FromStr for RandomnessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fresh" => Ok(RandomnessMode::Fresh),
            "common" => Ok(RandomnessMode::Common),
            other => Err(Error::param(
                "randomness",
                format!("unknown mode {other:?}"),
            )),
        }
    }
}

/// Scratch state for repeated cascades on one graph.
pub struct Workspace {
    stamp: Vec<u32>,
    epoch: u32,
    frontier: Vec<usize>,
    next: Vec<usize>,
}

impl Workspace {
    pub fn new(n: usize) -> Workspace {
        Workspace {
            stamp: vec![0; n],
            epoch: 0,
            frontier: Vec::new(),
            next: Vec::new(),
        }
    }

    fn reset(&mut self, n: usize) {
        if self.stamp.len() != n {
            self.stamp = vec![0; n];
            self.epoch = 0;
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        self.frontier.clear();
        self.next.clear();
    }
}

/// One cascade from `seeds` (sorted, distinct, in range). Returns the number
/// of active vertices at the end, seeds included. When `trace` is given, each
/// nonempty round is appended as it completes.
pub(crate) fn run_cascade<C: Coins>(
    g: &DiffusionGraph,
    seeds: &[usize],
    coins: &mut C,
    ws: &mut Workspace,
    mut trace: Option<&mut Vec<Vec<Activation>>>,
) -> usize {
    ws.reset(g.n());
    let epoch = ws.epoch;
    for &s in seeds {
        ws.stamp[s] = epoch;
    }
    ws.frontier.extend_from_slice(seeds);
    let mut active = seeds.len();
    while !ws.frontier.is_empty() {
        let mut round = Vec::new();
        ws.next.clear();
        for &v in &ws.frontier {
            for edge in g.edge_range(v) {
                let u = g.target(edge);
                if ws.stamp[u] == epoch {
                    continue;
                }
                let p = g.prob(edge);
                let fires = if p <= 0.0 {
                    false
                } else if p >= 1.0 {
                    true
                } else {
                    coins.toss(edge) <= p
                };
                if fires {
                    ws.stamp[u] = epoch;
                    ws.next.push(u);
                    if trace.is_some() {
                        round.push(Activation {
                            vertex: u,
                            activated_by: v,
                        });
                    }
                }
            }
        }
        active += ws.next.len();
        std::mem::swap(&mut ws.frontier, &mut ws.next);
        ws.frontier.sort_unstable();
        if let Some(t) = trace.as_deref_mut() {
            if !round.is_empty() {
                t.push(round);
            }
        }
    }
    active
}

/// Sorted, deduplicated, range-checked copy of a seed set.
pub(crate) fn seed_set(g: &DiffusionGraph, s: &[usize]) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Err(Error::EmptySeedSet);
    }
    g.check_vertices(s)?;
    let mut seeds = s.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    Ok(seeds)
}

/// Simulate one cascade from `s`, recording who activated whom in each round.
pub fn simulate_cascade<R: RngCore>(
    g: &DiffusionGraph,
    s: &[usize],
    rng: &mut R,
) -> Result<CascadeTrace> {
    let seeds = seed_set(g, s)?;
    let mut rounds = Vec::new();
    let mut ws = Workspace::new(g.n());
    run_cascade(g, &seeds, &mut StreamCoins(rng), &mut ws, Some(&mut rounds));
    Ok(CascadeTrace {
        seed_set: seeds,
        rounds,
    })
}

/// Monte-Carlo estimate of `f(S)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
    pub seed: u64,
    pub subset_size: usize,
}

/// Running integer sums over repetitions. Exact, so the aggregate does not
/// depend on the order in which repetitions are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Tally {
    pub reps: u64,
    pub sum: u64,
    pub sum_sq: u128,
}

impl Tally {
    fn one(count: usize) -> Tally {
        Tally {
            reps: 1,
            sum: count as u64,
            sum_sq: (count as u128) * (count as u128),
        }
    }

    fn merge(self, other: Tally) -> Tally {
        Tally {
            reps: self.reps + other.reps,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.reps as f64
    }

    /// Sample standard deviation over `sqrt(reps)`; zero for a single run.
    pub fn std_error(&self) -> f64 {
        if self.reps < 2 {
            return 0.0;
        }
        let r = self.reps as u128;
        let s = self.sum as u128;
        // r·Σx² − (Σx)² = r(r−1)·var, computed exactly.
        let scaled = r * self.sum_sq - s * s;
        let var = scaled as f64 / (r * (r - 1)) as f64;
        (var / self.reps as f64).sqrt()
    }
}

/// Repeated-cascade influence evaluation with a fixed seed and stream policy.
#[derive(Debug, Clone, Copy)]
pub struct InfluenceEstimator<'g> {
    graph: &'g DiffusionGraph,
    reps: usize,
    seed: u64,
    mode: RandomnessMode,
}

impl<'g> InfluenceEstimator<'g> {
    pub fn new(
        graph: &'g DiffusionGraph,
        reps: usize,
        seed: u64,
        mode: RandomnessMode,
    ) -> Result<Self> {
        if reps == 0 {
            return Err(Error::param("reps", "must be at least 1"));
        }
        Ok(InfluenceEstimator {
            graph,
            reps,
            seed,
            mode,
        })
    }

    pub fn graph(&self) -> &'g DiffusionGraph {
        self.graph
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> RandomnessMode {
        self.mode
    }

    fn run(&self, seeds: &[usize], subset: u64, r: usize, ws: &mut Workspace) -> usize {
        match self.mode {
            RandomnessMode::Fresh => {
                let stream = rng::run_stream(self.seed, subset, r as u64);
                run_cascade(self.graph, seeds, &mut StreamCoins(stream), ws, None)
            }
            RandomnessMode::Common => {
                let mut coins = EdgeCoins {
                    key: rng::common_key(self.seed, r as u64),
                };
                run_cascade(self.graph, seeds, &mut coins, ws, None)
            }
        }
    }

    /// Sum of activated counts over all runs, on the calling thread. `seeds`
    /// must be sorted and distinct.
    pub(crate) fn tally_with(&self, seeds: &[usize], ws: &mut Workspace) -> Tally {
        let subset = rng::subset_hash(seeds);
        (0..self.reps)
            .map(|r| Tally::one(self.run(seeds, subset, r, ws)))
            .fold(Tally::default(), Tally::merge)
    }

    /// Same as [`Self::tally_with`], with runs spread over the thread pool.
    pub(crate) fn tally_parallel(&self, seeds: &[usize]) -> Tally {
        let subset = rng::subset_hash(seeds);
        (0..self.reps)
            .into_par_iter()
            .map_init(
                || Workspace::new(self.graph.n()),
                |ws, r| Tally::one(self.run(seeds, subset, r, ws)),
            )
            .reduce(Tally::default, Tally::merge)
    }

    pub fn estimate(&self, s: &[usize]) -> Result<InfluenceEstimate> {
        let seeds = seed_set(self.graph, s)?;
        let tally = self.tally_parallel(&seeds);
        Ok(InfluenceEstimate {
            mean: tally.mean(),
            std_error: tally.std_error(),
            reps: self.reps,
            seed: self.seed,
            subset_size: seeds.len(),
        })
    }
}

/// Average activated count, seeds included, over `reps` independent cascades.
pub fn estimate_influence(
    g: &DiffusionGraph,
    s: &[usize],
    reps: usize,
    seed: u64,
) -> Result<InfluenceEstimate> {
    InfluenceEstimator::new(g, reps, seed, RandomnessMode::Fresh)?.estimate(s)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn path3() -> DiffusionGraph {
        DiffusionGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    struct CountingCoins<C> {
        inner: C,
        draws: usize,
    }

    impl<C: Coins> Coins for CountingCoins<C> {
        fn toss(&mut self, edge: usize) -> f64 {
            self.draws += 1;
            self.inner.toss(edge)
        }
    }

    #[test]
    fn zero_probability_edges_never_fire() {
        let g =
            DiffusionGraph::from_edges(4, &[(0, 1, 0.0), (1, 2, 0.0), (2, 3, 0.0), (3, 0, 0.0)])
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = simulate_cascade(&g, &[0, 2], &mut rng).unwrap();
        assert!(t.rounds.is_empty());
        assert_eq!(t.seed_set, [0, 2]);
        let est = estimate_influence(&g, &[0, 1, 2], 10, 5).unwrap();
        assert_eq!(est.mean, 3.0);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.subset_size, 3);
    }

    #[test]
    fn certain_edges_flood_reachable_vertices() {
        let g =
            DiffusionGraph::from_edges(5, &[(0, 1, 1.0), (1, 2, 1.0), (0, 3, 1.0), (4, 0, 1.0)])
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = simulate_cascade(&g, &[0], &mut rng).unwrap();
        assert_eq!(t.rounds.len(), 2);
        assert_eq!(
            t.rounds[0],
            [
                Activation {
                    vertex: 1,
                    activated_by: 0
                },
                Activation {
                    vertex: 3,
                    activated_by: 0
                }
            ]
        );
        assert_eq!(
            t.rounds[1],
            [Activation {
                vertex: 2,
                activated_by: 1
            }]
        );
        assert_eq!(estimate_influence(&path3(), &[0], 7, 3).unwrap().mean, 3.0);
    }

    #[test]
    fn bernoulli_edge_frequency() {
        let g = DiffusionGraph::from_edges(2, &[(0, 1, 0.5)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let runs = 10_000;
        let hits = (0..runs)
            .filter(|_| {
                !simulate_cascade(&g, &[0], &mut rng)
                    .unwrap()
                    .rounds
                    .is_empty()
            })
            .count();
        let freq = hits as f64 / runs as f64;
        // 3σ for Bernoulli(0.5) over 1e4 runs is 0.015.
        assert!((freq - 0.5).abs() <= 0.015, "{freq}");
    }

    #[test]
    fn star_mean_within_three_standard_errors() {
        let edges: Vec<_> = (1..=4).map(|u| (0, u, 0.5)).collect();
        let g = DiffusionGraph::from_edges(5, &edges).unwrap();
        let est = estimate_influence(&g, &[0], 100_000, 11).unwrap();
        assert!((est.mean - 3.0).abs() <= 3.0 * est.std_error, "{est:?}");
        // Var = 4·0.25 = 1, so the standard error is 1/sqrt(1e5).
        assert!((est.std_error - 1.0 / 100_000f64.sqrt()).abs() < 2e-4);
    }

    #[test]
    fn input_errors() {
        let g = path3();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            simulate_cascade(&g, &[], &mut rng),
            Err(Error::EmptySeedSet)
        ));
        assert!(matches!(
            simulate_cascade(&g, &[3], &mut rng),
            Err(Error::VertexOutOfRange { index: 3, n: 3 })
        ));
        assert!(estimate_influence(&g, &[0], 0, 0).is_err());
    }

    #[test]
    fn each_edge_tossed_at_most_once() {
        let mut edges = Vec::new();
        for v in 0..8usize {
            for d in 1..4 {
                edges.push((v, (v + d) % 8, 0.4));
            }
        }
        let g = DiffusionGraph::from_edges(8, &edges).unwrap();
        let mut ws = Workspace::new(8);
        for seed in 0..200 {
            let mut coins = CountingCoins {
                inner: StreamCoins(ChaCha8Rng::seed_from_u64(seed)),
                draws: 0,
            };
            run_cascade(&g, &[0, 5], &mut coins, &mut ws, None);
            assert!(coins.draws <= g.edge_count());
        }
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let mut edges = Vec::new();
        for v in 0..30usize {
            edges.push((v, (v + 1) % 30, 0.6));
            edges.push((v, (v * 7 + 3) % 30, 0.3));
        }
        edges.retain(|&(a, b, _)| a != b);
        edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        let g = DiffusionGraph::from_edges(30, &edges).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_influence(&g, &[2, 9], 5_000, 123).unwrap())
        };
        let a = run(1);
        let b = run(8);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn subset_order_does_not_change_the_estimate() {
        let g =
            DiffusionGraph::from_edges(4, &[(0, 1, 0.5), (1, 2, 0.5), (2, 3, 0.5), (3, 0, 0.5)])
                .unwrap();
        for mode in [RandomnessMode::Fresh, RandomnessMode::Common] {
            let est = InfluenceEstimator::new(&g, 200, 9, mode).unwrap();
            assert_eq!(
                est.estimate(&[2, 0]).unwrap(),
                est.estimate(&[0, 2, 2]).unwrap()
            );
        }
    }

    #[test]
    fn common_numbers_are_monotone_per_run() {
        // Under shared per-edge coins a superset always activates a superset.
        let mut edges = Vec::new();
        for v in 0..12usize {
            edges.push((v, (v + 1) % 12, 0.5));
            edges.push((v, (v + 5) % 12, 0.25));
        }
        let g = DiffusionGraph::from_edges(12, &edges).unwrap();
        let est = InfluenceEstimator::new(&g, 50, 4, RandomnessMode::Common).unwrap();
        let mut ws = Workspace::new(12);
        let small = est.tally_with(&[3], &mut ws).sum;
        let large = est.tally_with(&[3, 8], &mut ws).sum;
        assert!(large >= small + 50);
    }
}
