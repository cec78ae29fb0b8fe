//! Comparison selectors: random, k-means, facility location and Fast Vote-k.

use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};

use super::{argmax_first, check_budget, Method, SelectionResult};

pub const KMEANS_MAX_ITERATIONS: usize = 100;
/// Lloyd iterations stop once no centroid moves farther than this.
pub const KMEANS_TOLERANCE: f64 = 1e-6;
/// Vote discount base for [`fast_votek_select`].
pub const DEFAULT_VOTEK_RHO: f64 = 10.0;

fn result(
    method: Method,
    budget: usize,
    selected: Vec<usize>,
    seed: Option<u64>,
    start: Instant,
) -> SelectionResult {
    SelectionResult {
        method,
        budget,
        selected,
        marginal_gains: Vec::new(),
        seed,
        wall_time: start.elapsed(),
        evaluations: 0,
    }
}

/// `m` distinct indices drawn uniformly without replacement.
pub fn random_select(n: usize, m: usize, seed: u64) -> Result<SelectionResult> {
    check_budget(m, n)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let selected = index::sample(&mut rng, n, m).into_vec();
    Ok(result(Method::Random, m, selected, Some(seed), start))
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center, ties to the lowest center index.
fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = dist2(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Farthest-point seeding: the first center is drawn from `rng`, each later
/// one is the unchosen point farthest from all chosen centers.
fn farthest_point_seeds(e: &EmbeddingSet, m: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = e.len();
    let first = rng.random_range(0..n);
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut seeds = vec![first];
    let mut closest: Vec<f64> = (0..n).map(|i| dist2(e.row(i), e.row(first))).collect();
    while seeds.len() < m {
        let (next, _) = argmax_first((0..n).filter(|&i| !chosen[i]).map(|i| (i, closest[i])))
            .expect("m <= n leaves an unchosen point");
        chosen[next] = true;
        seeds.push(next);
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(dist2(e.row(i), e.row(next)));
        }
    }
    seeds
}

/// Assign every point to its nearest center, then give each empty cluster the
/// point farthest from its own center among clusters that can spare one.
fn assign(e: &EmbeddingSet, centers: &mut [Vec<f64>]) -> Vec<usize> {
    let m = centers.len();
    let nearest_centers: Vec<(usize, f64)> = (0..e.len())
        .into_par_iter()
        .map(|i| nearest(e.row(i), centers))
        .collect();
    let mut labels: Vec<usize> = nearest_centers.iter().map(|&(j, _)| j).collect();
    let mut dist: Vec<f64> = nearest_centers.iter().map(|&(_, d)| d).collect();
    let mut sizes = vec![0usize; m];
    for &j in &labels {
        sizes[j] += 1;
    }
    for j in 0..m {
        if sizes[j] > 0 {
            continue;
        }
        let donor = argmax_first(
            (0..e.len())
                .filter(|&i| sizes[labels[i]] > 1)
                .map(|i| (i, dist[i])),
        )
        .map(|(i, _)| i)
        .expect("m <= n leaves a cluster with a spare point");
        sizes[labels[donor]] -= 1;
        sizes[j] = 1;
        labels[donor] = j;
        dist[donor] = 0.0;
        centers[j] = e.row(donor).to_vec();
    }
    labels
}

fn centroids(e: &EmbeddingSet, labels: &[usize], m: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; e.dim()]; m];
    let mut counts = vec![0usize; m];
    for (i, &j) in labels.iter().enumerate() {
        counts[j] += 1;
        for (s, x) in sums[j].iter_mut().zip(e.row(i)) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|x| *x /= c as f64);
    }
    sums
}

/// Cluster into `m` groups with Lloyd's algorithm and pick, from each
/// cluster, the member nearest its centroid.
pub fn kmeans_select(e: &EmbeddingSet, m: usize, seed: u64) -> Result<SelectionResult> {
    check_budget(m, e.len())?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = farthest_point_seeds(e, m, &mut rng)
        .into_iter()
        .map(|i| e.row(i).to_vec())
        .collect();
    for _ in 0..KMEANS_MAX_ITERATIONS {
        let labels = assign(e, &mut centers);
        let updated = centroids(e, &labels, m);
        let shift = centers
            .iter()
            .zip(&updated)
            .map(|(a, b)| dist2(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = updated;
        if shift < KMEANS_TOLERANCE {
            break;
        }
    }
    let labels = assign(e, &mut centers);
    let mut best: Vec<Option<(usize, f64)>> = vec![None; m];
    for (i, &j) in labels.iter().enumerate() {
        let d = dist2(e.row(i), &centers[j]);
        if best[j].is_none_or(|(_, b)| d < b) {
            best[j] = Some((i, d));
        }
    }
    let selected = best
        .into_iter()
        .map(|b| b.expect("every cluster is nonempty").0)
        .collect();
    Ok(result(Method::Kmeans, m, selected, Some(seed), start))
}

/// Greedy maximization of the facility-location objective
/// `F(S) = Σ_i max_{j ∈ S} cos(i, j)`, with `F(∅) = 0`.
///
/// The full similarity matrix is materialized, so memory grows as `n²`.
pub fn mfl_select(e: &EmbeddingSet, m: usize) -> Result<SelectionResult> {
    let n = e.len();
    check_budget(m, n)?;
    let start = Instant::now();
    let sim = e.similarity();
    let matrix: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| (0..n).map(|i| sim.get(i, j)).collect())
        .collect();

    let mut cover: Option<Vec<f64>> = None;
    let mut chosen = vec![false; n];
    let mut selected = Vec::with_capacity(m);
    let mut gains = Vec::with_capacity(m);
    let mut evaluations = 0;
    for _ in 0..m {
        let candidates: Vec<usize> = (0..n).filter(|&j| !chosen[j]).collect();
        let scored: Vec<(usize, f64)> = candidates
            .par_iter()
            .map(|&j| {
                let column = &matrix[j];
                let gain = match &cover {
                    None => column.iter().sum(),
                    Some(c) => column
                        .iter()
                        .zip(c)
                        .map(|(&s, &best)| (s - best).max(0.0))
                        .sum(),
                };
                (j, gain)
            })
            .collect();
        evaluations += scored.len() as u64;
        let (j, gain) = argmax_first(scored).expect("m <= n");
        chosen[j] = true;
        selected.push(j);
        gains.push(gain);
        cover = Some(match cover {
            None => matrix[j].clone(),
            Some(c) => c.iter().zip(&matrix[j]).map(|(a, b)| a.max(*b)).collect(),
        });
    }
    Ok(SelectionResult {
        method: Method::Mfl,
        budget: m,
        selected,
        marginal_gains: gains,
        seed: None,
        wall_time: start.elapsed(),
        evaluations,
    })
}

/// Discounted reverse-k-NN voting.
///
/// Vertex `v` votes for every `u` in its neighbor list `knn[v]`; the vote is
/// worth `rho^-c(v)`, where `c(v)` counts the already selected vertices that
/// list `v` among their own neighbors. The unselected vertex with the largest
/// total vote is picked, then the discounts are updated.
pub fn fast_votek_select(knn: &[Vec<usize>], m: usize, rho: f64) -> Result<SelectionResult> {
    let n = knn.len();
    check_budget(m, n)?;
    if rho.is_nan() || rho <= 1.0 {
        return Err(Error::param("rho", format!("must exceed 1, got {rho}")));
    }
    for (v, list) in knn.iter().enumerate() {
        if let Some(&u) = list.iter().find(|&&u| u >= n || u == v) {
            return Err(Error::InvalidEdge {
                src: v,
                dst: u,
                reason: "neighbor out of range or self",
            });
        }
    }
    let start = Instant::now();
    let mut voters = vec![Vec::new(); n];
    for (v, list) in knn.iter().enumerate() {
        for &u in list {
            voters[u].push(v);
        }
    }
    let mut covered = vec![0i32; n];
    let mut chosen = vec![false; n];
    let mut selected = Vec::with_capacity(m);
    for _ in 0..m {
        let (pick, _) = argmax_first((0..n).filter(|&u| !chosen[u]).map(|u| {
            let score: f64 = voters[u].iter().map(|&v| rho.powi(-covered[v])).sum();
            (u, score)
        }))
        .expect("m <= n");
        chosen[pick] = true;
        selected.push(pick);
        for &v in &knn[pick] {
            covered[v] += 1;
        }
    }
    Ok(result(Method::FastVotek, m, selected, None, start))
}
