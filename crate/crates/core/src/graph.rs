//! Directed k-nearest-successor graphs with activation probabilities.
//!
//! Every vertex `v` is linked to its `k` most cosine-similar other vertices
//! `N(v, k)`, and the edge `(v, u)` carries
//!
//! ```text
//! p(v, u) = c(v, u) / Σ_{z ∈ N(v, k)} c(v, z),    c = max(cos, 0)
//! ```
//!
//! so the outgoing probabilities of a vertex sum to one unless all of its
//! neighbors are orthogonal or opposed, in which case they are all zero.
//!
//! Successor lists are stored in CSR form, sorted by descending probability
//! with ties broken by ascending target index. The position of an edge in
//! that layout is its stable edge id.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};

/// Successor count used when none is given.
pub const DEFAULT_K: usize = 10;

const HEADER_TAG: &str = "IDEALGRAPH v1";

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionGraph {
    n: usize,
    k: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    probs: Vec<f64>,
    built_from: String,
}

/// Sort key shared by the k-NN scan and successor lists: value descending,
/// index ascending.
fn by_value_desc(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// The `min(k, n-1)` vertices most cosine-similar to `v`, most similar first.
pub fn knn_successors(e: &EmbeddingSet, v: usize, k: usize) -> Result<Vec<usize>> {
    if v >= e.len() {
        return Err(Error::VertexOutOfRange {
            index: v,
            n: e.len(),
        });
    }
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    let sim = e.similarity();
    Ok(scored_neighbors(e.len(), v, k, |u| sim.get(v, u))
        .into_iter()
        .map(|(_, u)| u)
        .collect())
}

fn scored_neighbors(n: usize, v: usize, k: usize, sim: impl Fn(usize) -> f64) -> Vec<(f64, usize)> {
    let mut scored: Vec<(f64, usize)> = (0..n).filter(|&u| u != v).map(|u| (sim(u), u)).collect();
    let keep = k.min(scored.len());
    if keep < scored.len() {
        scored.select_nth_unstable_by(keep - 1, by_value_desc);
        scored.truncate(keep);
    }
    scored.sort_by(by_value_desc);
    scored
}

impl DiffusionGraph {
    /// Build the k-NN graph of an embedding set.
    ///
    /// Query vertices are processed in parallel; the result does not depend
    /// on the thread count.
    pub fn build(e: &EmbeddingSet, k: usize) -> Result<DiffusionGraph> {
        let n = e.len();
        if n < 2 {
            return Err(Error::TooFewVertices(n));
        }
        if k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        let sim = e.similarity();
        let lists: Vec<Vec<(f64, usize)>> = (0..n)
            .into_par_iter()
            .map(|v| {
                let neighbors = scored_neighbors(n, v, k, |u| sim.get(v, u));
                let clamped: Vec<(f64, usize)> = neighbors
                    .into_iter()
                    .map(|(c, u)| (c.max(0.0), u))
                    .collect();
                let total: f64 = clamped.iter().map(|(c, _)| c).sum();
                let mut weighted: Vec<(f64, usize)> = clamped
                    .into_iter()
                    .map(|(c, u)| (if total > 0.0 { c / total } else { 0.0 }, u))
                    .collect();
                weighted.sort_by(by_value_desc);
                weighted
            })
            .collect();

        let mut graph = DiffusionGraph::from_lists(n, k, lists);
        graph.built_from = e.content_hash();
        Ok(graph)
    }

    /// A graph with arbitrary edge probabilities, for hand-built cascades and
    /// oracle checks. `k` is set to the largest out-degree.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<DiffusionGraph> {
        let mut lists = vec![Vec::new(); n];
        for &(src, dst, p) in edges {
            if src >= n || dst >= n {
                return Err(Error::VertexOutOfRange {
                    index: src.max(dst),
                    n,
                });
            }
            if src == dst {
                return Err(Error::InvalidEdge {
                    src,
                    dst,
                    reason: "self-edge",
                });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidEdge {
                    src,
                    dst,
                    reason: "probability outside [0, 1]",
                });
            }
            let list: &mut Vec<(f64, usize)> = &mut lists[src];
            if list.iter().any(|&(_, u)| u == dst) {
                return Err(Error::InvalidEdge {
                    src,
                    dst,
                    reason: "duplicate edge",
                });
            }
            list.push((p, dst));
        }
        for list in &mut lists {
            list.sort_by(by_value_desc);
        }
        let k = lists.iter().map(Vec::len).max().unwrap_or(0);
        let mut graph = DiffusionGraph::from_lists(n, k, lists);
        graph.built_from = graph.edge_hash();
        Ok(graph)
    }

    fn from_lists(n: usize, k: usize, lists: Vec<Vec<(f64, usize)>>) -> DiffusionGraph {
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        for list in lists {
            for (p, u) in list {
                targets.push(u);
                probs.push(p);
            }
            offsets.push(targets.len());
        }
        DiffusionGraph {
            n,
            k,
            offsets,
            targets,
            probs,
            built_from: String::new(),
        }
    }

    fn edge_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n as u64).to_le_bytes());
        for (src, dst, p) in self.edges() {
            hasher.update((src as u64).to_le_bytes());
            hasher.update((dst as u64).to_le_bytes());
            hasher.update(p.to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Content hash of the embedding set the graph was built from, or of the
    /// edge list for graphs built with [`DiffusionGraph::from_edges`].
    pub fn built_from(&self) -> &str {
        &self.built_from
    }

    /// Range of edge ids leaving `v`.
    pub fn edge_range(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn target(&self, edge: usize) -> usize {
        self.targets[edge]
    }

    pub fn prob(&self, edge: usize) -> f64 {
        self.probs[edge]
    }

    /// `(target, probability)` pairs leaving `v`, in stored order.
    pub fn successors(&self, v: usize) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        let range = self.edge_range(v);
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.probs[range].iter().copied())
    }

    /// All edges as `(src, dst, p)` in (src asc, p desc, dst asc) order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |v| self.successors(v).map(move |(u, p)| (v, u, p)))
    }

    /// Successor index lists, dropping the probabilities.
    pub fn knn_lists(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|v| self.successors(v).map(|(u, _)| u).collect())
            .collect()
    }

    /// Number of edges with `0 < p < 1`.
    pub fn uncertain_edge_count(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0 && p < 1.0).count()
    }

    pub(crate) fn check_vertices(&self, vertices: &[usize]) -> Result<()> {
        match vertices.iter().find(|&&v| v >= self.n) {
            Some(&index) => Err(Error::VertexOutOfRange { index, n: self.n }),
            None => Ok(()),
        }
    }

    /// Text serialization; see [`DiffusionGraph::parse`] for the layout.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(32 * (self.edge_count() + 1));
        writeln!(
            out,
            "{HEADER_TAG} n={} k={} hash={}",
            self.n, self.k, self.built_from
        )
        .unwrap();
        for (src, dst, p) in self.edges() {
            writeln!(out, "{src}\t{dst}\t{p:.16e}").unwrap();
        }
        out
    }

    /// Parse the text form: a header line
    /// `IDEALGRAPH v1 n=<n> k=<k> hash=<hex>` followed by one
    /// `src<TAB>dst<TAB>p` line per edge, `p` at 17 significant digits.
    pub fn parse(text: &str) -> Result<DiffusionGraph> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::GraphFormat("missing header".into()))?;
        let rest = header
            .strip_prefix(HEADER_TAG)
            .ok_or_else(|| Error::GraphFormat(format!("bad header {header:?}")))?;
        let (mut n, mut k, mut hash) = (None, None, None);
        for field in rest.split_whitespace() {
            match field.split_once('=') {
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("k", v)) => k = v.parse::<usize>().ok(),
                Some(("hash", v)) => hash = Some(v.to_string()),
                _ => {
                    return Err(Error::GraphFormat(format!(
                        "unknown header field {field:?}"
                    )))
                }
            }
        }
        let (Some(n), Some(k), Some(hash)) = (n, k, hash) else {
            return Err(Error::GraphFormat("header needs n, k and hash".into()));
        };

        let mut lists = vec![Vec::new(); n];
        let mut last: Option<(usize, f64, usize)> = None;
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::GraphFormat(format!("line {}: {what}", i + 2));
            let mut fields = line.split('\t');
            let (Some(src), Some(dst), Some(p), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(bad("expected src, dst and p"));
            };
            let src: usize = src.parse().map_err(|_| bad("bad src"))?;
            let dst: usize = dst.parse().map_err(|_| bad("bad dst"))?;
            let p: f64 = p.parse().map_err(|_| bad("bad probability"))?;
            if src >= n || dst >= n || src == dst {
                return Err(bad("edge endpoint out of range or self-edge"));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(bad("probability outside [0, 1]"));
            }
            if let Some((ls, lp, ld)) = last {
                let ordered =
                    ls < src || (ls == src && by_value_desc(&(lp, ld), &(p, dst)).is_lt());
                if !ordered {
                    return Err(bad("edges out of order"));
                }
            }
            last = Some((src, p, dst));
            lists[src].push((p, dst));
        }
        let mut graph = DiffusionGraph::from_lists(n, k, lists);
        graph.built_from = hash;
        Ok(graph)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DiffusionGraph> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DiffusionGraph::parse(&text)
    }
}
