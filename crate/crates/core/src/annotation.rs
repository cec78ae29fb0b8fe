//! Diffusion-ordered automatic annotation.
//!
//! Starting from the manually labeled set, a cascade is run on the diffusion
//! graph. Every vertex it reaches is scheduled for automatic labeling in the
//! round it is activated, with its most similar already-labeled examples as
//! prompts. When a cascade dies out before covering the pool, the unlabeled
//! vertex most similar to anything labeled is activated as a fallback and the
//! cascade resumes from it, until every vertex has a slot.
//!
//! The labeling itself is delegated to an [`Annotator`].

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{Coins, StreamCoins};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::graph::DiffusionGraph;

/// Prompts per automatically labeled example when none is given.
pub const DEFAULT_PROMPTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationKind {
    Cascade,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledAnnotation {
    pub target: String,
    pub prompt_sources: Vec<String>,
    pub kind: ActivationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSchedule {
    /// Manually labeled ids (round 0).
    pub manual: Vec<String>,
    pub rounds: Vec<Vec<ScheduledAnnotation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl AnnotationSchedule {
    /// Number of scheduled ids, manual ones included.
    pub fn coverage(&self) -> usize {
        self.manual.len() + self.rounds.iter().map(Vec::len).sum::<usize>()
    }

    pub fn fallback_count(&self) -> usize {
        self.rounds
            .iter()
            .flatten()
            .filter(|r| r.kind == ActivationKind::Fallback)
            .count()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<AnnotationSchedule> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

struct Pool<'a> {
    e: &'a EmbeddingSet,
    sim: crate::embedding::Similarity<'a>,
    labeled: Vec<usize>,
    is_labeled: Vec<bool>,
    /// Largest similarity to any labeled vertex.
    nearest_labeled: Vec<f64>,
}

impl<'a> Pool<'a> {
    fn new(e: &'a EmbeddingSet) -> Pool<'a> {
        Pool {
            e,
            sim: e.similarity(),
            labeled: Vec::new(),
            is_labeled: vec![false; e.len()],
            nearest_labeled: vec![f64::NEG_INFINITY; e.len()],
        }
    }

    fn label(&mut self, v: usize) {
        self.is_labeled[v] = true;
        self.labeled.push(v);
        for u in 0..self.e.len() {
            if !self.is_labeled[u] {
                let s = self.sim.get(u, v);
                if s > self.nearest_labeled[u] {
                    self.nearest_labeled[u] = s;
                }
            }
        }
    }

    /// The `min(c, labeled)` labeled vertices most similar to `v`.
    fn prompts(&self, v: usize, c: usize) -> Vec<String> {
        let mut scored: Vec<(f64, usize)> = self
            .labeled
            .iter()
            .map(|&a| (self.sim.get(v, a), a))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored
            .into_iter()
            .take(c)
            .map(|(_, a)| self.e.id(a).to_string())
            .collect()
    }

    fn fallback(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for u in (0..self.e.len()).filter(|&u| !self.is_labeled[u]) {
            let s = self.nearest_labeled[u];
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((u, s));
            }
        }
        best.map(|(u, _)| u)
    }
}

/// Schedule the whole pool for annotation in diffusion order.
pub fn diffusion_schedule(
    g: &DiffusionGraph,
    e: &EmbeddingSet,
    manual: &[usize],
    c: usize,
    seed: u64,
) -> Result<AnnotationSchedule> {
    if manual.is_empty() {
        return Err(Error::EmptySeedSet);
    }
    if c == 0 {
        return Err(Error::param("c", "must be at least 1"));
    }
    if e.len() != g.n() {
        return Err(Error::param(
            "embeddings",
            format!("{} embeddings for a {}-vertex graph", e.len(), g.n()),
        ));
    }
    let seeds = crate::diffusion::seed_set(g, manual)?;

    let mut pool = Pool::new(e);
    let mut coins = StreamCoins(ChaCha8Rng::seed_from_u64(seed));
    let mut active = vec![false; g.n()];
    for &s in &seeds {
        active[s] = true;
        pool.label(s);
    }
    let mut rounds = Vec::new();
    let mut frontier = seeds.clone();
    loop {
        while !frontier.is_empty() {
            let mut reached = Vec::new();
            for &v in &frontier {
                for edge in g.edge_range(v) {
                    let u = g.target(edge);
                    if active[u] {
                        continue;
                    }
                    let p = g.prob(edge);
                    let fires = p >= 1.0 || (p > 0.0 && coins.toss(edge) <= p);
                    if fires {
                        active[u] = true;
                        reached.push(u);
                    }
                }
            }
            if reached.is_empty() {
                break;
            }
            rounds.push(
                reached
                    .iter()
                    .map(|&u| ScheduledAnnotation {
                        target: e.id(u).to_string(),
                        prompt_sources: pool.prompts(u, c),
                        kind: ActivationKind::Cascade,
                    })
                    .collect(),
            );
            for &u in &reached {
                pool.label(u);
            }
            reached.sort_unstable();
            frontier = reached;
        }
        let Some(u) = pool.fallback() else { break };
        active[u] = true;
        rounds.push(vec![ScheduledAnnotation {
            target: e.id(u).to_string(),
            prompt_sources: pool.prompts(u, c),
            kind: ActivationKind::Fallback,
        }]);
        pool.label(u);
        frontier = vec![u];
    }

    Ok(AnnotationSchedule {
        manual: seeds.iter().map(|&s| e.id(s).to_string()).collect(),
        rounds,
        config: None,
        metadata: None,
    })
}

/// Produces a label for `target` given `(id, label)` prompt pairs.
pub trait Annotator {
    fn annotate(&mut self, target: &str, prompts: &[(&str, &str)]) -> Result<String>;
}

/// Annotator that looks labels up in a fixed map, ignoring the prompts.
#[derive(Debug, Clone, Default)]
pub struct LabelCopyAnnotator {
    labels: HashMap<String, String>,
}

impl LabelCopyAnnotator {
    pub fn new(labels: HashMap<String, String>) -> Self {
        LabelCopyAnnotator { labels }
    }
}

impl Annotator for LabelCopyAnnotator {
    fn annotate(&mut self, target: &str, _prompts: &[(&str, &str)]) -> Result<String> {
        self.labels
            .get(target)
            .cloned()
            .ok_or_else(|| Error::UnknownId(target.to_string()))
    }
}

/// Run a schedule round by round. Labels produced within a round become
/// visible to prompts only from the next round on. Returns `(id, label)` in
/// schedule order.
pub fn execute_schedule<A: Annotator>(
    schedule: &AnnotationSchedule,
    manual_labels: &HashMap<String, String>,
    annotator: &mut A,
) -> Result<Vec<(String, String)>> {
    let mut labels: HashMap<String, String> = HashMap::new();
    let mut out = Vec::with_capacity(schedule.coverage());
    for id in &schedule.manual {
        let label = manual_labels
            .get(id)
            .ok_or_else(|| Error::UnknownId(id.clone()))?;
        labels.insert(id.clone(), label.clone());
        out.push((id.clone(), label.clone()));
    }
    for round in &schedule.rounds {
        let mut produced = Vec::with_capacity(round.len());
        for record in round {
            let prompts = record
                .prompt_sources
                .iter()
                .map(|id| {
                    labels
                        .get(id)
                        .map(|l| (id.as_str(), l.as_str()))
                        .ok_or_else(|| Error::UnknownId(id.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            produced.push((
                record.target.clone(),
                annotator.annotate(&record.target, &prompts)?,
            ));
        }
        for (id, label) in produced {
            labels.insert(id.clone(), label.clone());
            out.push((id, label));
        }
    }
    Ok(out)
}
