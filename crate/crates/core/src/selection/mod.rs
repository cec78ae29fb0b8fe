//! Budgeted subset selection.
//!
//! [`greedy_select`] is the influence-maximizing selector: starting from the
//! empty set it repeatedly adds the vertex whose addition gives the largest
//! estimated influence. The remaining selectors are comparison baselines
//! ([`random_select`], [`kmeans_select`], [`mfl_select`],
//! [`fast_votek_select`]) and the exhaustive optimum
//! ([`brute_force_optimal`]) used to check greedy on small graphs.
//!
//! All argmax ties go to the lowest vertex index.

mod baselines;
mod greedy;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use baselines::{
    fast_votek_select, kmeans_select, mfl_select, random_select, DEFAULT_VOTEK_RHO,
    KMEANS_MAX_ITERATIONS, KMEANS_TOLERANCE,
};
pub use greedy::{
    brute_force_optimal, exact_greedy, greedy_select, greedy_select_with, ExactGreedy,
    GreedyConfig, BRUTE_FORCE_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ideal,
    IdealLazy,
    Random,
    Kmeans,
    Mfl,
    FastVotek,
    BruteForce,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ideal,
        Method::IdealLazy,
        Method::Random,
        Method::Kmeans,
        Method::Mfl,
        Method::FastVotek,
        Method::BruteForce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ideal => "ideal",
            Method::IdealLazy => "ideal-lazy",
            Method::Random => "random",
            Method::Kmeans => "kmeans",
            Method::Mfl => "mfl",
            Method::FastVotek => "fast-votek",
            Method::BruteForce => "brute-force",
        }
    }

    /// Whether the selector runs on the diffusion graph rather than on raw
    /// embeddings.
    pub fn uses_graph(self) -> bool {
        matches!(
            self,
            Method::Ideal | Method::IdealLazy | Method::FastVotek | Method::BruteForce
        )
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
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::param("method", format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub method: Method,
    pub budget: usize,
    /// Vertex indices in selection order.
    pub selected: Vec<usize>,
    /// Objective increment of each step; empty for selectors without one.
    pub marginal_gains: Vec<f64>,
    pub seed: Option<u64>,
    pub wall_time: Duration,
    /// Number of objective evaluations performed.
    pub evaluations: u64,
}

impl SelectionResult {
    /// The persisted form, with vertex indices replaced by `ids`.
    pub fn to_record(&self, ids: &[String]) -> SelectionRecord {
        SelectionRecord {
            method: self.method,
            budget: self.budget,
            selected: self.selected.iter().map(|&i| ids[i].clone()).collect(),
            marginal_gains: self.marginal_gains.clone(),
            seed: self.seed,
            evaluations: self.evaluations,
            wall_time_ms: self.wall_time.as_secs_f64() * 1e3,
            config: None,
            metadata: None,
        }
    }
}

/// Selection file contents. `config` echoes the resolved run configuration;
/// `metadata` holds run-specific facts (timestamps, thread count) that are
/// not expected to reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub method: Method,
    pub budget: usize,
    pub selected: Vec<String>,
    pub marginal_gains: Vec<f64>,
    pub seed: Option<u64>,
    pub evaluations: u64,
    pub wall_time_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl SelectionRecord {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SelectionRecord> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub(crate) fn check_budget(budget: usize, n: usize) -> Result<()> {
    if budget == 0 || budget > n {
        Err(Error::BudgetOutOfRange { budget, n })
    } else {
        Ok(())
    }
}

/// Index of the largest value, ties to the earliest position.
pub(crate) fn argmax_first<I: IntoIterator<Item = (usize, f64)>>(items: I) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in items {
        match best {
            Some((_, b)) if x <= b => {}
            _ => best = Some((i, x)),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_value(m).unwrap(), m.name());
        }
        assert!("votek".parse::<Method>().is_err());
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax_first([(3, 1.0), (1, 2.0), (0, 2.0)]), Some((1, 2.0)));
        assert_eq!(argmax_first(std::iter::empty()), None);
    }

    #[test]
    fn record_uses_ids() {
        let r = SelectionResult {
            method: Method::Random,
            budget: 2,
            selected: vec![2, 0],
            marginal_gains: vec![],
            seed: Some(3),
            wall_time: Duration::from_millis(5),
            evaluations: 0,
        };
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let record = r.to_record(&ids);
        assert_eq!(record.selected, ["c", "a"]);
        let json = serde_json::to_value(&record).unwrap();
        for field in [
            "method",
            "budget",
            "selected",
            "marginal_gains",
            "seed",
            "evaluations",
            "wall_time_ms",
        ] {
            assert!(json.get(field).is_some(), "{field}");
        }
        assert!(json.get("config").is_none());
    }
}
