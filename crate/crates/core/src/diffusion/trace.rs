//! Round-by-round cascade records and their JSON export.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activation {
    pub vertex: usize,
    pub activated_by: usize,
}

/// Round-by-round record of one cascade. Round `i` holds the vertices
/// activated by the frontier of round `i - 1` (round 0's frontier is the
/// seed set). Only nonempty rounds are kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeTrace {
    pub seed_set: Vec<usize>,
    pub rounds: Vec<Vec<Activation>>,
}

impl CascadeTrace {
    /// All activated vertices, seeds first, then in activation order.
    pub fn activated(&self) -> impl Iterator<Item = usize> + '_ {
        self.seed_set
            .iter()
            .copied()
            .chain(self.rounds.iter().flatten().map(|a| a.vertex))
    }

    pub fn total_activated(&self) -> usize {
        self.seed_set.len() + self.rounds.iter().map(Vec::len).sum::<usize>()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<CascadeTrace> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn export_cascade_trace(t: &CascadeTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = t.to_json()?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
