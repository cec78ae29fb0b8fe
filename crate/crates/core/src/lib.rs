//! Influence-driven selective annotation.
//!
//! Given embeddings of an unlabeled pool, pick a small subset to label so that
//! the labeled examples make good in-context prompts for the rest:
//!
//! * [`embedding`]: load, validate and normalize embedding files.
//! * [`graph`]: the directed k-NN similarity graph that carries diffusion.
//! * [`diffusion`]: independent-cascade influence, estimated or exact.
//! * [`selection`]: greedy influence maximization and baseline selectors.
//! * [`retrieval`]: most-similar prompt retrieval from the labeled pool.
//! * [`annotation`]: diffusion-ordered schedules for automatic labeling.
//! * [`theory`]: exhaustive checks of the greedy guarantees on small graphs.
//!
//! ```
//! use ideal::embedding::EmbeddingSet;
//! use ideal::graph::DiffusionGraph;
//! use ideal::selection::greedy_select;
//!
//! let e = EmbeddingSet::from_vectors(vec![
//!     vec![1.0, 0.0],
//!     vec![0.9, 0.2],
//!     vec![0.0, 1.0],
//!     vec![0.2, 0.9],
//! ])?
//! .normalize()?;
//! let g = DiffusionGraph::build(&e, 2)?;
//! let picked = greedy_select(&g, 2, 10, 0, false)?;
//! assert_eq!(picked.selected.len(), 2);
//! # Ok::<(), ideal::Error>(())
//! ```

pub mod annotation;
pub mod diffusion;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod retrieval;
mod rng;
pub mod selection;
pub mod theory;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/graph.md")]
    mod graph {}
    #[doc = include_str!("../../../book/src/influence.md")]
    mod influence {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/auto-annotation.md")]
    mod auto_annotation {}
    #[doc = include_str!("../../../book/src/theory.md")]
    mod theory {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
