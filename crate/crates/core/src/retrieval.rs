//! Similarity-based prompt retrieval from the annotated pool.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, EmbeddingSet};
use crate::error::{Error, Result};

/// The annotated examples, unit-normalized, with their positions in the
/// original pool (used for tie-breaking).
#[derive(Debug, Clone)]
pub struct RetrievalIndex {
    pool: EmbeddingSet,
    positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieved {
    pub id: String,
    pub similarity: f64,
}

impl RetrievalIndex {
    /// Index the rows of `e` at `annotated`.
    pub fn new(e: &EmbeddingSet, annotated: &[usize]) -> Result<RetrievalIndex> {
        if annotated.is_empty() {
            return Err(Error::param("annotated", "retrieval pool is empty"));
        }
        let pool = e.subset(annotated)?.normalize()?;
        Ok(RetrievalIndex {
            pool,
            positions: annotated.to_vec(),
        })
    }

    /// Index the rows of `e` whose ids are listed in `ids`.
    pub fn from_ids<S: AsRef<str>>(e: &EmbeddingSet, ids: &[S]) -> Result<RetrievalIndex> {
        let lookup: std::collections::HashMap<&str, usize> = e
            .ids()
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let annotated = ids
            .iter()
            .map(|id| {
                lookup
                    .get(id.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownId(id.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        RetrievalIndex::new(e, &annotated)
    }

    pub fn len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.pool.dim()
    }

    pub fn ids(&self) -> &[String] {
        self.pool.ids()
    }

    pub fn vector(&self, slot: usize) -> &[f64] {
        self.pool.row(slot)
    }

    /// Pool position of each indexed example, in index order.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    /// The `min(c, len)` most cosine-similar examples to `query`, most similar
    /// first; ties go to the example earlier in the original pool.
    pub fn retrieve(&self, query: &[f64], c: usize) -> Result<Vec<Retrieved>> {
        if c == 0 {
            return Err(Error::param("c", "must be at least 1"));
        }
        if query.len() != self.dim() {
            return Err(Error::DimensionDiffers {
                left: query.len(),
                right: self.dim(),
            });
        }
        let mut scored = (0..self.len())
            .map(|slot| Ok((cosine(query, self.pool.row(slot))?, slot)))
            .collect::<Result<Vec<(f64, usize)>>>()?;
        let order = |a: &(f64, usize), b: &(f64, usize)| {
            b.0.total_cmp(&a.0)
                .then(self.positions[a.1].cmp(&self.positions[b.1]))
        };
        let keep = c.min(scored.len());
        if keep < scored.len() {
            scored.select_nth_unstable_by(keep - 1, order);
            scored.truncate(keep);
        }
        scored.sort_by(order);
        Ok(scored
            .into_iter()
            .map(|(similarity, slot)| Retrieved {
                id: self.pool.id(slot).to_string(),
                similarity,
            })
            .collect())
    }

    /// `min(c, len)` ids sampled uniformly without replacement.
    pub fn random_retrieve(&self, c: usize, seed: u64) -> Result<Vec<String>> {
        if c == 0 {
            return Err(Error::param("c", "must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(index::sample(&mut rng, self.len(), c.min(self.len()))
            .into_iter()
            .map(|slot| self.pool.id(slot).to_string())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> EmbeddingSet {
        EmbeddingSet::from_rows(
            vec!["a", "b", "c", "d", "e"],
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 2.0, 0.0],
                vec![1.0, 1.0, 0.0],
                vec![0.0, 0.0, -3.0],
                vec![1.0, 1.0, 1.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn exact_match_ranks_first() {
        let e = pool();
        let idx = RetrievalIndex::new(&e, &[0, 2, 4]).unwrap();
        let got = idx.retrieve(&[2.0, 2.0, 0.0], 1).unwrap();
        assert_eq!(got[0].id, "c");
        assert!((got[0].similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_c_returns_sorted_pool() {
        let e = pool();
        let idx = RetrievalIndex::new(&e, &[0, 1, 2, 3, 4]).unwrap();
        let got = idx.retrieve(&[1.0, 0.2, 0.0], 50).unwrap();
        assert_eq!(got.len(), 5);
        // Hand-computed cosines: a .981, c .832, e .679, b .196, d 0.
        let ids: Vec<&str> = got.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a", "c", "e", "b", "d"]);
        assert!(got.windows(2).all(|w| w[0].similarity >= w[1].similarity));
    }

    #[test]
    fn ties_follow_pool_order() {
        let e = pool();
        // b and d are both orthogonal to the query; the index lists d first.
        let idx = RetrievalIndex::new(&e, &[3, 1]).unwrap();
        let got = idx.retrieve(&[1.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(got[0].id, "b");
        assert_eq!(got[1].id, "d");
    }

    #[test]
    fn errors() {
        let e = pool();
        assert!(RetrievalIndex::new(&e, &[]).is_err());
        let idx = RetrievalIndex::from_ids(&e, &["a", "b"]).unwrap();
        assert!(matches!(
            idx.retrieve(&[1.0, 0.0], 1),
            Err(Error::DimensionDiffers { .. })
        ));
        assert!(idx.retrieve(&[1.0, 0.0, 0.0], 0).is_err());
        assert!(idx.retrieve(&[0.0, 0.0, 0.0], 1).is_err());
        assert!(matches!(
            RetrievalIndex::from_ids(&e, &["zz"]),
            Err(Error::UnknownId(_))
        ));
    }

    #[test]
    fn random_retrieval() {
        let e = pool();
        let idx = RetrievalIndex::new(&e, &[0, 1, 2, 3, 4]).unwrap();
        let mut all = idx.random_retrieve(5, 3).unwrap();
        assert_eq!(all, idx.random_retrieve(5, 3).unwrap());
        all.sort();
        assert_eq!(all, ["a", "b", "c", "d", "e"]);
        let single = RetrievalIndex::new(&e, &[2]).unwrap();
        assert_eq!(single.random_retrieve(1, 9).unwrap(), ["c"]);
        assert!(idx.random_retrieve(0, 0).is_err());
    }
}
