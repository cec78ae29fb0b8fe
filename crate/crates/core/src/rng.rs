//! Deterministic stream derivation.
//!
//! Every Monte-Carlo run draws from a stream that is a pure function of
//! `(master seed, subset, run index)`, so results never depend on how work
//! is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

/// Order-independent hash of a vertex set; duplicates must already be removed.
pub fn subset_hash(vertices: &[usize]) -> u64 {
    let sum = vertices
        .iter()
        .fold(0u64, |acc, &v| acc.wrapping_add(splitmix64(v as u64)));
    mix(sum, vertices.len() as u64)
}

/// Uniform in `[0, 1)` from the top 53 bits.
pub(crate) fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The ChaCha stream for run `run` of the evaluation of a subset with hash
/// `subset`.
pub(crate) fn run_stream(seed: u64, subset: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, subset));
    rng.set_stream(run);
    rng
}

/// Key for the counter-based per-edge coins of run `run`.
pub(crate) fn common_key(seed: u64, run: u64) -> u64 {
    mix(mix(seed, 0x636f_6d6d_6f6e), run)
}

/// The coin for `edge` under `key`; a pure function of both.
pub(crate) fn edge_coin(key: u64, edge: usize) -> f64 {
    unit_f64(splitmix64(
        key.wrapping_add((edge as u64).wrapping_mul(GOLDEN)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_hash_ignores_order() {
        assert_eq!(subset_hash(&[3, 1, 2]), subset_hash(&[1, 2, 3]));
        assert_ne!(subset_hash(&[1, 2]), subset_hash(&[1, 2, 3]));
        assert_ne!(subset_hash(&[0]), subset_hash(&[]));
    }

    #[test]
    fn edge_coins_are_uniform_enough() {
        let key = common_key(7, 3);
        let n = 100_000;
        let mean: f64 = (0..n).map(|e| edge_coin(key, e)).sum::<f64>() / n as f64;
        // Standard error of the mean of U(0,1) over 1e5 draws is ~9.1e-4.
        assert!((mean - 0.5).abs() < 4e-3, "{mean}");
        assert!((0..n).all(|e| (0.0..1.0).contains(&edge_coin(key, e))));
    }
}
