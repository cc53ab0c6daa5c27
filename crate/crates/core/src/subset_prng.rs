//! Seeded pseudo-random choice of forwarding subsets.
//!
//! For each event identifier a 128-bit word is derived from the node's seed with
//! SHA-256 in counter fashion, reduced modulo `C(n-1, f)`, and mapped to a subset by
//! lexicographic unranking. Subsets are ordered by their sorted index tuples, so rank
//! 0 is the first `f` elements of the universe.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{EventId, NodeId, StageIndex};

/// Width of the per-identifier word reduced modulo the number of subsets.
pub const WORD_BITS: u32 = 128;

/// A forwarding seed issued by the mediator to its owner.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Seed {
    pub owner: NodeId,
    pub stage: StageIndex,
    pub bits: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PrngError {
    #[error("rank {y} out of range for C({n}, {f}) = {count}")]
    RankOutOfRange { y: u128, n: usize, f: usize, count: u128 },
    #[error("subset size {f} exceeds universe of {n}")]
    TooLarge { f: usize, n: usize },
    #[error("element not in universe or not strictly increasing")]
    NotASubset,
}

/// Binomial coefficient, exact in `u128` for the sizes used here.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// The `y`-th `f`-subset of `universe` in lexicographic order of index tuples.
pub fn unrank_subset(y: u128, universe: &[NodeId], f: usize) -> Result<Vec<NodeId>, PrngError> {
    let n = universe.len();
    if f > n {
        return Err(PrngError::TooLarge { f, n });
    }
    let count = binomial(n as u64, f as u64);
    if y >= count {
        return Err(PrngError::RankOutOfRange { y, n, f, count });
    }
    let mut out = Vec::with_capacity(f);
    let mut rest = y;
    let mut next = 0usize;
    for slot in 0..f {
        let remaining = (f - slot - 1) as u64;
        loop {
            let with_next = binomial((n - next - 1) as u64, remaining);
            if rest < with_next {
                out.push(universe[next]);
                next += 1;
                break;
            }
            rest -= with_next;
            next += 1;
        }
    }
    Ok(out)
}

/// Inverse of [`unrank_subset`]; `subset` must list universe elements in universe order.
pub fn rank_subset(subset: &[NodeId], universe: &[NodeId]) -> Result<u128, PrngError> {
    let n = universe.len();
    let f = subset.len();
    let mut rank = 0u128;
    let mut next = 0usize;
    for (slot, node) in subset.iter().enumerate() {
        let pos = universe
            .iter()
            .position(|u| u == node)
            .ok_or(PrngError::NotASubset)?;
        if pos < next {
            return Err(PrngError::NotASubset);
        }
        let remaining = (f - slot - 1) as u64;
        for skipped in next..pos {
            rank += binomial((n - skipped - 1) as u64, remaining);
        }
        next = pos + 1;
    }
    Ok(rank)
}

/// Every node of `0..n` except `self_node`, in increasing order.
pub fn universe_without(n: u32, self_node: NodeId) -> Vec<NodeId> {
    (0..n).map(NodeId).filter(|&j| j != self_node).collect()
}

/// The 128-bit word for `(seed, id)`.
pub fn word(seed: &Seed, id: EventId) -> u128 {
    let mut h = Sha256::new();
    h.update(b"forward-subset");
    h.update(seed.bits.to_le_bytes());
    h.update(id.0.to_le_bytes());
    let digest = h.finalize();
    u128::from_le_bytes(digest[..16].try_into().expect("16 bytes"))
}

/// Forwarding subset of `self_node` for event `id`: `f` nodes, never `self_node`.
pub fn expand(seed: &Seed, id: EventId, self_node: NodeId, n: u32, f: u32) -> Vec<NodeId> {
    let universe = universe_without(n, self_node);
    let count = binomial(universe.len() as u64, f as u64);
    let y = word(seed, id) % count;
    unrank_subset(y, &universe, f as usize).expect("rank reduced modulo the subset count")
}

/// Largest deviation of any subset probability from uniform: `x / 2^w`.
pub fn mod_bias_bound(n: u32, f: u32) -> f64 {
    binomial(n as u64 - 1, f as u64) as f64 / 2f64.powi(WORD_BITS as i32)
}
