//! Commutative, self-inverse XOR cipher for punishing nodes.
//!
//! Every payload carries a [`PayloadMeta`] that tracks which keys have been applied
//! an odd number of times. Because XOR with a keystream commutes and is its own
//! inverse, that parity set fully describes the ciphertext relative to the original
//! event, and retrievability is decided from it alone.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::config::{EventId, NodeId, Round, StageIndex};

/// Key length in bytes (256 bits).
pub const KEY_BYTES: usize = 32;

/// A per-node, per-stage punishment key.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Key {
    pub owner: NodeId,
    pub stage: StageIndex,
    pub bits: [u8; KEY_BYTES],
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key(owner={}, stage={}, ", self.owner, self.stage)?;
        for b in &self.bits[..4] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

impl Key {
    pub fn bit_len(&self) -> u64 {
        (KEY_BYTES * 8) as u64
    }
}

/// A fixed-length bit string; bits past `len` in the last byte are always zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits {
    len: u32,
    bytes: Vec<u8>,
}

impl Bits {
    pub fn zeros(len: u32) -> Self {
        Bits {
            len,
            bytes: vec![0; len.div_ceil(8) as usize],
        }
    }

    pub fn from_bytes(len: u32, mut bytes: Vec<u8>) -> Self {
        bytes.resize(len.div_ceil(8) as usize, 0);
        let mut b = Bits { len, bytes };
        b.mask_tail();
        b
    }

    /// Uniformly random bits drawn from `rng`.
    pub fn random<R: RngCore>(len: u32, rng: &mut R) -> Self {
        let mut bytes = vec![0; len.div_ceil(8) as usize];
        rng.fill_bytes(&mut bytes);
        Bits::from_bytes(len, bytes)
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= (1u8 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn is_zero(&self) -> bool {
        self.bytes.iter().all(|&b| b == 0)
    }

    /// Bitwise XOR of equal-length strings.
    pub fn xor(&self, other: &Bits) -> Bits {
        assert_eq!(self.len, other.len, "xor of unequal lengths");
        Bits {
            len: self.len,
            bytes: self.bytes.iter().zip(&other.bytes).map(|(a, b)| a ^ b).collect(),
        }
    }
}

/// A set of key owners, used both as the parity of applied keys and as the set of
/// keys a node knows. Owners are node indices below 64.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeySet(pub u64);

impl KeySet {
    pub const EMPTY: KeySet = KeySet(0);

    pub fn single(owner: NodeId) -> Self {
        KeySet(1 << owner.0)
    }

    /// Every owner in `0..n` except `except`.
    pub fn all_but(n: u32, except: NodeId) -> Self {
        let all = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
        KeySet(all & !(1 << except.0))
    }

    pub fn contains(self, owner: NodeId) -> bool {
        self.0 >> owner.0 & 1 == 1
    }

    pub fn toggle(self, owner: NodeId) -> Self {
        KeySet(self.0 ^ (1 << owner.0))
    }

    pub fn insert(self, owner: NodeId) -> Self {
        KeySet(self.0 | (1 << owner.0))
    }

    pub fn is_subset(self, other: KeySet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn owners(self) -> impl Iterator<Item = NodeId> {
        (0..64u32).filter(move |i| self.0 >> i & 1 == 1).map(NodeId)
    }
}

/// Where a payload came from before any keys were applied.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    /// The source's event for this identifier.
    Genuine { stage: StageIndex, id: EventId },
    /// Bits made up by a deviating node.
    Fabricated { stage: StageIndex, node: NodeId, round: Round },
}

impl Origin {
    pub fn stage(self) -> StageIndex {
        match self {
            Origin::Genuine { stage, .. } | Origin::Fabricated { stage, .. } => stage,
        }
    }
}

/// Symbolic description of a payload: its original content and the keys applied.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PayloadMeta {
    pub origin: Origin,
    pub key_parity: KeySet,
}

/// Payload bits together with their symbolic metadata.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Payload {
    pub bits: Bits,
    pub meta: PayloadMeta,
}

impl Payload {
    pub fn plain(bits: Bits, origin: Origin) -> Self {
        Payload {
            bits,
            meta: PayloadMeta {
                origin,
                key_parity: KeySet::EMPTY,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CipherError {
    #[error("payload has {got} bits, expected {expected}")]
    Length { got: u32, expected: u32 },
    #[error("key issued in stage {key} applied to a stage-{payload} payload")]
    Stage { key: StageIndex, payload: StageIndex },
}

/// Expand `key` into `len_bits` keystream bits.
pub fn keystream(key: &Key, len_bits: u32) -> Bits {
    let mut rng = ChaCha20Rng::from_seed(key.bits);
    Bits::random(len_bits, &mut rng)
}

/// XOR `payload` with the keystream of `key` and toggle the key in its parity.
pub fn apply(key: &Key, payload: &Payload, payload_bits: u32) -> Result<Payload, CipherError> {
    if payload.bits.len() != payload_bits {
        return Err(CipherError::Length {
            got: payload.bits.len(),
            expected: payload_bits,
        });
    }
    let stage = payload.meta.origin.stage();
    if key.stage != stage {
        return Err(CipherError::Stage {
            key: key.stage,
            payload: stage,
        });
    }
    Ok(Payload {
        bits: payload.bits.xor(&keystream(key, payload_bits)),
        meta: PayloadMeta {
            origin: payload.meta.origin,
            key_parity: payload.meta.key_parity.toggle(key.owner),
        },
    })
}

/// Whether `owner`, knowing `known_keys`, can recover the original content.
pub fn retrievable(meta: &PayloadMeta, known_keys: KeySet, owner: NodeId) -> bool {
    meta.key_parity.is_subset(known_keys) && !meta.key_parity.contains(owner)
}
