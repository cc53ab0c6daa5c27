//! Labeled random substreams derived from one master seed.
//!
//! Each draw site hashes its label into a ChaCha seed, so two runs that share a
//! master seed see identical randomness at every site regardless of what else
//! happened in between. Paired comparisons rely on this.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::config::{EventId, NodeId, Round, StageIndex};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Label {
    EventPayload { stage: StageIndex, id: EventId },
    NodeSeed { stage: StageIndex, node: NodeId },
    NodeKey { stage: StageIndex, node: NodeId, attempt: u32 },
    MonitorDraw { stage: StageIndex, target: NodeId, seq: u32 },
    Fabricated { stage: StageIndex, node: NodeId, round: Round },
    Replicate { index: u64 },
}

impl Label {
    fn encode(&self) -> [u32; 4] {
        match *self {
            Label::EventPayload { stage, id } => [1, stage, id.0, 0],
            Label::NodeSeed { stage, node } => [2, stage, node.0, 0],
            Label::NodeKey { stage, node, attempt } => [3, stage, node.0, attempt],
            Label::MonitorDraw { stage, target, seq } => [4, stage, target.0, seq],
            Label::Fabricated { stage, node, round } => [5, stage, node.0, round],
            Label::Replicate { index } => [6, index as u32, (index >> 32) as u32, 0],
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Substreams {
    master_seed: u64,
}

impl Substreams {
    pub fn new(master_seed: u64) -> Self {
        Substreams { master_seed }
    }

    pub fn seed_bytes(&self, label: Label) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"substream");
        h.update(self.master_seed.to_le_bytes());
        for w in label.encode() {
            h.update(w.to_le_bytes());
        }
        h.finalize().into()
    }

    pub fn rng(&self, label: Label) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.seed_bytes(label))
    }

    /// A 64-bit value derived from the label, used to seed independent replicates.
    pub fn derive_u64(&self, label: Label) -> u64 {
        u64::from_le_bytes(self.seed_bytes(label)[..8].try_into().expect("8 bytes"))
    }
}
