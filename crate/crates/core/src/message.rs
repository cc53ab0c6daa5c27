//! Wire messages and their exact sizes.

use thiserror::Error;

use crate::cipher::{Key, Payload};
use crate::config::{log2_ceil, EventId, NodeId, Round, SimConfig};
use crate::subset_prng::Seed;

/// Which side of a peer's traffic a report describes.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// Identifiers the reporter sent to the subject.
    Sent,
    /// Identifiers the reporter received from the subject.
    Received,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReportEntry {
    pub id: EventId,
    pub round: Round,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tuple {
    pub id: EventId,
    pub payload: Payload,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Message {
    Accusation { target: NodeId },
    MonitorRequest { target: NodeId, seq: u32 },
    Report { subject: NodeId, direction: Direction, entries: Vec<ReportEntry> },
    Verdict { target: NodeId },
    KeyDelivery { key: Key },
    SeedDelivery { seed: Seed },
    Dissemination { tuples: Vec<Tuple> },
    Padding { bits: u64 },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Accusation { .. } => "accusation",
            Message::MonitorRequest { .. } => "monitor",
            Message::Report { .. } => "report",
            Message::Verdict { .. } => "verdict",
            Message::KeyDelivery { .. } => "key",
            Message::SeedDelivery { .. } => "seed",
            Message::Dissemination { .. } => "dissemination",
            Message::Padding { .. } => "padding",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FramingError {
    #[error("report lists identifier {0} more than once")]
    DuplicateReportEntry(EventId),
}

/// Exact number of bits `msg` occupies on the wire.
pub fn message_bits(msg: &Message, cfg: &SimConfig) -> Result<u64, FramingError> {
    Ok(match msg {
        Message::Accusation { .. } => cfg.accusation_bits(),
        Message::MonitorRequest { .. } => {
            cfg.node_bits() + log2_ceil(cfg.n_seq as u64).max(1) as u64
        }
        Message::Report { entries, .. } => {
            let mut ids: Vec<EventId> = entries.iter().map(|e| e.id).collect();
            ids.sort_unstable();
            if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
                return Err(FramingError::DuplicateReportEntry(w[0]));
            }
            entries.len() as u64 * cfg.entry_bits()
        }
        Message::Verdict { .. } => cfg.node_bits(),
        Message::KeyDelivery { key } => cfg.node_bits() + key.bit_len(),
        Message::SeedDelivery { .. } => 64,
        Message::Dissemination { tuples } => tuples.len() as u64 * cfg.tuple_bits(),
        Message::Padding { bits } => *bits,
    })
}

/// A message in transit, with its size fixed when it was sent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Envelope {
    pub sender: NodeId,
    pub recipient: NodeId,
    pub message: Message,
    pub bits: u64,
}

impl Envelope {
    pub fn new(sender: NodeId, recipient: NodeId, message: Message, cfg: &SimConfig) -> Result<Self, FramingError> {
        let bits = message_bits(&message, cfg)?;
        Ok(Envelope {
            sender,
            recipient,
            message,
            bits,
        })
    }

    /// For messages built by the protocol itself, which are well-formed by construction.
    pub(crate) fn framed(sender: NodeId, recipient: NodeId, message: Message, cfg: &SimConfig) -> Self {
        Envelope::new(sender, recipient, message, cfg).expect("protocol messages are well-formed")
    }
}
