//! Realized stage utility and discounted sums.

use std::collections::{BTreeSet, HashMap};

use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use crate::cipher::{retrievable, KeySet, Origin, Payload};
use crate::config::{EventId, NodeId, Rational, Round, SimConfig, StageIndex};
use crate::message::Message;
use crate::sim::{StageTrace, Trace};

/// Events `node` retrieved in the stage, assuming it knows every key but its own.
pub fn rec_set(trace: &Trace, stage: StageIndex, node: NodeId) -> BTreeSet<EventId> {
    rec_set_with_keys(trace.stage(stage), node, KeySet::all_but(trace.cfg.n, node))
}

/// Events `node` retrieved given `known_keys`.
///
/// An event counts when some peer sent the node a tuple for it whose content is the
/// genuine event, retrievable with the known keys, and not a copy of a tuple the node
/// itself had sent out in an earlier round.
pub fn rec_set_with_keys(st: &StageTrace, node: NodeId, known_keys: KeySet) -> BTreeSet<EventId> {
    let mut own: HashMap<(EventId, &Payload), Round> = HashMap::new();
    for (round, e) in st.messages() {
        if e.sender != node {
            continue;
        }
        if let Message::Dissemination { tuples } = &e.message {
            for t in tuples {
                own.entry((t.id, &t.payload)).or_insert(round);
            }
        }
    }
    let mut rec = BTreeSet::new();
    for (round, e) in st.messages() {
        if e.recipient != node || e.sender == node {
            continue;
        }
        let Message::Dissemination { tuples } = &e.message else {
            continue;
        };
        for t in tuples {
            let genuine = t.payload.meta.origin == Origin::Genuine { stage: st.stage, id: t.id };
            let looped = own.get(&(t.id, &t.payload)).is_some_and(|&r| r < round);
            if genuine && !looped && retrievable(&t.payload.meta, known_keys, node) {
                rec.insert(t.id);
            }
        }
    }
    rec
}

/// One node's accounting for one stage.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UtilityRow {
    pub node: u32,
    pub stage: u32,
    pub benefit_events: u64,
    pub bits_sent: u64,
    #[serde(serialize_with = "ser_rational")]
    pub realized_u: Rational,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

/// `(beta * |rec| - alpha * bits) / rho`, exactly.
pub fn utility_from_counts(cfg: &SimConfig, benefit_events: u64, bits_sent: u64) -> Rational {
    (cfg.beta * Rational::from_integer(benefit_events as i128) - cfg.alpha * Rational::from_integer(bits_sent as i128))
        / Rational::from_integer(cfg.rho as i128)
}

pub fn stage_row(cfg: &SimConfig, st: &StageTrace, node: NodeId) -> UtilityRow {
    let benefit = rec_set_with_keys(st, node, KeySet::all_but(cfg.n, node)).len() as u64;
    let bits = st.bits_sent(node);
    UtilityRow {
        node: node.0,
        stage: st.stage,
        benefit_events: benefit,
        bits_sent: bits,
        realized_u: utility_from_counts(cfg, benefit, bits),
    }
}

pub fn stage_utility(trace: &Trace, stage: StageIndex, node: NodeId) -> Rational {
    stage_row(&trace.cfg, trace.stage(stage), node).realized_u
}

/// Rows for every non-source node and every stage.
pub fn utility_report(trace: &Trace) -> Vec<UtilityRow> {
    trace
        .stages
        .iter()
        .flat_map(|st| trace.cfg.nodes().skip(1).map(move |i| stage_row(&trace.cfg, st, i)))
        .collect()
}

pub fn to_f64(r: Rational) -> f64 {
    r.to_f64().expect("finite rational")
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum UtilityError {
    #[error("discount factor {0} must lie in [0, 1)")]
    Discount(f64),
}

/// `sum_t delta^t u_t + delta^T * tail / (1 - delta)`. `delta = 0` gives `u_0`.
pub fn discounted(utilities: &[f64], delta: f64, tail: f64) -> Result<f64, UtilityError> {
    if !(0.0..1.0).contains(&delta) {
        return Err(UtilityError::Discount(delta));
    }
    let mut acc = 0.0;
    let mut w = 1.0;
    for u in utilities {
        acc += w * u;
        w *= delta;
    }
    Ok(acc + w * tail / (1.0 - delta))
}

/// Average utility `(1 - delta) * U`.
pub fn average(discounted_u: f64, delta: f64) -> f64 {
    (1.0 - delta) * discounted_u
}
