//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use itertools::Itertools;
use mediated_gossip::cipher::KeySet;
use mediated_gossip::config::{EventId, NodeId, Round, SimConfig};
use mediated_gossip::message::Message;
use mediated_gossip::sim::{DeviationKind, DeviationPlan, IdSelector, ReportEdit, ShapeViolation, StageTrace};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;

/// Reception probabilities by walking every sequence of forwarding choices.
///
/// Each path is a list of choices, one per forwarder, each with weight `1/x`; paths
/// are tallied by how many choices they made so the result is exact.
pub fn brute_force_reliability(n: u32, f: u32, hops: u32) -> Vec<BigRational> {
    let x = (1..n).combinations(f as usize).count() as u64;
    let mut tally: BTreeMap<u32, Vec<u128>> = BTreeMap::new();
    walk(n, f, hops, 1, vec![0], 1u64, 0, &mut tally);
    let mut out = vec![BigRational::zero(); n as usize];
    for (depth, counts) in tally {
        let denom = BigInt::from(x).pow(depth);
        for (i, c) in counts.into_iter().enumerate() {
            out[i] += BigRational::new(BigInt::from(c), denom.clone());
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(n: u32, f: u32, hops: u32, hop: u32, frontier: Vec<u32>, have: u64, depth: u32, tally: &mut BTreeMap<u32, Vec<u128>>) {
    if hop > hops || frontier.is_empty() {
        let counts = tally.entry(depth).or_insert_with(|| vec![0; n as usize]);
        for (i, c) in counts.iter_mut().enumerate() {
            if have >> i & 1 == 1 {
                *c += 1;
            }
        }
        return;
    }
    choose(n, f, hops, hop, &frontier, 0, have, 0, depth, tally);
}

#[allow(clippy::too_many_arguments)]
fn choose(
    n: u32,
    f: u32,
    hops: u32,
    hop: u32,
    frontier: &[u32],
    k: usize,
    have: u64,
    fresh: u64,
    depth: u32,
    tally: &mut BTreeMap<u32, Vec<u128>>,
) {
    if k == frontier.len() {
        let next: Vec<u32> = (0..n).filter(|i| fresh >> i & 1 == 1).collect();
        walk(n, f, hops, hop + 1, next, have | fresh, depth, tally);
        return;
    }
    let v = frontier[k];
    for subset in (0..n).filter(|&j| j != v).combinations(f as usize) {
        let mut add = fresh;
        for j in subset {
            if have >> j & 1 == 0 {
                add |= 1 << j;
            }
        }
        choose(n, f, hops, hop, frontier, k + 1, have, add, depth + 1, tally);
    }
}

/// Pearson statistic of `counts` against a uniform expectation.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

/// First round in which `node` sent each identifier.
pub fn forward_rounds(st: &StageTrace, node: NodeId) -> BTreeMap<EventId, Round> {
    let mut out = BTreeMap::new();
    for (round, e) in st.messages() {
        if e.sender != node {
            continue;
        }
        if let Message::Dissemination { tuples } = &e.message {
            for t in tuples {
                out.entry(t.id).or_insert(round);
            }
        }
    }
    out
}

/// Drop one forwarded identifier in each of the first `k` sequences that have one.
pub fn drop_plans(cfg: &SimConfig, st: &StageTrace, node: NodeId, k: u32) -> Option<Vec<DeviationPlan>> {
    let rounds = forward_rounds(st, node);
    let mut plans = Vec::new();
    for seq in 1..=cfg.n_seq {
        if plans.len() as u32 == k {
            break;
        }
        if let Some((&id, &round)) = rounds.iter().find(|(id, _)| id.seq(cfg.per_seq) == seq) {
            plans.push(DeviationPlan {
                node,
                stage: st.stage,
                round,
                kind: DeviationKind::DropForward(IdSelector::Id(id)),
            });
        }
    }
    (plans.len() as u32 == k).then_some(plans)
}

/// A random one-shot deviation in stage 1 or 2, valid for its round.
pub fn random_plan<R: Rng>(cfg: &SimConfig, rng: &mut R) -> DeviationPlan {
    let node = NodeId(rng.gen_range(1..cfg.n));
    let stage = rng.gen_range(1..=2);
    let peer = |rng: &mut R| loop {
        let j = NodeId(rng.gen_range(1..cfg.n));
        if j != node {
            return j;
        }
    };
    let dis = |rng: &mut R| cfg.r_mon() + rng.gen_range(1..=cfg.r_dis);
    let report_round = |rng: &mut R| 2 * rng.gen_range(1..=cfg.n_seq) + 1;
    let ids = |rng: &mut R| {
        if rng.gen_bool(0.5) {
            IdSelector::All
        } else {
            IdSelector::Id(EventId(rng.gen_range(1..=cfg.rho)))
        }
    };
    let (round, kind) = match rng.gen_range(0..7) {
        0 => (dis(rng), DeviationKind::DropForward(ids(rng))),
        1 => {
            let replacement = if rng.gen_bool(0.5) {
                let mut others: Vec<NodeId> = cfg.nodes().filter(|&j| j != node).collect();
                others.shuffle(rng);
                others.truncate(cfg.f as usize);
                Some(others)
            } else {
                None
            };
            (dis(rng), DeviationKind::WrongSubset { ids: ids(rng), replacement })
        }
        2 => {
            let id = rng.gen_range(1..=cfg.rho);
            let age = rng.gen_range(1..=cfg.delta_exp);
            (cfg.r_mon() + id + age - 1, DeviationKind::PrematureSend { id: EventId(id) })
        }
        3 => {
            let shape = *[ShapeViolation::DuplicateTuple, ShapeViolation::ExpiredTuple, ShapeViolation::WrongSize]
                .choose(rng)
                .expect("non-empty");
            let round = rng.gen_range(1..=cfg.rounds());
            let to = if rng.gen_bool(0.5) { Some(peer(rng)) } else { None };
            (round, DeviationKind::InvalidMessage { shape, to })
        }
        4 => (1, DeviationKind::WithholdAccusation { target: peer(rng) }),
        5 => {
            let target = if rng.gen_bool(0.5) { Some(peer(rng)) } else { None };
            (report_round(rng), DeviationKind::WithholdReport { target })
        }
        _ => {
            let target = if rng.gen_bool(0.5) { Some(peer(rng)) } else { None };
            let edit = if rng.gen_bool(0.5) { ReportEdit::Clear } else { ReportEdit::SelfIncriminate };
            (report_round(rng), DeviationKind::FalsifyReport { target, edit })
        }
    };
    DeviationPlan { node, stage, round, kind }
}

/// Genuine pend entries at `j` carry only `j`'s own key, and carry it exactly when
/// `j` is under verdict.
pub fn pend_parity_ok(j: NodeId, verdicts: KeySet, pend: &[(EventId, mediated_gossip::cipher::PayloadMeta)]) -> bool {
    pend.iter()
        .filter(|(_, m)| matches!(m.origin, mediated_gossip::cipher::Origin::Genuine { .. }))
        .all(|(_, m)| {
            m.key_parity.is_subset(KeySet::single(j)) && (m.key_parity == KeySet::single(j)) == verdicts.contains(j)
        })
}
