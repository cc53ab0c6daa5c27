//! Node and mediator state machines for monitoring and dissemination.
//!
//! A stage has `r_mon = 2S + 2` monitoring rounds followed by `r_dis` dissemination
//! rounds:
//!
//! * round 1: every node sends the mediator one accusation-sized slot per other node;
//! * even round `2k`: the mediator asks for reports on sequence `k` of some targets;
//! * odd round `2k + 1`: nodes answer with fixed-size reports about the previous stage;
//! * round `r_mon`: the mediator broadcasts verdicts and hands out keys and seeds;
//! * dissemination rounds: events spread through seeded forwarding subsets.
//!
//! Each round the engine calls [`NodeState::emit`] on every node, delivers all
//! envelopes at once, and then calls [`NodeState::absorb`] with the node's inbox and
//! with what it actually sent.

use std::collections::BTreeMap;

use rand::Rng;

use crate::cipher::{apply, Key, KeySet, Payload, PayloadMeta, KEY_BYTES};
use crate::config::{EventId, NodeId, Round, SimConfig, StageIndex};
use crate::message::{message_bits, Direction, Envelope, Message, ReportEntry, Tuple};
use crate::streams::{Label, Substreams};
use crate::subset_prng::{expand, Seed};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Stat {
    Good,
    Bad,
}

/// What a round is for.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RoundKind {
    Accusations,
    Requests { seq: u32 },
    Reports { seq: u32 },
    Verdicts,
    Dissemination,
}

pub fn round_kind(cfg: &SimConfig, round: Round) -> RoundKind {
    let r_mon = cfg.r_mon();
    if round == 1 {
        RoundKind::Accusations
    } else if round == r_mon {
        RoundKind::Verdicts
    } else if round < r_mon {
        if round % 2 == 0 {
            RoundKind::Requests { seq: round / 2 }
        } else {
            RoundKind::Reports { seq: (round - 1) / 2 }
        }
    } else {
        RoundKind::Dissemination
    }
}

/// Identifier the source introduces in `round`, if any.
pub fn source_step(cfg: &SimConfig, round: Round) -> Option<EventId> {
    let r_mon = cfg.r_mon();
    (round > r_mon && round <= r_mon + cfg.rho).then(|| EventId(round - r_mon))
}

/// First round in which each `(peer, id)` pair was seen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Book {
    rho: u32,
    rounds: Vec<Option<Round>>,
}

impl Book {
    pub fn new(n: u32, rho: u32) -> Self {
        Book {
            rho,
            rounds: vec![None; (n * (rho + 1)) as usize],
        }
    }

    fn slot(&self, peer: NodeId, id: EventId) -> usize {
        peer.index() * (self.rho as usize + 1) + id.index()
    }

    pub fn first(&self, peer: NodeId, id: EventId) -> Option<Round> {
        self.rounds[self.slot(peer, id)]
    }

    /// Record `(peer, id)` at `round` unless already present; true if recorded.
    pub fn record_first(&mut self, peer: NodeId, id: EventId, round: Round) -> bool {
        let s = self.slot(peer, id);
        if self.rounds[s].is_none() {
            self.rounds[s] = Some(round);
            true
        } else {
            false
        }
    }

    /// Entries for `peer` restricted to identifiers in `ids`.
    pub fn entries(&self, peer: NodeId, ids: impl Iterator<Item = EventId>) -> Vec<ReportEntry> {
        ids.filter_map(|id| self.first(peer, id).map(|round| ReportEntry { id, round }))
            .collect()
    }

    pub fn peers(&self) -> u32 {
        (self.rounds.len() / (self.rho as usize + 1)) as u32
    }
}

/// Whether the holder of `sent`/`received` handled `id` in a way its forwarding
/// subset `expected` does not explain.
///
/// True if some peer outside `expected` was sent `id`; otherwise, if `id` was
/// received with an age that still calls for forwarding, if some expected peer did
/// not get it in the following round; otherwise, if `id` was sent without ever being
/// received.
pub fn inconsistent(id: EventId, sent: &Book, received: &Book, expected: &[NodeId], cfg: &SimConfig) -> bool {
    let peers = sent.peers().min(received.peers());
    if (0..peers)
        .map(NodeId)
        .any(|p| !expected.contains(&p) && sent.first(p, id).is_some())
    {
        return true;
    }
    let earliest = (0..peers).filter_map(|p| received.first(NodeId(p), id)).min();
    match earliest {
        Some(r) => {
            let a = cfg.age(id, r);
            a >= 1
                && a < cfg.delta_exp as i64
                && expected.iter().any(|&l| sent.first(l, id) != Some(r + 1))
        }
        None => (0..peers).any(|p| sent.first(NodeId(p), id).is_some()),
    }
}

/// Whether a dissemination-round message is well-formed in `round`.
pub fn dissemination_valid(cfg: &SimConfig, round: Round, env: &Envelope) -> bool {
    let Message::Dissemination { tuples } = &env.message else {
        return false;
    };
    if tuples.is_empty() || env.bits != tuples.len() as u64 * cfg.tuple_bits() {
        return false;
    }
    let mut seen = Vec::with_capacity(tuples.len());
    for t in tuples {
        if t.id.0 < 1
            || t.id.0 > cfg.rho
            || !cfg.age_valid(t.id, round)
            || t.payload.bits.len() != cfg.payload_bits
            || seen.contains(&t.id)
        {
            return false;
        }
        seen.push(t.id);
    }
    true
}

/// Whether everything `sender` sent to the mediator in a monitoring round has the
/// required shape. `requests` are the targets the sender was asked about.
pub fn monitoring_outbox_valid(
    cfg: &SimConfig,
    round: Round,
    sender: NodeId,
    sent: &[&Envelope],
    requests: &[NodeId],
) -> bool {
    if sent.iter().any(|e| e.sender != sender || !e.recipient.is_source()) {
        return false;
    }
    let framed = |e: &Envelope| message_bits(&e.message, cfg).map(|b| b == e.bits).unwrap_or(false);
    match round_kind(cfg, round) {
        RoundKind::Accusations => {
            sent.len() == (cfg.n - 1) as usize
                && sent.iter().all(|e| {
                    framed(e)
                        && match e.message {
                            Message::Accusation { .. } => true,
                            Message::Padding { bits } => bits == cfg.accusation_bits(),
                            _ => false,
                        }
                })
        }
        RoundKind::Reports { .. } => {
            let total: u64 = sent.iter().map(|e| e.bits).sum();
            sent.iter()
                .all(|e| framed(e) && matches!(e.message, Message::Report { .. } | Message::Padding { .. }))
                && total == requests.len() as u64 * cfg.report_bits_per_request()
        }
        RoundKind::Requests { .. } | RoundKind::Verdicts => sent.is_empty(),
        RoundKind::Dissemination => false,
    }
}

/// A pending forward: the payload as it will be re-ciphered for each recipient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PendEntry {
    pub id: EventId,
    pub payload: Payload,
}

/// Keys, verdicts and seed the mediator hands out in the last monitoring round.
#[derive(Clone, Debug, Default)]
pub struct StageMaterial {
    pub verdicts: KeySet,
    pub keys: Vec<Key>,
    pub seeds: Vec<Seed>,
}

/// State of one node (including the source, node 0, in its forwarding role).
#[derive(Clone, Debug)]
pub struct NodeState {
    pub id: NodeId,
    pub stage: StageIndex,
    stat: Vec<Stat>,
    miss: Vec<u32>,
    pub re: Book,
    pub se: Book,
    /// Books of the previous stage, answered in this stage's reports.
    pub report_re: Book,
    pub report_se: Book,
    pend: Vec<PendEntry>,
    keys: Vec<Option<Key>>,
    known_keys: KeySet,
    verdicts: KeySet,
    seed: Option<Seed>,
    subsets: Vec<Vec<NodeId>>,
    first_received: Vec<Option<Round>>,
    requests: Vec<NodeId>,
    received_last_round: Vec<EventId>,
}

impl NodeState {
    pub fn new(id: NodeId, cfg: &SimConfig) -> Self {
        NodeState {
            id,
            stage: 0,
            stat: vec![Stat::Good; cfg.n as usize],
            miss: Vec::new(),
            re: Book::new(cfg.n, cfg.rho),
            se: Book::new(cfg.n, cfg.rho),
            report_re: Book::new(cfg.n, cfg.rho),
            report_se: Book::new(cfg.n, cfg.rho),
            pend: Vec::new(),
            keys: vec![None; cfg.n as usize],
            known_keys: KeySet::EMPTY,
            verdicts: KeySet::EMPTY,
            seed: None,
            subsets: Vec::new(),
            first_received: vec![None; cfg.rho as usize + 1],
            requests: Vec::new(),
            received_last_round: Vec::new(),
        }
    }

    pub fn stat(&self, of: NodeId) -> Stat {
        self.stat[of.index()]
    }

    pub fn stats(&self) -> &[Stat] {
        &self.stat
    }

    pub fn is_good(&self) -> bool {
        self.stat[self.id.index()] == Stat::Good
    }

    pub fn mark_bad(&mut self, of: NodeId) {
        self.stat[of.index()] = Stat::Bad;
    }

    pub fn miss(&self) -> &[u32] {
        &self.miss
    }

    pub fn pend(&self) -> &[PendEntry] {
        &self.pend
    }

    pub fn verdicts(&self) -> KeySet {
        self.verdicts
    }

    pub fn known_keys(&self) -> KeySet {
        self.known_keys
    }

    pub fn seed(&self) -> Option<Seed> {
        self.seed
    }

    pub fn requests(&self) -> &[NodeId] {
        &self.requests
    }

    /// Forwarding subset for `id` under this stage's seed.
    pub fn subset(&self, id: EventId) -> &[NodeId] {
        &self.subsets[id.index()]
    }

    pub fn key_of(&self, owner: NodeId) -> Option<&Key> {
        self.keys[owner.index()].as_ref()
    }

    pub fn first_received(&self, id: EventId) -> Option<Round> {
        self.first_received[id.index()]
    }

    /// Payload as sent to `to`: ciphered with `to`'s key if `to` is under verdict.
    pub fn outgoing(&self, payload: &Payload, to: NodeId, cfg: &SimConfig) -> Payload {
        if self.verdicts.contains(to) {
            if let Some(k) = self.key_of(to) {
                return apply(k, payload, cfg.payload_bits).expect("stage keys match stage payloads");
            }
        }
        payload.clone()
    }

    /// The source's introduction of `id` before it is first sent.
    pub fn introduce(&mut self, id: EventId, payload: Payload) {
        self.first_received[id.index()] = Some(0);
        self.pend.push(PendEntry { id, payload });
    }

    /// Conformant outbox for `round`.
    pub fn emit(&self, cfg: &SimConfig, round: Round) -> Vec<Envelope> {
        let me = self.id;
        match round_kind(cfg, round) {
            RoundKind::Accusations => {
                if me.is_source() {
                    return Vec::new();
                }
                cfg.nodes()
                    .filter(|&j| j != me)
                    .map(|j| {
                        let msg = if self.stat[j.index()] == Stat::Bad {
                            Message::Accusation { target: j }
                        } else {
                            Message::Padding { bits: cfg.accusation_bits() }
                        };
                        Envelope::framed(me, NodeId::SOURCE, msg, cfg)
                    })
                    .collect()
            }
            RoundKind::Reports { seq } => {
                if me.is_source() || !self.is_good() {
                    return Vec::new();
                }
                let mut out = Vec::new();
                for &j in &self.requests {
                    let received = self.report_re.entries(j, cfg.seq_events(seq));
                    let sent = self.report_se.entries(j, cfg.seq_events(seq));
                    let used = (received.len() + sent.len()) as u64 * cfg.entry_bits();
                    out.push(Envelope::framed(
                        me,
                        NodeId::SOURCE,
                        Message::Report { subject: j, direction: Direction::Received, entries: received },
                        cfg,
                    ));
                    out.push(Envelope::framed(
                        me,
                        NodeId::SOURCE,
                        Message::Report { subject: j, direction: Direction::Sent, entries: sent },
                        cfg,
                    ));
                    let pad = cfg.report_bits_per_request() - used;
                    if pad > 0 {
                        out.push(Envelope::framed(me, NodeId::SOURCE, Message::Padding { bits: pad }, cfg));
                    }
                }
                out
            }
            RoundKind::Requests { .. } | RoundKind::Verdicts => Vec::new(),
            RoundKind::Dissemination => {
                if !self.is_good() {
                    return Vec::new();
                }
                let mut by_peer: BTreeMap<NodeId, Vec<Tuple>> = BTreeMap::new();
                for entry in &self.pend {
                    if self.miss.contains(&entry.id.seq(cfg.per_seq)) {
                        continue;
                    }
                    for &j in self.subset(entry.id) {
                        by_peer.entry(j).or_default().push(Tuple {
                            id: entry.id,
                            payload: self.outgoing(&entry.payload, j, cfg),
                        });
                    }
                }
                by_peer
                    .into_iter()
                    .map(|(j, tuples)| Envelope::framed(me, j, Message::Dissemination { tuples }, cfg))
                    .collect()
            }
        }
    }

    /// Bookkeeping at the end of `round`. `inbox` holds every envelope addressed to
    /// this node; `sent` is what this node actually sent.
    pub fn absorb(&mut self, cfg: &SimConfig, stage: StageIndex, round: Round, inbox: &[&Envelope], sent: &[&Envelope]) {
        let me = self.id;
        let kind = round_kind(cfg, round);
        if kind == RoundKind::Accusations {
            self.start_stage(cfg, stage);
        }
        match kind {
            RoundKind::Dissemination => self.absorb_dissemination(cfg, round, inbox, sent),
            _ => {
                // The mediator validates monitoring traffic addressed to it; everyone
                // else only expects messages from the mediator in these rounds.
                if !me.is_source() {
                    for e in inbox {
                        if !e.sender.is_source() {
                            self.stat[e.sender.index()] = Stat::Bad;
                        }
                    }
                    if !monitoring_outbox_valid(cfg, round, me, sent, &self.requests) {
                        self.stat[me.index()] = Stat::Bad;
                    }
                }
                match kind {
                    RoundKind::Requests { seq } => {
                        self.requests = inbox
                            .iter()
                            .filter(|e| e.sender.is_source())
                            .filter_map(|e| match e.message {
                                Message::MonitorRequest { target, seq: s } if s == seq => Some(target),
                                _ => None,
                            })
                            .collect();
                    }
                    RoundKind::Reports { .. } => self.requests.clear(),
                    RoundKind::Verdicts => {
                        let mut material = StageMaterial::default();
                        for e in inbox.iter().filter(|e| e.sender.is_source()) {
                            match &e.message {
                                Message::Verdict { target } => material.verdicts = material.verdicts.insert(*target),
                                Message::KeyDelivery { key } => material.keys.push(key.clone()),
                                Message::SeedDelivery { seed } => material.seeds.push(*seed),
                                _ => {}
                            }
                        }
                        if !me.is_source() {
                            self.install(cfg, &material);
                        }
                    }
                    _ => {}
                }
            }
        }
    }

    /// Take verdicts, other nodes' keys and this node's seed.
    pub fn install(&mut self, cfg: &SimConfig, material: &StageMaterial) {
        self.verdicts = material.verdicts;
        for k in &material.keys {
            if k.owner != self.id && k.stage == self.stage {
                self.keys[k.owner.index()] = Some(k.clone());
                self.known_keys = self.known_keys.insert(k.owner);
            }
        }
        if let Some(seed) = material.seeds.iter().find(|s| s.owner == self.id) {
            self.seed = Some(*seed);
            self.subsets = std::iter::once(Vec::new())
                .chain(cfg.events().map(|id| expand(seed, id, self.id, cfg.n, cfg.f)))
                .collect();
        }
    }

    fn start_stage(&mut self, cfg: &SimConfig, stage: StageIndex) {
        self.stage = stage;
        self.report_re = std::mem::replace(&mut self.re, Book::new(cfg.n, cfg.rho));
        self.report_se = std::mem::replace(&mut self.se, Book::new(cfg.n, cfg.rho));
        self.stat.iter_mut().for_each(|s| *s = Stat::Good);
        self.miss.clear();
        self.pend.clear();
        self.keys.iter_mut().for_each(|k| *k = None);
        self.known_keys = KeySet::EMPTY;
        self.verdicts = KeySet::EMPTY;
        self.seed = None;
        self.subsets.clear();
        self.first_received.iter_mut().for_each(|r| *r = None);
        self.requests.clear();
        self.received_last_round.clear();
    }

    fn absorb_dissemination(&mut self, cfg: &SimConfig, round: Round, inbox: &[&Envelope], sent: &[&Envelope]) {
        let me = self.id;
        let mut valid_in = Vec::with_capacity(inbox.len());
        for e in inbox {
            if dissemination_valid(cfg, round, e) {
                valid_in.push(*e);
            } else {
                self.stat[e.sender.index()] = Stat::Bad;
            }
        }
        let mut dirty: Vec<EventId> = std::mem::take(&mut self.received_last_round);
        for e in sent {
            if !dissemination_valid(cfg, round, e) {
                self.stat[me.index()] = Stat::Bad;
                continue;
            }
            if let Message::Dissemination { tuples } = &e.message {
                for t in tuples {
                    self.se.record_first(e.recipient, t.id, round);
                    dirty.push(t.id);
                }
            }
        }
        if !me.is_source() && self.seed.is_some() {
            dirty.sort_unstable();
            dirty.dedup();
            for id in dirty {
                let seq = id.seq(cfg.per_seq);
                if !self.miss.contains(&seq) && inconsistent(id, &self.se, &self.re, self.subset(id), cfg) {
                    self.miss.push(seq);
                }
            }
        }
        // First reception per identifier this round, keeping the smallest sender.
        let mut fresh: BTreeMap<EventId, (NodeId, &Payload)> = BTreeMap::new();
        for e in &valid_in {
            if let Message::Dissemination { tuples } = &e.message {
                for t in tuples {
                    self.re.record_first(e.sender, t.id, round);
                    if self.first_received[t.id.index()].is_none() {
                        let slot = fresh.entry(t.id).or_insert((e.sender, &t.payload));
                        if e.sender < slot.0 {
                            *slot = (e.sender, &t.payload);
                        }
                    }
                }
            }
        }
        self.pend.clear();
        for (id, (from, payload)) in fresh {
            self.first_received[id.index()] = Some(round);
            self.received_last_round.push(id);
            if cfg.age(id, round) < cfg.delta_exp as i64 {
                let payload = match (self.verdicts.contains(from), self.key_of(from)) {
                    (true, Some(k)) => apply(k, payload, cfg.payload_bits).expect("stage keys match stage payloads"),
                    _ => payload.clone(),
                };
                self.pend.push(PendEntry { id, payload });
            }
        }
    }
}

/// Evidence about one target's handling of one monitored sequence.
#[derive(Clone, Debug)]
struct Evidence {
    target: NodeId,
    seq: u32,
    /// Per peer: when the target first sent each identifier to it.
    sent: Book,
    /// Per peer: when the target first received each identifier from it.
    received: Book,
    responders: KeySet,
}

/// The mediator, run by node 0.
#[derive(Clone, Debug)]
pub struct MediatorState {
    pub stage: StageIndex,
    /// `(accuser, target)` pairs from round 1.
    pub accusations: Vec<(NodeId, NodeId)>,
    /// `(target, seq)` pairs drawn for monitoring this stage.
    pub monitored: Vec<(NodeId, u32)>,
    evidence: Vec<Evidence>,
    pending_requests: Vec<Vec<NodeId>>,
    pub issued_keys: Vec<Key>,
    pub issued_seeds: Vec<Seed>,
    /// Seeds of the previous stage, against which reports are judged.
    pub previous_seeds: Vec<Seed>,
    pub verdicts: KeySet,
}

impl MediatorState {
    pub fn new(cfg: &SimConfig) -> Self {
        MediatorState {
            stage: 0,
            accusations: Vec::new(),
            monitored: Vec::new(),
            evidence: Vec::new(),
            pending_requests: vec![Vec::new(); cfg.n as usize],
            issued_keys: Vec::new(),
            issued_seeds: Vec::new(),
            previous_seeds: Vec::new(),
            verdicts: KeySet::EMPTY,
        }
    }

    /// Mediator outbox for a monitoring round; also computes verdicts, keys and seeds
    /// in the last one.
    pub fn emit(&mut self, cfg: &SimConfig, stage: StageIndex, round: Round, streams: &Substreams, own: &NodeState) -> Vec<Envelope> {
        let med = NodeId::SOURCE;
        match round_kind(cfg, round) {
            RoundKind::Requests { seq } => {
                let mut out = Vec::new();
                self.pending_requests.iter_mut().for_each(Vec::clear);
                for j in cfg.nodes().skip(1) {
                    let u: f64 = streams.rng(Label::MonitorDraw { stage, target: j, seq }).gen();
                    if u >= cfg.p_mon {
                        continue;
                    }
                    self.monitored.push((j, seq));
                    let mut ev = Evidence {
                        target: j,
                        seq,
                        sent: Book::new(cfg.n, cfg.rho),
                        received: Book::new(cfg.n, cfg.rho),
                        responders: KeySet::single(med),
                    };
                    for id in cfg.seq_events(seq) {
                        if let Some(r) = own.report_re.first(j, id) {
                            ev.sent.record_first(med, id, r);
                        }
                        if let Some(r) = own.report_se.first(j, id) {
                            ev.received.record_first(med, id, r);
                        }
                    }
                    self.evidence.push(ev);
                    for l in cfg.nodes().skip(1).filter(|&l| l != j) {
                        self.pending_requests[l.index()].push(j);
                        out.push(Envelope::framed(med, l, Message::MonitorRequest { target: j, seq }, cfg));
                    }
                }
                out
            }
            RoundKind::Verdicts => {
                self.decide(cfg);
                self.draw_material(cfg, stage, streams);
                let mut out = Vec::new();
                for j in self.verdicts.owners() {
                    for l in cfg.nodes().skip(1) {
                        out.push(Envelope::framed(med, l, Message::Verdict { target: j }, cfg));
                    }
                }
                for k in &self.issued_keys {
                    for l in cfg.nodes().skip(1).filter(|&l| l != k.owner) {
                        out.push(Envelope::framed(med, l, Message::KeyDelivery { key: k.clone() }, cfg));
                    }
                }
                for s in self.issued_seeds.iter().skip(1) {
                    out.push(Envelope::framed(med, s.owner, Message::SeedDelivery { seed: *s }, cfg));
                }
                out
            }
            _ => Vec::new(),
        }
    }

    /// Round 1, before node 0 resets: collect node 0's own accusations.
    pub fn begin_stage(&mut self, stage: StageIndex, own: &NodeState) {
        self.stage = stage;
        self.accusations.clear();
        self.monitored.clear();
        self.evidence.clear();
        self.verdicts = KeySet::EMPTY;
        self.previous_seeds = std::mem::take(&mut self.issued_seeds);
        self.issued_keys.clear();
        for (j, s) in own.stats().iter().enumerate() {
            if *s == Stat::Bad && j != 0 {
                self.accusations.push((NodeId::SOURCE, NodeId(j as u32)));
            }
        }
    }

    /// Validate and record what nodes sent the mediator this round. Invalid senders
    /// are marked Bad in node 0's state, which becomes next stage's accusation.
    pub fn absorb(&mut self, cfg: &SimConfig, round: Round, inbox: &[&Envelope], own: &mut NodeState) {
        let kind = round_kind(cfg, round);
        if kind == RoundKind::Dissemination {
            return;
        }
        let mut by_sender: BTreeMap<NodeId, Vec<&Envelope>> = BTreeMap::new();
        for e in inbox {
            by_sender.entry(e.sender).or_default().push(e);
        }
        let expected_senders: Vec<NodeId> = match kind {
            RoundKind::Accusations => cfg.nodes().skip(1).collect(),
            RoundKind::Reports { .. } => cfg
                .nodes()
                .skip(1)
                .filter(|l| !self.pending_requests[l.index()].is_empty())
                .collect(),
            _ => Vec::new(),
        };
        let mut senders: Vec<NodeId> = by_sender.keys().copied().collect();
        senders.extend(expected_senders);
        senders.sort_unstable();
        senders.dedup();
        for l in senders {
            let msgs = by_sender.get(&l).map(Vec::as_slice).unwrap_or(&[]);
            let requests = match kind {
                RoundKind::Reports { .. } => self.pending_requests[l.index()].clone(),
                _ => Vec::new(),
            };
            if !monitoring_outbox_valid(cfg, round, l, msgs, &requests) {
                own.mark_bad(l);
                continue;
            }
            match kind {
                RoundKind::Accusations => {
                    for e in msgs {
                        if let Message::Accusation { target } = e.message {
                            if target != l && !target.is_source() && target.0 < cfg.n {
                                self.accusations.push((l, target));
                            }
                        }
                    }
                }
                RoundKind::Reports { seq } => self.collect_reports(cfg, seq, l, msgs, &requests),
                _ => {}
            }
        }
    }

    fn collect_reports(&mut self, cfg: &SimConfig, seq: u32, reporter: NodeId, msgs: &[&Envelope], requests: &[NodeId]) {
        let lo = (seq - 1) * cfg.per_seq + 1;
        let hi = seq * cfg.per_seq;
        for ev in self.evidence.iter_mut().filter(|ev| ev.seq == seq && requests.contains(&ev.target)) {
            ev.responders = ev.responders.insert(reporter);
            for e in msgs {
                let Message::Report { subject, direction, entries } = &e.message else {
                    continue;
                };
                // A node's statements about itself never count.
                if *subject != ev.target || *subject == reporter {
                    continue;
                }
                for entry in entries.iter().filter(|x| x.id.0 >= lo && x.id.0 <= hi) {
                    match direction {
                        Direction::Received => ev.sent.record_first(reporter, entry.id, entry.round),
                        Direction::Sent => ev.received.record_first(reporter, entry.id, entry.round),
                    };
                }
            }
        }
    }

    fn decide(&mut self, cfg: &SimConfig) {
        let mut verdicts = KeySet::EMPTY;
        for &(_, target) in &self.accusations {
            verdicts = verdicts.insert(target);
        }
        for ev in &self.evidence {
            let Some(seed) = self.previous_seeds.iter().find(|s| s.owner == ev.target) else {
                continue;
            };
            // Judge only when every other node answered; a silent reporter would
            // otherwise make the target look like it skipped a forward.
            let needed = KeySet::all_but(cfg.n, ev.target);
            if !needed.is_subset(ev.responders) {
                continue;
            }
            let caught = cfg.seq_events(ev.seq).any(|id| {
                let expected = expand(seed, id, ev.target, cfg.n, cfg.f);
                inconsistent(id, &ev.sent, &ev.received, &expected, cfg)
            });
            if caught {
                verdicts = verdicts.insert(ev.target);
            }
        }
        self.verdicts = verdicts;
    }

    fn draw_material(&mut self, cfg: &SimConfig, stage: StageIndex, streams: &Substreams) {
        let mut keys: Vec<Key> = Vec::with_capacity(cfg.n as usize);
        for j in cfg.nodes() {
            let mut attempt = 0;
            loop {
                let mut bits = [0u8; KEY_BYTES];
                streams.rng(Label::NodeKey { stage, node: j, attempt }).fill(&mut bits);
                if keys.iter().all(|k| k.bits != bits) {
                    keys.push(Key { owner: j, stage, bits });
                    break;
                }
                attempt += 1;
            }
        }
        self.issued_keys = keys;
        self.issued_seeds = cfg
            .nodes()
            .map(|j| Seed {
                owner: j,
                stage,
                bits: streams.rng(Label::NodeSeed { stage, node: j }).gen(),
            })
            .collect();
    }

    /// Material for node 0 itself, which receives nothing over the wire.
    pub fn own_material(&self) -> StageMaterial {
        StageMaterial {
            verdicts: self.verdicts,
            keys: self.issued_keys.clone(),
            seeds: self.issued_seeds.clone(),
        }
    }
}

/// Symbolic digest of a pending entry, for traces.
pub fn pend_digest(entries: &[PendEntry]) -> Vec<(EventId, PayloadMeta)> {
    entries.iter().map(|p| (p.id, p.payload.meta)).collect()
}
