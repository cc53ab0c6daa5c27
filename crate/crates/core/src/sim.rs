//! Synchronous round engine with one-shot deviation injection and full traces.
//!
//! # Trace export format
//!
//! [`export_trace`] writes comma-separated lines. A message line is
//!
//! ```text
//! msg,<stage>,<round>,<sender>,<recipient>,<kind>,<bits>,<ids>,<key_parity>
//! ```
//!
//! where `<ids>` lists the tuple or report-entry identifiers separated by `;` and
//! `<key_parity>` lists, per tuple, the owners of keys applied an odd number of times
//! joined by `+` (tuples separated by `;`, `-` for none). After the messages of each
//! stage comes one summary line
//!
//! ```text
//! stage,<stage>,<messages>,<bits>,<verdicts>,<monitored>
//! ```
//!
//! with verdict targets separated by `;` and monitored pairs written `target:seq`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::cipher::{Bits, KeySet, Origin, Payload, PayloadMeta};
use crate::config::{ConfigError, EventId, NodeId, Round, SimConfig, StageIndex};
use crate::message::{Direction, Envelope, Message, ReportEntry, Tuple};
use crate::protocol::{pend_digest, round_kind, source_step, MediatorState, NodeState, RoundKind, Stat};
use crate::streams::{Label, Substreams};
use crate::subset_prng::{binomial, rank_subset, universe_without, unrank_subset};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IdSelector {
    All,
    Id(EventId),
}

impl IdSelector {
    fn matches(&self, id: EventId) -> bool {
        match self {
            IdSelector::All => true,
            IdSelector::Id(x) => *x == id,
        }
    }
}

/// How an invalid message is malformed.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ShapeViolation {
    /// Two tuples with the same identifier in one message.
    DuplicateTuple,
    /// A tuple whose identifier is outside its age window.
    ExpiredTuple,
    /// A message of the wrong size.
    WrongSize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ReportEdit {
    /// Report no entries, padding to the same size.
    Clear,
    /// Replace the report with full-size claims about the reporter itself.
    SelfIncriminate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DeviationKind {
    /// Do not send the selected forwards of this round.
    DropForward(IdSelector),
    /// Send the selected forwards to another subset (default: the next one in
    /// lexicographic order).
    WrongSubset { ids: IdSelector, replacement: Option<Vec<NodeId>> },
    /// Send made-up content for `id` to its forwarding subset before receiving it.
    PrematureSend { id: EventId },
    /// Send one malformed message (to `to`, or a default peer).
    InvalidMessage { shape: ShapeViolation, to: Option<NodeId> },
    /// Send padding instead of an accusation against `target`.
    WithholdAccusation { target: NodeId },
    /// Skip the answer about `target` (all targets if `None`) this round.
    WithholdReport { target: Option<NodeId> },
    /// Alter the answer about `target` (all targets if `None`) this round.
    FalsifyReport { target: Option<NodeId>, edit: ReportEdit },
}

impl DeviationKind {
    pub fn name(&self) -> &'static str {
        match self {
            DeviationKind::DropForward(_) => "DropForward",
            DeviationKind::WrongSubset { .. } => "WrongSubset",
            DeviationKind::PrematureSend { .. } => "PrematureSend",
            DeviationKind::InvalidMessage { .. } => "InvalidMessage",
            DeviationKind::WithholdAccusation { .. } => "WithholdAccusation",
            DeviationKind::WithholdReport { .. } => "WithholdReport",
            DeviationKind::FalsifyReport { .. } => "FalsifyReport",
        }
    }
}

/// A single local deviation: `node` replaces its outbox of one round, then conforms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviationPlan {
    pub node: NodeId,
    pub stage: StageIndex,
    pub round: Round,
    pub kind: DeviationKind,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("deviation plan names node {0}, which is the mediator or does not exist")]
    Node(NodeId),
    #[error("deviation plan names stage {stage}, outside 1..={stages}")]
    Stage { stage: StageIndex, stages: StageIndex },
    #[error("deviation plan names round {round}, outside 1..={rounds}")]
    Round { round: Round, rounds: Round },
    #[error("{kind} cannot be applied in round {round}")]
    RoundKind { kind: &'static str, round: Round },
    #[error("invalid deviation parameters: {0}")]
    Parameters(String),
}

/// Per-node state captured after a round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSnapshot {
    /// Nodes (possibly including itself) this node holds as Bad.
    pub bad: KeySet,
    pub miss: Vec<u32>,
    pub pend: Vec<(EventId, PayloadMeta)>,
    pub verdicts: KeySet,
}

impl NodeSnapshot {
    fn of(node: &NodeState) -> Self {
        let mut bad = KeySet::EMPTY;
        for (j, s) in node.stats().iter().enumerate() {
            if *s == Stat::Bad {
                bad = bad.insert(NodeId(j as u32));
            }
        }
        let mut miss = node.miss().to_vec();
        miss.sort_unstable();
        NodeSnapshot {
            bad,
            miss,
            pend: pend_digest(node.pend()),
            verdicts: node.verdicts(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageTrace {
    pub stage: StageIndex,
    /// Messages per round; index 0 is round 1.
    pub rounds: Vec<Vec<Envelope>>,
    /// Per round, per node, when snapshots are enabled.
    pub snapshots: Vec<Vec<NodeSnapshot>>,
    /// Per node, at the end of the stage.
    pub end: Vec<NodeSnapshot>,
    pub verdicts: KeySet,
    pub accusations: Vec<(NodeId, NodeId)>,
    pub monitored: Vec<(NodeId, u32)>,
    /// Per node, per identifier (index 0 unused): round of first valid reception.
    pub first_received: Vec<Vec<Option<Round>>>,
    /// Deviations that fired this stage.
    pub deviations: Vec<DeviationPlan>,
}

impl StageTrace {
    pub fn messages(&self) -> impl Iterator<Item = (Round, &Envelope)> {
        self.rounds
            .iter()
            .enumerate()
            .flat_map(|(i, msgs)| msgs.iter().map(move |e| (i as Round + 1, e)))
    }

    /// Total bits `node` sent in rounds satisfying `keep`.
    pub fn bits_sent_where(&self, node: NodeId, keep: impl Fn(Round) -> bool) -> u64 {
        self.messages()
            .filter(|(r, e)| e.sender == node && keep(*r))
            .map(|(_, e)| e.bits)
            .sum()
    }

    pub fn bits_sent(&self, node: NodeId) -> u64 {
        self.bits_sent_where(node, |_| true)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub cfg: SimConfig,
    pub stages: Vec<StageTrace>,
}

impl Trace {
    pub fn stage(&self, stage: StageIndex) -> &StageTrace {
        &self.stages[stage as usize - 1]
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Capture node state after every round.
    pub snapshots: bool,
}

/// A simulation advanced one stage at a time.
pub struct Simulation {
    cfg: SimConfig,
    streams: Substreams,
    nodes: Vec<NodeState>,
    mediator: MediatorState,
    stage: StageIndex,
    plans: Vec<DeviationPlan>,
    options: RunOptions,
}

impl Simulation {
    pub fn new(cfg: &SimConfig, plans: &[DeviationPlan], options: RunOptions) -> Result<Self, SimError> {
        cfg.validate()?;
        for p in plans {
            check_plan(cfg, p)?;
        }
        Ok(Simulation {
            cfg: cfg.clone(),
            streams: Substreams::new(cfg.master_seed),
            nodes: cfg.nodes().map(|i| NodeState::new(i, cfg)).collect(),
            mediator: MediatorState::new(cfg),
            stage: 0,
            plans: plans.to_vec(),
            options,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn node(&self, i: NodeId) -> &NodeState {
        &self.nodes[i.index()]
    }

    /// Genuine payload of event `id` in `stage`.
    pub fn event(&self, stage: StageIndex, id: EventId) -> Payload {
        event_payload(&self.cfg, &self.streams, stage, id)
    }

    pub fn run_stage(&mut self) -> StageTrace {
        self.stage += 1;
        let stage = self.stage;
        let cfg = self.cfg.clone();
        let n = cfg.n as usize;
        let mut rounds = Vec::with_capacity(cfg.rounds() as usize);
        let mut snapshots = Vec::new();
        let mut fired = Vec::new();
        for round in 1..=cfg.rounds() {
            let dissemination = cfg.is_dissemination(round);
            if let Some(id) = source_step(&cfg, round) {
                let payload = self.event(stage, id);
                self.nodes[0].introduce(id, payload);
            }
            let mut outboxes: Vec<Vec<Envelope>> = Vec::with_capacity(n);
            for i in 0..n {
                let out = if i == 0 && !dissemination {
                    self.mediator.emit(&cfg, stage, round, &self.streams, &self.nodes[0])
                } else {
                    self.nodes[i].emit(&cfg, round)
                };
                outboxes.push(out);
            }
            for p in self.plans.iter().filter(|p| p.stage == stage && p.round == round) {
                let i = p.node.index();
                let out = std::mem::take(&mut outboxes[i]);
                outboxes[i] = deviate(&cfg, &self.streams, stage, round, &self.nodes[i], out, &p.kind);
                fired.push(p.clone());
            }
            let mut inbox: Vec<Vec<&Envelope>> = vec![Vec::new(); n];
            for out in &outboxes {
                for e in out {
                    inbox[e.recipient.index()].push(e);
                }
            }
            if round == 1 {
                self.mediator.begin_stage(stage, &self.nodes[0]);
            }
            for i in 0..n {
                let sent: Vec<&Envelope> = outboxes[i].iter().collect();
                self.nodes[i].absorb(&cfg, stage, round, &inbox[i], &sent);
            }
            if !dissemination {
                self.mediator.absorb(&cfg, round, &inbox[0], &mut self.nodes[0]);
            }
            if round == cfg.r_mon() {
                let material = self.mediator.own_material();
                self.nodes[0].install(&cfg, &material);
            }
            if self.options.snapshots {
                snapshots.push(self.nodes.iter().map(NodeSnapshot::of).collect());
            }
            drop(inbox);
            rounds.push(outboxes.into_iter().flatten().collect());
        }
        StageTrace {
            stage,
            rounds,
            snapshots,
            end: self.nodes.iter().map(NodeSnapshot::of).collect(),
            verdicts: self.mediator.verdicts,
            accusations: self.mediator.accusations.clone(),
            monitored: self.mediator.monitored.clone(),
            first_received: self
                .nodes
                .iter()
                .map(|node| (0..=cfg.rho).map(|i| if i == 0 { None } else { node.first_received(EventId(i)) }).collect())
                .collect(),
            deviations: fired,
        }
    }
}

/// Genuine payload of event `id` in `stage`; identifiers past `live_events` are zero.
pub fn event_payload(cfg: &SimConfig, streams: &Substreams, stage: StageIndex, id: EventId) -> Payload {
    let bits = if id.0 <= cfg.live_events {
        Bits::random(cfg.payload_bits, &mut streams.rng(Label::EventPayload { stage, id }))
    } else {
        Bits::zeros(cfg.payload_bits)
    };
    Payload::plain(bits, Origin::Genuine { stage, id })
}

fn check_plan(cfg: &SimConfig, p: &DeviationPlan) -> Result<(), SimError> {
    if p.node.is_source() || p.node.0 >= cfg.n {
        return Err(SimError::Node(p.node));
    }
    if p.stage < 1 {
        return Err(SimError::Stage { stage: p.stage, stages: 0 });
    }
    if p.round < 1 || p.round > cfg.rounds() {
        return Err(SimError::Round { round: p.round, rounds: cfg.rounds() });
    }
    let kind = round_kind(cfg, p.round);
    let wrong_round = || SimError::RoundKind { kind: p.kind.name(), round: p.round };
    let in_range = |j: NodeId| j.0 < cfg.n;
    match &p.kind {
        DeviationKind::DropForward(_) | DeviationKind::PrematureSend { .. } | DeviationKind::WrongSubset { .. }
            if kind != RoundKind::Dissemination =>
        {
            Err(wrong_round())
        }
        DeviationKind::WithholdAccusation { .. } if kind != RoundKind::Accusations => Err(wrong_round()),
        DeviationKind::WithholdReport { .. } | DeviationKind::FalsifyReport { .. }
            if !matches!(kind, RoundKind::Reports { .. }) =>
        {
            Err(wrong_round())
        }
        DeviationKind::PrematureSend { id } if !cfg.age_valid(*id, p.round) || id.0 > cfg.rho => Err(
            SimError::Parameters(format!("identifier {id} cannot be sent in round {}", p.round)),
        ),
        DeviationKind::WrongSubset { replacement: Some(r), .. } => {
            let mut sorted = r.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != cfg.f as usize || sorted.iter().any(|&j| j == p.node || !in_range(j)) {
                Err(SimError::Parameters(format!(
                    "replacement subset must be {} distinct peers other than {}",
                    cfg.f, p.node
                )))
            } else {
                Ok(())
            }
        }
        DeviationKind::InvalidMessage { to: Some(j), .. } if *j == p.node || !in_range(*j) => {
            Err(SimError::Parameters(format!("cannot address node {j}")))
        }
        DeviationKind::WithholdAccusation { target } | DeviationKind::WithholdReport { target: Some(target) }
            if !in_range(*target) =>
        {
            Err(SimError::Node(*target))
        }
        _ => Ok(()),
    }
}

fn frame(cfg: &SimConfig, from: NodeId, to: NodeId, message: Message) -> Envelope {
    Envelope::new(from, to, message, cfg).expect("deviation messages are framed")
}

fn regroup(cfg: &SimConfig, from: NodeId, by_peer: BTreeMap<NodeId, Vec<Tuple>>) -> Vec<Envelope> {
    by_peer
        .into_iter()
        .filter(|(_, t)| !t.is_empty())
        .map(|(j, tuples)| frame(cfg, from, j, Message::Dissemination { tuples }))
        .collect()
}

fn by_peer(out: Vec<Envelope>) -> BTreeMap<NodeId, Vec<Tuple>> {
    let mut map: BTreeMap<NodeId, Vec<Tuple>> = BTreeMap::new();
    for e in out {
        if let Message::Dissemination { tuples } = e.message {
            map.entry(e.recipient).or_default().extend(tuples);
        }
    }
    map
}

fn put(map: &mut BTreeMap<NodeId, Vec<Tuple>>, to: NodeId, tuple: Tuple) {
    let list = map.entry(to).or_default();
    match list.iter_mut().find(|t| t.id == tuple.id) {
        Some(t) => *t = tuple,
        None => list.push(tuple),
    }
}

/// One answer to a monitoring request: the two reports and any padding.
struct ReportGroup {
    subject: NodeId,
    messages: Vec<Envelope>,
}

fn report_groups(out: Vec<Envelope>) -> Vec<ReportGroup> {
    let mut groups: Vec<ReportGroup> = Vec::new();
    for e in out {
        match &e.message {
            Message::Report { subject, direction: Direction::Received, .. } => groups.push(ReportGroup {
                subject: *subject,
                messages: vec![e],
            }),
            _ => {
                if let Some(g) = groups.last_mut() {
                    g.messages.push(e)
                }
            }
        }
    }
    groups
}

fn deviate(
    cfg: &SimConfig,
    streams: &Substreams,
    stage: StageIndex,
    round: Round,
    node: &NodeState,
    out: Vec<Envelope>,
    kind: &DeviationKind,
) -> Vec<Envelope> {
    let me = node.id;
    let med = NodeId::SOURCE;
    match kind {
        DeviationKind::DropForward(sel) => {
            let mut map = by_peer(out);
            for tuples in map.values_mut() {
                tuples.retain(|t| !sel.matches(t.id));
            }
            regroup(cfg, me, map)
        }
        DeviationKind::WrongSubset { ids, replacement } => {
            let mut map = by_peer(out);
            let moved: Vec<&crate::protocol::PendEntry> = node
                .pend()
                .iter()
                .filter(|p| ids.matches(p.id) && map.values().any(|ts| ts.iter().any(|t| t.id == p.id)))
                .collect();
            for p in moved {
                for tuples in map.values_mut() {
                    tuples.retain(|t| t.id != p.id);
                }
                let targets = match replacement {
                    Some(r) => r.clone(),
                    None => next_subset(cfg, me, node.subset(p.id)),
                };
                for j in targets {
                    put(&mut map, j, Tuple { id: p.id, payload: node.outgoing(&p.payload, j, cfg) });
                }
            }
            regroup(cfg, me, map)
        }
        DeviationKind::PrematureSend { id } => {
            let mut map = by_peer(out);
            let fake = fabricated(cfg, streams, stage, me, round);
            for &j in node.subset(*id) {
                put(&mut map, j, Tuple { id: *id, payload: node.outgoing(&fake, j, cfg) });
            }
            regroup(cfg, me, map)
        }
        DeviationKind::InvalidMessage { shape, to } => {
            let mut out = out;
            if cfg.is_dissemination(round) {
                let to = to.unwrap_or(if me.0 + 1 < cfg.n { NodeId(me.0 + 1) } else { NodeId(1) });
                let to = if to == me { med } else { to };
                let fake = fabricated(cfg, streams, stage, me, round);
                let live = EventId((round - cfg.r_mon()).clamp(1, cfg.rho));
                let tuple = |id: EventId, payload: &Payload| Tuple { id, payload: payload.clone() };
                let tuples = match shape {
                    ShapeViolation::DuplicateTuple => vec![tuple(live, &fake), tuple(live, &fake)],
                    ShapeViolation::ExpiredTuple => {
                        let stale = [EventId(1), EventId(cfg.rho)]
                            .into_iter()
                            .find(|&id| !cfg.age_valid(id, round));
                        match stale {
                            Some(id) => vec![tuple(id, &fake)],
                            None => vec![tuple(live, &fake), tuple(live, &fake)],
                        }
                    }
                    ShapeViolation::WrongSize => {
                        let long = Payload { bits: Bits::zeros(cfg.payload_bits + 1), meta: fake.meta };
                        vec![tuple(live, &long)]
                    }
                };
                out.push(frame(cfg, me, to, Message::Dissemination { tuples }));
            } else {
                let to = to.unwrap_or(med);
                out.push(frame(cfg, me, to, Message::Padding { bits: 1 }));
            }
            out
        }
        DeviationKind::WithholdAccusation { target } => out
            .into_iter()
            .map(|e| match e.message {
                Message::Accusation { target: t } if t == *target => {
                    frame(cfg, me, e.recipient, Message::Padding { bits: cfg.accusation_bits() })
                }
                _ => e,
            })
            .collect(),
        DeviationKind::WithholdReport { target } => report_groups(out)
            .into_iter()
            .filter(|g| target.is_some_and(|t| t != g.subject))
            .flat_map(|g| g.messages)
            .collect(),
        DeviationKind::FalsifyReport { target, edit } => {
            let RoundKind::Reports { seq } = round_kind(cfg, round) else {
                return out;
            };
            report_groups(out)
                .into_iter()
                .flat_map(|g| {
                    if target.is_some_and(|t| t != g.subject) {
                        return g.messages;
                    }
                    let (subject, received, sent) = match edit {
                        ReportEdit::Clear => (g.subject, Vec::new(), Vec::new()),
                        ReportEdit::SelfIncriminate => {
                            // Claims that the reporter got every identifier from itself
                            // at age 1 and passed none of them on.
                            let claims: Vec<ReportEntry> = cfg
                                .seq_events(seq)
                                .map(|id| ReportEntry { id, round: cfg.r_mon() + id.0 })
                                .collect();
                            (me, claims.clone(), claims)
                        }
                    };
                    let used = (received.len() + sent.len()) as u64 * cfg.entry_bits();
                    let mut msgs = vec![
                        frame(cfg, me, med, Message::Report { subject, direction: Direction::Received, entries: received }),
                        frame(cfg, me, med, Message::Report { subject, direction: Direction::Sent, entries: sent }),
                    ];
                    let pad = cfg.report_bits_per_request() - used;
                    if pad > 0 {
                        msgs.push(frame(cfg, me, med, Message::Padding { bits: pad }));
                    }
                    msgs
                })
                .collect()
        }
    }
}

fn fabricated(cfg: &SimConfig, streams: &Substreams, stage: StageIndex, node: NodeId, round: Round) -> Payload {
    let bits = Bits::random(cfg.payload_bits, &mut streams.rng(Label::Fabricated { stage, node, round }));
    Payload::plain(bits, Origin::Fabricated { stage, node, round })
}

/// The subset following `current` in lexicographic order, wrapping around.
pub fn next_subset(cfg: &SimConfig, node: NodeId, current: &[NodeId]) -> Vec<NodeId> {
    let universe = universe_without(cfg.n, node);
    let count = binomial(universe.len() as u64, cfg.f as u64);
    let rank = rank_subset(current, &universe).expect("forwarding subsets come from the universe");
    unrank_subset((rank + 1) % count, &universe, cfg.f as usize).expect("rank in range")
}

/// Run `stages` stages with at most one deviation.
pub fn run(cfg: &SimConfig, stages: StageIndex, plan: Option<&DeviationPlan>) -> Result<Trace, SimError> {
    let plans: Vec<DeviationPlan> = plan.into_iter().cloned().collect();
    run_with(cfg, stages, &plans, RunOptions::default())
}

/// Run `stages` stages with any number of one-shot deviations.
pub fn run_with(cfg: &SimConfig, stages: StageIndex, plans: &[DeviationPlan], options: RunOptions) -> Result<Trace, SimError> {
    if let Some(p) = plans.iter().find(|p| p.stage > stages) {
        return Err(SimError::Stage { stage: p.stage, stages });
    }
    let mut sim = Simulation::new(cfg, plans, options)?;
    let stages = (0..stages).map(|_| sim.run_stage()).collect();
    Ok(Trace { cfg: cfg.clone(), stages })
}

/// Conformant and deviating runs on the same random substreams.
pub fn paired_run(cfg: &SimConfig, stages: StageIndex, plan: &DeviationPlan) -> Result<(Trace, Trace), SimError> {
    paired_run_with_history(cfg, stages, &[], plan, RunOptions::default())
}

/// As [`paired_run`], with `history` deviations present in both runs.
pub fn paired_run_with_history(
    cfg: &SimConfig,
    stages: StageIndex,
    history: &[DeviationPlan],
    plan: &DeviationPlan,
    options: RunOptions,
) -> Result<(Trace, Trace), SimError> {
    let conform = run_with(cfg, stages, history, options)?;
    let mut plans = history.to_vec();
    plans.push(plan.clone());
    let deviate = run_with(cfg, stages, &plans, options)?;
    Ok((conform, deviate))
}

fn join<T>(items: impl Iterator<Item = T>, sep: &str, f: impl Fn(T) -> String) -> String {
    let parts: Vec<String> = items.map(f).collect();
    parts.join(sep)
}

/// Line-delimited export of a trace; see the module documentation for the format.
pub fn export_trace(trace: &Trace) -> String {
    let mut s = String::new();
    for st in &trace.stages {
        let mut count = 0u64;
        let mut bits = 0u64;
        for (round, e) in st.messages() {
            count += 1;
            bits += e.bits;
            let (ids, parity) = match &e.message {
                Message::Dissemination { tuples } => (
                    join(tuples.iter(), ";", |t| t.id.to_string()),
                    join(tuples.iter(), ";", |t| {
                        if t.payload.meta.key_parity.is_empty() {
                            "-".to_string()
                        } else {
                            join(t.payload.meta.key_parity.owners(), "+", |o| o.to_string())
                        }
                    }),
                ),
                Message::Report { entries, .. } => (join(entries.iter(), ";", |x| x.id.to_string()), String::new()),
                _ => (String::new(), String::new()),
            };
            let _ = writeln!(
                s,
                "msg,{},{},{},{},{},{},{},{}",
                st.stage,
                round,
                e.sender,
                e.recipient,
                e.message.kind(),
                e.bits,
                ids,
                parity
            );
        }
        let _ = writeln!(
            s,
            "stage,{},{},{},{},{}",
            st.stage,
            count,
            bits,
            join(st.verdicts.owners(), ";", |o| o.to_string()),
            join(st.monitored.iter(), ";", |(t, q)| format!("{t}:{q}"))
        );
    }
    s
}
