//! Reliability, punishment probability and one-deviation checks.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::config::{EventId, NodeId, SimConfig, StageIndex};
use crate::sim::{
    paired_run_with_history, DeviationKind, DeviationPlan, IdSelector, RunOptions, ShapeViolation, SimError, Simulation,
};
use crate::streams::{Label, Substreams};
use crate::subset_prng::binomial;
use crate::utility::{stage_row, to_f64};

/// Largest `n` accepted by [`reliability_exact`].
pub const MAX_EXACT_NODES: u32 = 8;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum AnalysisError {
    #[error("exact reliability supports n <= {MAX_EXACT_NODES}, got n = {0}; use reliability_mc")]
    TooManyNodes(u32),
    #[error("fanout f = {f} is not in 1..={max}")]
    Fanout { f: u32, max: u32 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Input(String),
}

/// Which nodes have received and which will forward next round, as bit masks.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartitionState {
    /// Received and forwarded already.
    pub done: u64,
    /// Received last round; forwards this round.
    pub forwarding: u64,
}

impl PartitionState {
    pub fn received(&self) -> u64 {
        self.done | self.forwarding
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reliability {
    /// Probability each node ends up with the event; index 0 is the source.
    pub per_node: Vec<BigRational>,
    /// The common value for non-source nodes.
    pub q: BigRational,
}

/// Exact probability that a node receives an event within `delta_exp` hops when
/// every holder forwards once to a uniform `f`-subset of the other nodes.
///
/// States with equal `(done, forwarding)` are merged each hop; the union of the
/// forwarders' choices is enumerated exhaustively, one forwarder at a time.
pub fn reliability_exact(n: u32, f: u32, delta_exp: u32) -> Result<Reliability, AnalysisError> {
    if n > MAX_EXACT_NODES {
        return Err(AnalysisError::TooManyNodes(n));
    }
    if f < 1 || f + 1 > n {
        return Err(AnalysisError::Fanout { f, max: n.saturating_sub(1) });
    }
    let x = binomial(n as u64 - 1, f as u64);
    let subsets: Vec<Vec<u64>> = (0..n).map(|v| subset_masks(n, f, v)).collect();
    let mut states: BTreeMap<PartitionState, BigRational> = BTreeMap::new();
    states.insert(PartitionState { done: 0, forwarding: 1 }, BigRational::one());
    for _ in 0..delta_exp {
        let mut next: BTreeMap<PartitionState, BigRational> = BTreeMap::new();
        for (state, p) in states {
            if state.forwarding == 0 {
                *next.entry(state).or_insert_with(BigRational::zero) += p;
                continue;
            }
            // Distribution of the union of all forwarders' subsets, as counts over x^k.
            let mut union: BTreeMap<u64, u128> = BTreeMap::from([(0, 1)]);
            let mut k = 0u32;
            for v in 0..n {
                if state.forwarding >> v & 1 == 0 {
                    continue;
                }
                k += 1;
                let mut grown: BTreeMap<u64, u128> = BTreeMap::new();
                for (&mask, &c) in &union {
                    for s in &subsets[v as usize] {
                        *grown.entry(mask | s).or_insert(0) += c;
                    }
                }
                union = grown;
            }
            let denom = BigInt::from(x).pow(k);
            let received = state.received();
            for (cover, c) in union {
                let fresh = cover & !received;
                let to = PartitionState { done: received, forwarding: fresh };
                let w = &p * BigRational::new(BigInt::from(c), denom.clone());
                *next.entry(to).or_insert_with(BigRational::zero) += w;
            }
        }
        states = next;
    }
    let mut per_node = vec![BigRational::zero(); n as usize];
    for (state, p) in &states {
        for (i, q) in per_node.iter_mut().enumerate() {
            if state.received() >> i & 1 == 1 {
                *q += p;
            }
        }
    }
    let q = per_node.get(1).cloned().unwrap_or_else(BigRational::one);
    Ok(Reliability { per_node, q })
}

/// Masks of every `f`-subset of the nodes other than `v`.
fn subset_masks(n: u32, f: u32, v: u32) -> Vec<u64> {
    let others: Vec<u32> = (0..n).filter(|&j| j != v).collect();
    let mut out = Vec::new();
    let mut stack: Vec<(usize, u64, u32)> = vec![(0, 0, 0)];
    while let Some((start, mask, size)) = stack.pop() {
        if size == f {
            out.push(mask);
            continue;
        }
        for (i, &j) in others.iter().enumerate().skip(start) {
            stack.push((i + 1, mask | 1 << j, size + 1));
        }
    }
    out
}

pub fn big_to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// Mean with a normal-approximation confidence half-width.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub half_width: f64,
    pub trials: u64,
}

/// Critical value of the standard normal for a two-sided level.
pub fn z_two_sided(level: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(0.5 + level / 2.0)
}

/// Sample mean and unbiased sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Reception frequency from conformant simulated stages. A trial is one event of
/// one stage; its value is the fraction of non-source nodes that received it.
pub fn reliability_mc(cfg: &SimConfig, trials: u64) -> Result<McEstimate, AnalysisError> {
    if trials < 1 {
        return Err(AnalysisError::Input("trials must be at least 1".into()));
    }
    let per_stage = cfg.live_events as u64;
    let stages = trials.div_ceil(per_stage);
    let mut sim = Simulation::new(cfg, &[], RunOptions::default())?;
    let mut values = Vec::with_capacity(trials as usize);
    let others = (cfg.n - 1) as f64;
    for _ in 0..stages {
        let st = sim.run_stage();
        for id in 1..=cfg.live_events {
            if values.len() as u64 == trials {
                break;
            }
            let got = (1..cfg.n).filter(|&i| st.first_received[i as usize][id as usize].is_some()).count();
            values.push(got as f64 / others);
        }
    }
    let (mean, sd) = mean_sd(&values);
    Ok(McEstimate {
        estimate: mean,
        half_width: z_two_sided(0.99) * sd / (values.len() as f64).sqrt(),
        trials,
    })
}

/// Probability of at least one of `k` monitored draws hitting: `1 - (1 - p)^k`.
pub fn punish_probability(k: u32, p_mon: f64) -> f64 {
    1.0 - (1.0 - p_mon).powi(k as i32)
}

/// Paired estimate of `U(conform) - U(deviate)` for one deviation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaEstimate {
    pub deviation: String,
    pub mean: f64,
    pub half_width: f64,
    pub replicates: usize,
    pub beta_over_gamma_f: f64,
    pub delta_disc: f64,
    pub rho: u32,
    pub p_mon: f64,
    /// Replicates whose utilities two stages after the deviation differed.
    pub tail_mismatches: usize,
}

impl DeltaEstimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    /// Lower confidence bound at least `-1e-6 * beta`.
    pub fn passes(&self, beta: f64) -> bool {
        self.lower() >= -1e-6 * beta
    }
}

/// A deviation together with deviations by others that set up its history.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub history: Vec<DeviationPlan>,
    pub plan: DeviationPlan,
}

/// Replicate `index` of an experiment: same parameters, independent randomness.
pub fn replicate_config(cfg: &SimConfig, index: u64) -> SimConfig {
    let mut c = cfg.clone();
    c.master_seed = Substreams::new(cfg.master_seed).derive_u64(Label::Replicate { index });
    c
}

/// Per-replicate utility difference over the deviation stage and the next one.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    pub delta: f64,
    pub tail_equal: bool,
    pub verdict_stages: Vec<StageIndex>,
}

pub fn paired_sample(cfg: &SimConfig, scenario: &Scenario) -> Result<PairedSample, AnalysisError> {
    let t = scenario.plan.stage;
    let node = scenario.plan.node;
    let (conform, deviate) = paired_run_with_history(cfg, t + 2, &scenario.history, &scenario.plan, RunOptions::default())?;
    let u = |trace: &crate::sim::Trace, s: StageIndex| stage_row(cfg, trace.stage(s), node).realized_u;
    let d_t = to_f64(u(&conform, t) - u(&deviate, t));
    let d_next = to_f64(u(&conform, t + 1) - u(&deviate, t + 1));
    Ok(PairedSample {
        delta: d_t + cfg.delta_disc * d_next,
        tail_equal: u(&conform, t + 2) == u(&deviate, t + 2),
        verdict_stages: deviate
            .stages
            .iter()
            .filter(|st| st.verdicts.contains(node))
            .map(|st| st.stage)
            .collect(),
    })
}

/// Monte-Carlo estimate of the one-deviation gain with a paired 99% t-interval.
pub fn one_deviation_delta(cfg: &SimConfig, scenario: &Scenario, replicates: usize) -> Result<DeltaEstimate, AnalysisError> {
    if replicates < 2 {
        return Err(AnalysisError::Input("at least 2 replicates are needed".into()));
    }
    let samples: Vec<PairedSample> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| paired_sample(&replicate_config(cfg, r), scenario))
        .collect::<Result<_, _>>()?;
    let deltas: Vec<f64> = samples.iter().map(|s| s.delta).collect();
    let (mean, sd) = mean_sd(&deltas);
    let t = StudentsT::new(0.0, 1.0, (replicates - 1) as f64).expect("positive degrees of freedom");
    let half_width = t.inverse_cdf(0.995) * sd / (replicates as f64).sqrt();
    let gf = to_f64(cfg.gamma()) * cfg.f as f64;
    Ok(DeltaEstimate {
        deviation: scenario.plan.kind.name().to_string(),
        mean,
        half_width,
        replicates,
        beta_over_gamma_f: if gf > 0.0 { to_f64(cfg.beta) / gf } else { f64::INFINITY },
        delta_disc: cfg.delta_disc,
        rho: cfg.rho,
        p_mon: cfg.p_mon,
        tail_mismatches: samples.iter().filter(|s| !s.tail_equal).count(),
    })
}

/// The deviation families checked by the equilibrium sweep.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DeviationClass {
    DropForward,
    WrongSubset,
    PrematureSend,
    InvalidMessage,
    WithholdReport,
    WithholdAccusation,
}

impl DeviationClass {
    pub const ALL: [DeviationClass; 6] = [
        DeviationClass::DropForward,
        DeviationClass::WrongSubset,
        DeviationClass::PrematureSend,
        DeviationClass::InvalidMessage,
        DeviationClass::WithholdReport,
        DeviationClass::WithholdAccusation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DeviationClass::DropForward => "DropForward",
            DeviationClass::WrongSubset => "WrongSubset",
            DeviationClass::PrematureSend => "PrematureSend",
            DeviationClass::InvalidMessage => "InvalidMessage",
            DeviationClass::WithholdReport => "WithholdReport",
            DeviationClass::WithholdAccusation => "WithholdAccusation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        DeviationClass::ALL
            .into_iter()
            .find(|c| c.name().to_lowercase() == key)
    }

    /// Representative scenario: node 1 deviates in stage 2. Forwarding deviations
    /// happen halfway through dissemination; report withholding in the first report
    /// round. Withholding an accusation is preceded by the target sending node 1 an
    /// invalid message in stage 1.
    pub fn scenario(self, cfg: &SimConfig) -> Scenario {
        let node = NodeId(1);
        let stage = 2;
        let mid = cfg.rho / 2;
        let mid_round = cfg.r_mon() + mid;
        let plan = |round, kind| DeviationPlan { node, stage, round, kind };
        match self {
            DeviationClass::DropForward => Scenario {
                history: vec![],
                plan: plan(mid_round, DeviationKind::DropForward(IdSelector::All)),
            },
            DeviationClass::WrongSubset => Scenario {
                history: vec![],
                plan: plan(mid_round, DeviationKind::WrongSubset { ids: IdSelector::All, replacement: None }),
            },
            DeviationClass::PrematureSend => Scenario {
                history: vec![],
                plan: plan(mid_round, DeviationKind::PrematureSend { id: EventId(mid) }),
            },
            DeviationClass::InvalidMessage => Scenario {
                history: vec![],
                plan: plan(mid_round, DeviationKind::InvalidMessage { shape: ShapeViolation::DuplicateTuple, to: None }),
            },
            DeviationClass::WithholdReport => Scenario {
                history: vec![],
                plan: plan(3, DeviationKind::WithholdReport { target: None }),
            },
            DeviationClass::WithholdAccusation => {
                let target = NodeId(2.min(cfg.n - 1));
                Scenario {
                    history: vec![DeviationPlan {
                        node: target,
                        stage: 1,
                        round: mid_round,
                        kind: DeviationKind::InvalidMessage { shape: ShapeViolation::DuplicateTuple, to: Some(node) },
                    }],
                    plan: plan(1, DeviationKind::WithholdAccusation { target }),
                }
            }
        }
    }
}

/// One row of the equilibrium sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u32,
    pub f: u32,
    pub rho: u32,
    pub delta_exp: u32,
    pub p_mon: f64,
    pub delta_disc: f64,
    pub beta_over_gamma_f: f64,
    pub deviation: String,
    pub delta_mean: f64,
    pub ci_halfwidth: f64,
    pub tail_mismatches: usize,
    pub pass: bool,
}

pub fn equilibrium_sweep(
    grid: &[SimConfig],
    kinds: &[DeviationClass],
    replicates: usize,
) -> Result<Vec<SweepRow>, AnalysisError> {
    let mut rows = Vec::new();
    for cfg in grid {
        cfg.validate().map_err(SimError::from)?;
        for &kind in kinds {
            let est = one_deviation_delta(cfg, &kind.scenario(cfg), replicates)?;
            rows.push(SweepRow {
                n: cfg.n,
                f: cfg.f,
                rho: cfg.rho,
                delta_exp: cfg.delta_exp,
                p_mon: cfg.p_mon,
                delta_disc: cfg.delta_disc,
                beta_over_gamma_f: est.beta_over_gamma_f,
                deviation: est.deviation.clone(),
                delta_mean: est.mean,
                ci_halfwidth: est.half_width,
                tail_mismatches: est.tail_mismatches,
                pass: est.passes(to_f64(cfg.beta)),
            });
        }
    }
    Ok(rows)
}

/// Measured average utility against the frictionless value `q (beta - gamma f)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub rho: u32,
    pub stages: u32,
    pub q: f64,
    pub u_bar: f64,
    pub average_utility: f64,
    pub gap: f64,
    /// Sampling half-width (99%) of the average utility.
    pub half_width: f64,
    /// Mean monitoring-round bits per node per stage.
    pub monitoring_bits: f64,
    pub monitoring_bits_max: u64,
    pub monitoring_bits_bound: f64,
}

/// `|(1 - delta) U - u_bar|` from `stages` conformant stages. With a stationary
/// stage process `(1 - delta) U` is the mean stage utility, averaged here over
/// stages and non-source nodes.
pub fn utility_gap(cfg: &SimConfig, stages: u32) -> Result<GapReport, AnalysisError> {
    let rel = reliability_exact(cfg.n, cfg.f, cfg.delta_exp)?;
    let q = big_to_f64(&rel.q);
    let u_bar = q * (to_f64(cfg.beta) - to_f64(cfg.gamma()) * cfg.f as f64);
    let mut sim = Simulation::new(cfg, &[], RunOptions::default())?;
    let r_mon = cfg.r_mon();
    let mut per_stage = Vec::with_capacity(stages as usize);
    let mut mon_total = 0u64;
    let mut mon_max = 0u64;
    for _ in 0..stages {
        let st = sim.run_stage();
        let mut sum = 0.0;
        for i in cfg.nodes().skip(1) {
            let row = stage_row(cfg, &st, i);
            sum += to_f64(row.realized_u);
            let mon = st.bits_sent_where(i, |r| r <= r_mon);
            mon_total += mon;
            mon_max = mon_max.max(mon);
        }
        per_stage.push(sum / (cfg.n - 1) as f64);
    }
    let (mean, sd) = mean_sd(&per_stage);
    Ok(GapReport {
        rho: cfg.rho,
        stages,
        q,
        u_bar,
        average_utility: mean,
        gap: (mean - u_bar).abs(),
        half_width: z_two_sided(0.99) * sd / (stages as f64).sqrt(),
        monitoring_bits: mon_total as f64 / (stages as f64 * (cfg.n - 1) as f64),
        monitoring_bits_max: mon_max,
        monitoring_bits_bound: cfg.monitoring_bits_bound(),
    })
}
