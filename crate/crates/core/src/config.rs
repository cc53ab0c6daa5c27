//! Simulation parameters, identifiers and round arithmetic.

use std::fmt;

use num_rational::Ratio;
use thiserror::Error;

/// Exact rational used for costs, benefits and utilities.
pub type Rational = Ratio<i128>;

/// Stage-local round index, starting at 1.
pub type Round = u32;

/// Stage index, starting at 1.
pub type StageIndex = u32;

/// A participant. Node 0 is the source and the mediator.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const SOURCE: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_source(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Event identifier in `1..=rho`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub u32);

impl EventId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Sequence this identifier belongs to, `ceil(id / m)`.
    pub fn seq(self, per_seq: u32) -> u32 {
        self.0.div_ceil(per_seq)
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `ceil(log2(x))` for `x >= 1`.
pub fn log2_ceil(x: u64) -> u32 {
    assert!(x >= 1, "log2_ceil of zero");
    if x == 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// `ceil(sqrt(x))`.
pub fn sqrt_ceil(x: u32) -> u32 {
    let mut r = (x as f64).sqrt() as u32;
    while r * r < x {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= x {
        r -= 1;
    }
    r
}

/// All protocol and economic parameters of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n: u32,
    pub f: u32,
    pub rho: u32,
    /// Identifiers above this carry all-zero payloads (padding up to `rho`).
    pub live_events: u32,
    pub delta_exp: u32,
    pub n_seq: u32,
    pub per_seq: u32,
    pub p_mon: f64,
    pub alpha: Rational,
    pub beta: Rational,
    pub payload_bits: u32,
    pub delta_disc: f64,
    pub r_dis: u32,
    pub master_seed: u64,
}

pub const DEFAULT_MASTER_SEED: u64 = 0x5eed_0f_90551b;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::with_defaults(6, 2, 64, 6)
    }
}

impl SimConfig {
    /// Standard parameterization: `m = S = ceil(sqrt(rho))` with `rho` padded to
    /// `m*m`, `p* = 1/m`, `alpha = 1`, `c = 32`, `beta = 10*gamma*f`, `delta = 0.95`,
    /// `r_dis = rho + Delta`.
    pub fn with_defaults(n: u32, f: u32, rho: u32, delta_exp: u32) -> Self {
        let m = sqrt_ceil(rho.max(1));
        let padded = m * m;
        let mut cfg = SimConfig {
            n,
            f,
            rho: padded,
            live_events: rho,
            delta_exp,
            n_seq: m,
            per_seq: m,
            p_mon: 1.0 / m as f64,
            alpha: Rational::from_integer(1),
            beta: Rational::from_integer(0),
            payload_bits: 32,
            delta_disc: 0.95,
            r_dis: padded + delta_exp,
            master_seed: DEFAULT_MASTER_SEED,
        };
        cfg.beta = cfg.gamma() * Rational::from_integer(10 * f as i128);
        cfg
    }

    /// Bits needed for an event identifier, `ceil(log2 rho)`.
    pub fn id_bits(&self) -> u32 {
        log2_ceil(self.rho as u64)
    }

    /// Cost of sending one dissemination tuple, `alpha * (c + ceil(log2 rho))`.
    pub fn gamma(&self) -> Rational {
        self.alpha * Rational::from_integer(self.tuple_bits() as i128)
    }

    pub fn tuple_bits(&self) -> u64 {
        (self.id_bits() + self.payload_bits) as u64
    }

    /// One `(id, round)` report entry.
    pub fn entry_bits(&self) -> u64 {
        2 * self.id_bits() as u64
    }

    /// Fixed size of the answer to one monitoring request: `2m` entries.
    pub fn report_bits_per_request(&self) -> u64 {
        2 * self.per_seq as u64 * self.entry_bits()
    }

    pub fn node_bits(&self) -> u64 {
        log2_ceil(self.n as u64).max(1) as u64
    }

    /// One accusation slot: a node identifier plus a flag bit.
    pub fn accusation_bits(&self) -> u64 {
        self.node_bits() + 1
    }

    pub fn r_mon(&self) -> Round {
        2 * self.n_seq + 2
    }

    /// Rounds per stage.
    pub fn rounds(&self) -> Round {
        self.r_mon() + self.r_dis
    }

    pub fn is_dissemination(&self, round: Round) -> bool {
        round > self.r_mon() && round <= self.rounds()
    }

    pub fn age(&self, id: EventId, round: Round) -> i64 {
        age(id, round, self.r_mon())
    }

    pub fn age_valid(&self, id: EventId, round: Round) -> bool {
        let a = self.age(id, round);
        a >= 1 && a <= self.delta_exp as i64
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n).map(NodeId)
    }

    pub fn events(&self) -> impl Iterator<Item = EventId> {
        (1..=self.rho).map(EventId)
    }

    /// Identifiers of sequence `seq`.
    pub fn seq_events(&self, seq: u32) -> impl Iterator<Item = EventId> {
        let m = self.per_seq;
        ((seq - 1) * m + 1..=seq * m).map(EventId)
    }

    /// Expected per-event monitoring-overhead bound `n * alpha* * (1 + p* S)` in bits,
    /// with `alpha* / alpha = 4 m ceil(log2 rho)`.
    pub fn monitoring_bits_bound(&self) -> f64 {
        let alpha_star_bits = self.report_bits_per_request() as f64;
        self.n as f64 * alpha_star_bits * (1.0 + self.p_mon * self.n_seq as f64)
    }

    /// Structural checks plus finite-size warnings for the asymptotic conditions.
    pub fn validate(&self) -> Result<Vec<Warning>, ConfigError> {
        let mut v = Vec::new();
        if self.n < 2 {
            v.push(Violation::TooFewNodes(self.n));
        }
        if self.n > 64 {
            v.push(Violation::TooManyNodes(self.n));
        }
        if self.f < 1 || self.f + 1 > self.n {
            v.push(Violation::Fanout { f: self.f, n: self.n });
        }
        if self.rho < 2 {
            v.push(Violation::TooFewEvents(self.rho));
        }
        if self.n_seq * self.per_seq != self.rho {
            v.push(Violation::SequenceSplit {
                s: self.n_seq,
                m: self.per_seq,
                rho: self.rho,
            });
        }
        if self.live_events > self.rho {
            v.push(Violation::LiveEvents(self.live_events, self.rho));
        }
        if self.delta_exp < 1 {
            v.push(Violation::Expiry);
        }
        if self.r_dis < self.rho + self.delta_exp {
            v.push(Violation::ShortDissemination {
                r_dis: self.r_dis,
                need: self.rho + self.delta_exp,
            });
        }
        if !(0.0..=1.0).contains(&self.p_mon) {
            v.push(Violation::Probability(self.p_mon));
        }
        if !(0.0..1.0).contains(&self.delta_disc) {
            v.push(Violation::Discount(self.delta_disc));
        }
        if self.alpha < Rational::from_integer(0) || self.beta < Rational::from_integer(0) {
            v.push(Violation::NegativePrice);
        }
        if !v.is_empty() {
            return Err(ConfigError(v));
        }
        Ok(self.proxy_warnings())
    }

    pub fn proxy_warnings(&self) -> Vec<Warning> {
        let l = self.id_bits() as f64;
        let m = self.per_seq as f64;
        let rho = self.rho as f64;
        let p = self.p_mon;
        let mut w = Vec::new();
        let c1 = m * l / rho;
        if c1 > 0.5 {
            w.push(Warning::C1(c1));
        }
        let c2 = p * l;
        if c2 > 0.5 {
            w.push(Warning::C2(c2));
        }
        let c3 = p * rho;
        if c3 < m {
            w.push(Warning::C3(c3, m));
        }
        let c4 = (1.0 - p).powi(self.n_seq as i32);
        if !(0.1..=0.9).contains(&c4) {
            w.push(Warning::C4(c4));
        }
        w
    }
}

/// Age of `id` in stage-local `round`: `round + 1 - (id + r_mon)`.
pub fn age(id: EventId, round: Round, r_mon: Round) -> i64 {
    round as i64 + 1 - (id.0 as i64 + r_mon as i64)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    TooFewNodes(u32),
    TooManyNodes(u32),
    Fanout { f: u32, n: u32 },
    TooFewEvents(u32),
    SequenceSplit { s: u32, m: u32, rho: u32 },
    LiveEvents(u32, u32),
    Expiry,
    ShortDissemination { r_dis: u32, need: u32 },
    Probability(f64),
    Discount(f64),
    NegativePrice,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewNodes(n) => write!(f, "n = {n} but at least 2 nodes are needed"),
            Violation::TooManyNodes(n) => write!(f, "n = {n} exceeds the supported maximum of 64"),
            Violation::Fanout { f: fan, n } => {
                write!(f, "fanout f = {fan} must satisfy 1 <= f <= n-1 = {}", n.saturating_sub(1))
            }
            Violation::TooFewEvents(r) => write!(f, "rho = {r} must be at least 2"),
            Violation::SequenceSplit { s, m, rho } => {
                write!(f, "n_seq * per_seq = {s} * {m} != rho = {rho}")
            }
            Violation::LiveEvents(l, r) => write!(f, "live_events = {l} exceeds rho = {r}"),
            Violation::Expiry => write!(f, "delta_exp must be at least 1"),
            Violation::ShortDissemination { r_dis, need } => {
                write!(f, "r_dis = {r_dis} is shorter than rho + delta_exp = {need}")
            }
            Violation::Probability(p) => write!(f, "p_mon = {p} is not a probability"),
            Violation::Discount(d) => write!(f, "delta_disc = {d} must lie in [0, 1)"),
            Violation::NegativePrice => write!(f, "alpha and beta must be non-negative"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("invalid configuration: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ConfigError(pub Vec<Violation>);

/// A finite-size proxy for an asymptotic parameter condition that does not hold.
#[derive(Clone, Debug, PartialEq)]
pub enum Warning {
    /// `m * ceil(log2 rho) / rho > 0.5`
    C1(f64),
    /// `p* * ceil(log2 rho) > 0.5`
    C2(f64),
    /// `p* * rho < m`
    C3(f64, f64),
    /// `(1 - p*)^S` outside `[0.1, 0.9]`
    C4(f64),
}

impl Warning {
    pub fn code(&self) -> &'static str {
        match self {
            Warning::C1(_) => "C1",
            Warning::C2(_) => "C2",
            Warning::C3(..) => "C3",
            Warning::C4(_) => "C4",
        }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::C1(v) => write!(f, "C1: report overhead m*log(rho)/rho = {v:.4} > 0.5"),
            Warning::C2(v) => write!(f, "C2: p*·log(rho) = {v:.4} > 0.5"),
            Warning::C3(v, m) => write!(f, "C3: p*·rho = {v:.4} < m = {m}"),
            Warning::C4(v) => write!(f, "C4: (1-p*)^S = {v:.4} outside [0.1, 0.9]"),
        }
    }
}
