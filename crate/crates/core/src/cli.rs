//! Experiment runner behind the `mediated-gossip` binary.
//!
//! Configs are flat `key = value` text; `#` starts a comment. `n`, `f`, `rho` and
//! `delta_exp` pick the standard parameterization, then every other key overrides
//! it. Rationals are written `a/b` or as integers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    big_to_f64, equilibrium_sweep, reliability_exact, reliability_mc, utility_gap, AnalysisError, DeviationClass,
    MAX_EXACT_NODES,
};
use crate::config::{ConfigError, Rational, SimConfig};
use crate::sim::{export_trace, run_with, RunOptions, SimError};
use crate::utility::utility_report;

/// Environment variable consulted for the master seed when `--seed` is absent.
pub const SEED_ENV: &str = "MEDIATED_GOSSIP_SEED";

pub const KEYS: [&str; 14] = [
    "n",
    "f",
    "rho",
    "delta_exp",
    "live_events",
    "n_seq",
    "per_seq",
    "p_mon",
    "alpha",
    "beta",
    "payload_bits",
    "delta_disc",
    "r_dis",
    "master_seed",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("unknown key `{0}`; valid keys: {keys}", keys = KEYS.join(", "))]
    UnknownKey(String),
    #[error("bad value for `{key}`: `{value}`")]
    Value { key: String, value: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(SimError),
    #[error(transparent)]
    Analysis(AnalysisError),
    #[error("unknown deviation `{0}`; valid: DropForward, WrongSubset, PrematureSend, InvalidMessage, WithholdReport, WithholdAccusation")]
    Deviation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => CliError::Config(c),
            other => CliError::Sim(other),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Sim(s) => s.into(),
            other => CliError::Analysis(other),
        }
    }
}

impl CliError {
    /// 2 for configurations that violate hard constraints, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mediated-gossip", version, about = "Simulate and analyze mediator-monitored gossip")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Config file of `key = value` lines.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
    /// Master seed; falls back to $MEDIATED_GOSSIP_SEED, then the config, then the built-in default.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run conformant stages and write per-stage summaries and utilities.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        stages: u32,
        /// Also write the full message trace.
        #[arg(long)]
        trace: bool,
    },
    /// Exact reliability next to a Monte-Carlo estimate.
    Reliability {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
    /// One-deviation gain for one or all deviation kinds.
    CheckEquilibrium {
        #[command(flatten)]
        common: Common,
        /// Deviation kind; all kinds if omitted.
        #[arg(long)]
        deviation: Option<String>,
        #[arg(long, default_value_t = 200)]
        replicates: usize,
    },
    /// One-deviation gains over a grid; `--vary key=v1,v2,...` is repeatable.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "KEY=V1,V2,...")]
        vary: Vec<String>,
        #[arg(long)]
        deviation: Option<String>,
        #[arg(long, default_value_t = 200)]
        replicates: usize,
    },
    /// Average-utility gap to the frictionless value, per `rho`.
    Gap {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [16u32, 64, 256])]
        rhos: Vec<u32>,
        #[arg(long, default_value_t = 200)]
        stages: u32,
    },
}

fn parse_rational(s: &str) -> Option<Rational> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (i128, i128) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (b != 0).then(|| Rational::new(a, b))
        }
        None => s.parse::<i128>().ok().map(Rational::from_integer),
    }
}

/// Parse `key = value` lines into ordered pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(CliError::Syntax { line: i + 1 })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Build a config from pairs; later pairs win.
pub fn build_config(pairs: &[(String, String)]) -> Result<SimConfig, CliError> {
    for (k, _) in pairs {
        if !KEYS.contains(&k.as_str()) {
            return Err(CliError::UnknownKey(k.clone()));
        }
    }
    let last = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let bad = |key: &str, value: &str| CliError::Value { key: key.into(), value: value.into() };
    let int = |key: &str, default: u32| -> Result<u32, CliError> {
        last(key).map_or(Ok(default), |v| v.parse().map_err(|_| bad(key, v)))
    };
    let mut cfg = SimConfig::with_defaults(int("n", 6)?, int("f", 2)?, int("rho", 64)?, int("delta_exp", 6)?);
    let explicit_r_dis = last("r_dis").is_some();
    for (k, v) in pairs {
        let u32v = || v.parse::<u32>().map_err(|_| bad(k, v));
        let f64v = || v.parse::<f64>().map_err(|_| bad(k, v));
        match k.as_str() {
            "n" | "f" | "rho" | "delta_exp" => {}
            "live_events" => cfg.live_events = u32v()?,
            "n_seq" => cfg.n_seq = u32v()?,
            "per_seq" => cfg.per_seq = u32v()?,
            "p_mon" => cfg.p_mon = f64v()?,
            "alpha" => cfg.alpha = parse_rational(v).ok_or_else(|| bad(k, v))?,
            "beta" => cfg.beta = parse_rational(v).ok_or_else(|| bad(k, v))?,
            "payload_bits" => cfg.payload_bits = u32v()?,
            "delta_disc" => cfg.delta_disc = f64v()?,
            "r_dis" => cfg.r_dis = u32v()?,
            "master_seed" => cfg.master_seed = v.parse().map_err(|_| bad(k, v))?,
            _ => unreachable!("keys checked above"),
        }
    }
    if !explicit_r_dis {
        cfg.r_dis = cfg.rho + cfg.delta_exp;
    }
    Ok(cfg)
}

/// The config written as `key = value` lines, in [`KEYS`] order.
pub fn render_config(cfg: &SimConfig) -> String {
    let values = [
        cfg.n.to_string(),
        cfg.f.to_string(),
        cfg.rho.to_string(),
        cfg.delta_exp.to_string(),
        cfg.live_events.to_string(),
        cfg.n_seq.to_string(),
        cfg.per_seq.to_string(),
        cfg.p_mon.to_string(),
        cfg.alpha.to_string(),
        cfg.beta.to_string(),
        cfg.payload_bits.to_string(),
        cfg.delta_disc.to_string(),
        cfg.r_dis.to_string(),
        cfg.master_seed.to_string(),
    ];
    KEYS.iter().zip(values).fold(String::new(), |mut s, (k, v)| {
        let _ = writeln!(s, "{k} = {v}");
        s
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn write(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|source| CliError::Io { path: path.into(), source })
}

/// Pairs from the config file and `--set`, with the seed resolved as flag, then
/// `env_seed`, then whatever the config says.
pub fn resolve_pairs(common: &Common, env_seed: Option<String>) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = match &common.config {
        Some(p) => parse_pairs(&read(p)?)?,
        None => Vec::new(),
    };
    for o in &common.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| CliError::Value { key: "--set".into(), value: o.clone() })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(s) = common.seed {
        pairs.push(("master_seed".into(), s.to_string()));
    } else if let Some(s) = env_seed {
        pairs.push(("master_seed".into(), s));
    }
    Ok(pairs)
}

fn csv_of<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn deviations(name: &Option<String>) -> Result<Vec<DeviationClass>, CliError> {
    match name {
        None => Ok(DeviationClass::ALL.to_vec()),
        Some(s) => DeviationClass::parse(s).map(|c| vec![c]).ok_or_else(|| CliError::Deviation(s.clone())),
    }
}

#[derive(Serialize)]
struct StageSummary {
    stage: u32,
    messages: usize,
    bits: u64,
    verdicts: String,
    monitored: usize,
}

#[derive(Serialize)]
struct ReliabilityRow {
    n: u32,
    f: u32,
    delta_exp: u32,
    q_exact: String,
    q_exact_decimal: String,
    mc_estimate: f64,
    mc_half_width: f64,
    trials: u64,
    agree: String,
}

/// What a run wrote: `(file name, contents)` in write order. The first entry is
/// the table echoed to stdout.
pub type Outputs = Vec<(String, String)>;

/// Run one parsed command. `env_seed` is the value of [`SEED_ENV`], if set.
pub fn execute(cli: &Cli, env_seed: Option<String>, warn: &mut dyn FnMut(String)) -> Result<(PathBuf, Outputs), CliError> {
    let common = match &cli.command {
        Command::Simulate { common, .. }
        | Command::Reliability { common, .. }
        | Command::CheckEquilibrium { common, .. }
        | Command::Sweep { common, .. }
        | Command::Gap { common, .. } => common,
    };
    let pairs = resolve_pairs(common, env_seed)?;
    let cfg = build_config(&pairs)?;
    for w in cfg.validate()? {
        warn(format!("warning: {w}"));
    }
    let mut outputs: Outputs = Vec::new();
    match &cli.command {
        Command::Simulate { stages, trace, .. } => {
            let t = run_with(&cfg, *stages, &[], RunOptions::default())?;
            let summary: Vec<StageSummary> = t
                .stages
                .iter()
                .map(|st| StageSummary {
                    stage: st.stage,
                    messages: st.messages().count(),
                    bits: st.messages().map(|(_, e)| e.bits).sum(),
                    verdicts: st.verdicts.owners().map(|o| o.to_string()).collect::<Vec<_>>().join(";"),
                    monitored: st.monitored.len(),
                })
                .collect();
            outputs.push(("summary.csv".into(), csv_of(&summary)?));
            outputs.push(("utility.csv".into(), csv_of(&utility_report(&t))?));
            if *trace {
                outputs.push(("trace.txt".into(), export_trace(&t)));
            }
        }
        Command::Reliability { trials, .. } => {
            if cfg.n > MAX_EXACT_NODES {
                warn(format!("note: exact reliability needs n <= {MAX_EXACT_NODES}; reporting the estimate only"));
            }
            let exact = reliability_exact(cfg.n, cfg.f, cfg.delta_exp).ok();
            let mc = reliability_mc(&cfg, *trials)?;
            let (q, dec, agree) = match &exact {
                Some(r) => {
                    let q = big_to_f64(&r.q);
                    (r.q.to_string(), format!("{q:.6}"), ((mc.estimate - q).abs() <= 3.0 * mc.half_width).to_string())
                }
                None => (String::new(), String::new(), String::new()),
            };
            let row = ReliabilityRow {
                n: cfg.n,
                f: cfg.f,
                delta_exp: cfg.delta_exp,
                q_exact: q,
                q_exact_decimal: dec,
                mc_estimate: mc.estimate,
                mc_half_width: mc.half_width,
                trials: mc.trials,
                agree,
            };
            outputs.push(("reliability.csv".into(), csv_of(&[row])?));
        }
        Command::CheckEquilibrium { deviation, replicates, .. } => {
            let rows = equilibrium_sweep(std::slice::from_ref(&cfg), &deviations(deviation)?, *replicates)?;
            outputs.push(("equilibrium.csv".into(), csv_of(&rows)?));
        }
        Command::Sweep { vary, deviation, replicates, .. } => {
            let mut grid = vec![pairs.clone()];
            for v in vary {
                let (k, values) = v.split_once('=').ok_or_else(|| CliError::Value { key: "--vary".into(), value: v.clone() })?;
                grid = grid
                    .into_iter()
                    .flat_map(|base| {
                        values.split(',').map(move |x| {
                            let mut p = base.clone();
                            p.push((k.trim().to_string(), x.trim().to_string()));
                            p
                        })
                    })
                    .collect();
            }
            let cfgs: Vec<SimConfig> = grid.iter().map(|p| build_config(p)).collect::<Result<_, _>>()?;
            let rows = equilibrium_sweep(&cfgs, &deviations(deviation)?, *replicates)?;
            outputs.push(("sweep.csv".into(), csv_of(&rows)?));
        }
        Command::Gap { rhos, stages, .. } => {
            let mut rows = Vec::new();
            for &rho in rhos {
                let mut p = pairs.clone();
                p.push(("rho".into(), rho.to_string()));
                // Let the sequence split follow rho unless it was set explicitly.
                p.retain(|(k, _)| k != "n_seq" && k != "per_seq" && k != "live_events");
                let c = build_config(&p)?;
                c.validate()?;
                rows.push(utility_gap(&c, *stages)?);
            }
            outputs.push(("gap.csv".into(), csv_of(&rows)?));
        }
    }
    fs::create_dir_all(&common.out).map_err(|source| CliError::Io { path: common.out.clone(), source })?;
    write(&common.out.join("config.resolved.txt"), &render_config(&cfg))?;
    for (name, body) in &outputs {
        write(&common.out.join(name), body)?;
    }
    Ok((common.out.clone(), outputs))
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    match execute(&cli, env_seed, &mut |w| eprintln!("{w}")) {
        Ok((_, outputs)) => {
            if let Some((_, table)) = outputs.first() {
                print!("{table}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
