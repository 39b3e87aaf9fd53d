use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

pub const DEFAULT_M_MAX: u32 = 32;

#[derive(Debug, Parser)]
#[command(
    name = "markov-sampler",
    version,
    about = "Optimal sampling policies for detecting Markov chain state transitions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary distribution, clairvoyant frequency and age-penalty costs of a chain.
    Info(InfoArgs),
    /// Solve for an optimal sampling policy and write a JSON report.
    Solve(SolveArgs),
    /// Simulate a policy and append empirical averages to a JSON report.
    Simulate(SimulateArgs),
    /// Solve a grid of two-state chains and write CSV.
    Sweep(SweepArgs),
}

/// At most one of these may be given.
#[derive(Debug, Clone, Default, Args)]
#[group(multiple = false)]
pub struct ConstraintArgs {
    /// Upper bound on the average sampling frequency (minimize age penalty).
    #[arg(long)]
    pub nu: Option<f64>,
    /// Use the chain's clairvoyant sampling frequency as the frequency bound.
    #[arg(long)]
    pub clairvoyant: bool,
    /// Upper bound on the average age penalty in slots (minimize sampling frequency).
    #[arg(long = "age-limit")]
    pub age_limit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemChoice {
    Nu(f64),
    Clairvoyant,
    AgeLimit(f64),
}

impl ConstraintArgs {
    pub fn choice(&self) -> Option<ProblemChoice> {
        if self.clairvoyant {
            Some(ProblemChoice::Clairvoyant)
        } else if let Some(nu) = self.nu {
            Some(ProblemChoice::Nu(nu))
        } else {
            self.age_limit.map(ProblemChoice::AgeLimit)
        }
    }
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long = "m-max", default_value_t = DEFAULT_M_MAX)]
    pub m_max: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long = "m-max", default_value_t = DEFAULT_M_MAX)]
    pub m_max: u32,
    #[command(flatten)]
    pub constraint: ConstraintArgs,
    /// Report the simplex vertex instead of the center of the optimal face.
    #[arg(long)]
    pub vertex: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long = "m-max", default_value_t = DEFAULT_M_MAX)]
    pub m_max: u32,
    /// Solve first, then simulate the optimal policy.
    #[command(flatten)]
    pub constraint: ConstraintArgs,
    /// Policy file `{"dist": [[...]]}`.
    #[arg(long, conflicts_with_all = ["report", "periodic"])]
    pub policy: Option<PathBuf>,
    /// A report written by `solve`; the simulation is appended to it.
    #[arg(long, conflicts_with = "periodic")]
    pub report: Option<PathBuf>,
    /// Constant sampling interval in slots.
    #[arg(long)]
    pub periodic: Option<u32>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "burn-in", default_value_t = markov_sampler::sim::DEFAULT_BURN_IN)]
    pub burn_in: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Clairvoyant frequency only.
    Clairvoyant,
    /// Minimize age penalty under a frequency bound.
    P1,
    /// Minimize sampling frequency under an age-penalty bound.
    P2,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub problem: SweepKind,
    /// Comma-separated values or an inclusive range `start:end:step`.
    #[arg(long)]
    pub p12: String,
    #[arg(long)]
    pub p21: String,
    /// Frequency bounds for `p1` (list or range).
    #[arg(long, conflicts_with = "clairvoyant")]
    pub nu: Option<String>,
    /// Use each chain's clairvoyant frequency as the `p1` bound.
    #[arg(long)]
    pub clairvoyant: bool,
    /// Age-penalty bounds for `p2` (list or range).
    #[arg(long = "age-limit")]
    pub age_limit: Option<String>,
    #[arg(long = "m-max", default_value_t = DEFAULT_M_MAX)]
    pub m_max: u32,
    /// Worker threads for grid points (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Solve grid points one at a time.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Validated settings shared by `solve` and `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub chain_path: PathBuf,
    pub m_max: u32,
    pub problem: Option<ProblemChoice>,
    pub output_path: Option<PathBuf>,
    pub seed: u64,
    pub k_samples: u64,
}

impl RunConfig {
    pub fn validate(self) -> Result<Self, CliError> {
        if self.m_max < 1 {
            return Err(CliError::InvalidInput("--m-max must be at least 1".into()));
        }
        if self.k_samples < 1 {
            return Err(CliError::InvalidInput(
                "--samples must be at least 1".into(),
            ));
        }
        match self.problem {
            Some(ProblemChoice::Nu(nu)) if !(nu.is_finite() && nu > 0.0 && nu <= 1.0) => Err(
                CliError::InvalidInput(format!("--nu must be in (0, 1], got {nu}")),
            ),
            Some(ProblemChoice::AgeLimit(d)) if !(d.is_finite() && d >= 0.0) => Err(
                CliError::InvalidInput(format!("--age-limit must be nonnegative, got {d}")),
            ),
            _ => Ok(self),
        }
    }
}

/// Parses `0.1,0.5,0.9` or the inclusive range `0.1:0.9:0.1`.
pub fn parse_values(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |detail: String| CliError::InvalidInput(format!("--{flag}: {detail}"));
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("`{s}` is not a number")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, end, step] => {
            let (start, end, step) = (number(start)?, number(end)?, number(step)?);
            if !(step > 0.0) || end < start {
                return Err(bad("range needs start <= end and a positive step".into()));
            }
            let count = ((end - start) / step + 1e-9).floor() as u64;
            if count > 1_000_000 {
                return Err(bad("range has too many points".into()));
            }
            // Rounded so that 0.1:0.9:0.1 yields 0.3 rather than 0.30000000000000004.
            Ok((0..=count)
                .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                .collect())
        }
        [_] => text.split(',').map(number).collect(),
        _ => Err(bad(format!("cannot parse `{text}`"))),
    }
}
