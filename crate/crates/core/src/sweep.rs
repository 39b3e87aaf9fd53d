//! Parameter sweeps over two-state chains.
//!
//! Each grid point is solved independently; failures are recorded in the
//! row's `status` instead of aborting the sweep.

use serde::{Deserialize, Serialize};

use crate::cmdp::{CmdpError, Problem, SamplingModel};
use crate::dtmc::MarkovChain;
use crate::exec::Execution;
use crate::penalty::clairvoyant_frequency;

/// Frequency bound for the penalty-minimization sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NuBound {
    /// Use the chain's own clairvoyant frequency.
    Clairvoyant,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepProblem {
    /// Clairvoyant frequency only.
    Clairvoyant,
    /// Minimize age penalty for each listed frequency bound.
    MinAgePenalty(Vec<NuBound>),
    /// Minimize sampling frequency for each listed age-penalty bound.
    MaxInterval(Vec<f64>),
}

impl SweepProblem {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Clairvoyant => "clairvoyant",
            Self::MinAgePenalty(_) => "p1",
            Self::MaxInterval(_) => "p2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub problem: SweepProblem,
    pub p12: Vec<f64>,
    pub p21: Vec<f64>,
    pub m_max: u32,
}

/// One CSV row. Column order is the field order.
///
/// For `p1` the objectives are average age penalties; for `p2` they are
/// average sampling frequencies. `ratio_to_clairvoyant` is the optimal
/// policy's sampling frequency divided by the clairvoyant frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub problem: String,
    pub p12: f64,
    pub p21: f64,
    pub constraint: Option<f64>,
    pub optimal_objective: Option<f64>,
    pub periodic_objective: Option<f64>,
    pub nu_clairvoyant: Option<f64>,
    pub ratio_to_clairvoyant: Option<f64>,
    pub status: String,
}

pub const SWEEP_COLUMNS: [&str; 9] = [
    "problem",
    "p12",
    "p21",
    "constraint",
    "optimal_objective",
    "periodic_objective",
    "nu_clairvoyant",
    "ratio_to_clairvoyant",
    "status",
];

#[derive(Debug, Clone, Copy)]
enum PointConstraint {
    None,
    Nu(NuBound),
    AgeLimit(f64),
}

pub fn run_sweep(spec: &SweepSpec, exec: Execution) -> Vec<SweepRow> {
    let constraints: Vec<PointConstraint> = match &spec.problem {
        SweepProblem::Clairvoyant => vec![PointConstraint::None],
        SweepProblem::MinAgePenalty(nus) => nus.iter().copied().map(PointConstraint::Nu).collect(),
        SweepProblem::MaxInterval(ds) => {
            ds.iter().copied().map(PointConstraint::AgeLimit).collect()
        }
    };
    let points: Vec<(f64, f64, PointConstraint)> = spec
        .p12
        .iter()
        .flat_map(|&a| spec.p21.iter().map(move |&b| (a, b)))
        .flat_map(|(a, b)| constraints.iter().map(move |&c| (a, b, c)))
        .collect();
    let name = spec.problem.name();
    exec.map(&points, |&(p12, p21, constraint)| {
        sweep_point(name, p12, p21, constraint, spec.m_max)
    })
}

fn sweep_point(
    name: &str,
    p12: f64,
    p21: f64,
    constraint: PointConstraint,
    m_max: u32,
) -> SweepRow {
    let mut row = SweepRow {
        problem: name.to_owned(),
        p12,
        p21,
        constraint: None,
        optimal_objective: None,
        periodic_objective: None,
        nu_clairvoyant: None,
        ratio_to_clairvoyant: None,
        status: "ok".to_owned(),
    };
    let chain = match MarkovChain::two_state(p12, p21) {
        Ok(chain) => chain,
        Err(err) => {
            row.status = format!("invalid_chain: {err}");
            return row;
        }
    };
    let nu_dagger = clairvoyant_frequency(&chain);
    row.nu_clairvoyant = Some(nu_dagger);
    let problem = match constraint {
        PointConstraint::None => {
            row.optimal_objective = Some(nu_dagger);
            row.ratio_to_clairvoyant = Some(1.0);
            return row;
        }
        PointConstraint::Nu(NuBound::Clairvoyant) => Problem::MinAgePenalty { nu: nu_dagger },
        PointConstraint::Nu(NuBound::Value(nu)) => Problem::MinAgePenalty { nu },
        PointConstraint::AgeLimit(age_limit) => Problem::MaxInterval { age_limit },
    };
    row.constraint = Some(problem.constraint_value());
    let model = match SamplingModel::new(chain, m_max) {
        Ok(model) => model,
        Err(err) => {
            row.status = status_for(&err);
            return row;
        }
    };
    let reported = |report: &crate::cmdp::EvalReport| match problem {
        Problem::MinAgePenalty { .. } => report.avg_age_penalty,
        Problem::MaxInterval { .. } => report.avg_sampling_frequency,
    };
    match model.solve(problem) {
        Ok(solution) => {
            row.optimal_objective = Some(reported(&solution.report));
            row.ratio_to_clairvoyant = Some(solution.report.avg_sampling_frequency / nu_dagger);
        }
        Err(err) => {
            row.status = status_for(&err);
            return row;
        }
    }
    if let Ok((_, periodic)) = model.periodic_baseline(problem) {
        row.periodic_objective = Some(reported(&periodic));
    }
    row
}

fn status_for(err: &CmdpError) -> String {
    match err {
        CmdpError::Infeasible | CmdpError::InfeasibleByConstruction { .. } => "infeasible".into(),
        other => format!("error: {other}"),
    }
}
