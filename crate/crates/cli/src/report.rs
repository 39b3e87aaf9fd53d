//! JSON report layouts.

use markov_sampler::{EvalReport, MarkovPolicy, Problem, SimReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemReport {
    /// `p1` (minimize age penalty) or `p2` (minimize sampling frequency).
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// `1 / nu`, the smallest admissible mean sampling interval.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub age_limit: Option<f64>,
    /// Whether `nu` was taken from the chain's clairvoyant frequency.
    pub clairvoyant: bool,
}

impl ProblemReport {
    pub fn new(problem: Problem, clairvoyant: bool) -> Self {
        match problem {
            Problem::MinAgePenalty { nu } => Self {
                kind: "p1".into(),
                nu: Some(nu),
                required_interval: Some(1.0 / nu),
                age_limit: None,
                clairvoyant,
            },
            Problem::MaxInterval { age_limit } => Self {
                kind: "p2".into(),
                nu: None,
                required_interval: None,
                age_limit: Some(age_limit),
                clairvoyant: false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    /// `dist[j][tau - 1] = P(tau | j)`.
    pub dist: Vec<Vec<f64>>,
    /// Rows with no steady-state mass, filled with `tau = M`.
    pub defaulted: Vec<bool>,
}

impl From<&MarkovPolicy> for PolicyReport {
    fn from(policy: &MarkovPolicy) -> Self {
        Self {
            dist: policy.rows().to_vec(),
            defaulted: policy.defaulted().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicReport {
    pub tau: u32,
    pub evaluation: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub n_states: usize,
    pub m_max: u32,
    pub problem: ProblemReport,
    pub nu_clairvoyant: f64,
    pub stationary: Vec<f64>,
    pub lp_objective: f64,
    pub policy: PolicyReport,
    pub evaluation: EvalReport,
    /// Null when the best periodic interval would exceed `M`.
    pub periodic_baseline: Option<PeriodicReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimReport>,
}

/// Written by `simulate` when the policy comes from a file or `--periodic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySimulationReport {
    pub n_states: usize,
    pub m_max: u32,
    pub policy: PolicyReport,
    pub evaluation: EvalReport,
    pub simulation: SimReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoReport {
    pub n_states: usize,
    pub p: Vec<Vec<f64>>,
    pub stationary: Vec<f64>,
    pub nu_clairvoyant: f64,
    pub clairvoyant_interval: f64,
    pub m_max: u32,
    /// `age_cost[j][tau - 1]`.
    pub age_cost: Vec<Vec<f64>>,
}
