//! Occupation-measure LPs for the two sampling problems, policy extraction,
//! and analytic policy evaluation through the induced chain of observed
//! states.
//!
//! Decision variables are `z[j][tau]`, the steady-state probability of
//! observing state `j` and then waiting `tau` slots before the next sample.
//! Flattened LP index: `j * M + (tau - 1)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtmc::{check_ergodic, solve_stationary, ChainError, ErgodicityFailure, MarkovChain};
use crate::lpsolver::{
    self, LinearProgram, LpError, LpSolution, LpStatus, Relation, SimplexOptions,
};
use crate::penalty::CostTable;

/// Rows of a policy must sum to one within this tolerance.
pub const POLICY_ROW_TOLERANCE: f64 = 1e-9;
/// Occupation mass below which a state's policy row is filled by default.
pub const DEFAULT_ZERO_MASS: f64 = 1e-9;
/// Allowed gap between the LP objective and the re-evaluated policy.
pub const OBJECTIVE_MISMATCH_TOLERANCE: f64 = 1e-5;

// Slack used when turning constraint values into integer periods.
const PERIOD_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmdpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible: required mean interval {required_interval:.6} exceeds M = {m_max}")]
    InfeasibleByConstruction { required_interval: f64, m_max: u32 },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("policy induces a non-ergodic chain of observed states: {0}")]
    InducedNotErgodic(ErgodicityFailure),
    #[error("induced chain: {0}")]
    InducedChain(ChainError),
    #[error("periodic interval {tau} exceeds M = {m_max}")]
    PeriodExceedsM { tau: u64, m_max: u32 },
    #[error("LP objective {lp} disagrees with policy evaluation {evaluated}")]
    ObjectiveMismatch { lp: f64, evaluated: f64 },
    #[error("policy shape mismatch: {0}")]
    PolicyShape(String),
}

/// Which constrained problem to solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    /// Minimize average age penalty with average sampling frequency at most `nu`.
    MinAgePenalty { nu: f64 },
    /// Maximize average sampling interval with average age penalty at most `age_limit`.
    MaxInterval { age_limit: f64 },
}

impl Problem {
    pub fn validate(self) -> Result<Self, CmdpError> {
        match self {
            Self::MinAgePenalty { nu } if !(nu.is_finite() && nu > 0.0 && nu <= 1.0) => Err(
                CmdpError::InvalidParameter(format!("frequency bound must be in (0, 1], got {nu}")),
            ),
            Self::MaxInterval { age_limit } if !(age_limit.is_finite() && age_limit >= 0.0) => {
                Err(CmdpError::InvalidParameter(format!(
                    "age penalty bound must be finite and nonnegative, got {age_limit}"
                )))
            }
            ok => Ok(ok),
        }
    }

    pub fn constraint_value(self) -> f64 {
        match self {
            Self::MinAgePenalty { nu } => nu,
            Self::MaxInterval { age_limit } => age_limit,
        }
    }

    /// The quantity the problem optimizes, read off an evaluation.
    pub fn objective_of(self, report: &EvalReport) -> f64 {
        match self {
            Self::MinAgePenalty { .. } => report.avg_age_penalty,
            Self::MaxInterval { .. } => report.avg_sampling_interval,
        }
    }

    /// Whether `report` meets the problem's constraint within `tol`.
    pub fn is_satisfied_by(self, report: &EvalReport, tol: f64) -> bool {
        match self {
            Self::MinAgePenalty { nu } => report.avg_sampling_interval >= 1.0 / nu - tol,
            Self::MaxInterval { age_limit } => report.avg_age_penalty <= age_limit + tol,
        }
    }

    /// True when objective `a` is strictly better than `b` by more than `tol`.
    pub fn improves(self, a: f64, b: f64, tol: f64) -> bool {
        match self {
            Self::MinAgePenalty { .. } => a < b - tol,
            Self::MaxInterval { .. } => a > b + tol,
        }
    }
}

/// `q[tau - 1] = P^tau`, the observed-state kernel for each interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    steps: Vec<DMatrix<f64>>,
}

impl Kernel {
    pub fn new(chain: &MarkovChain, m_max: u32) -> Self {
        let p = chain.transition_matrix();
        let mut steps = Vec::with_capacity(m_max as usize);
        let mut current = p.clone();
        for _ in 0..m_max {
            let next = &current * p;
            steps.push(std::mem::replace(&mut current, next));
        }
        Self { steps }
    }

    pub fn m_max(&self) -> u32 {
        self.steps.len() as u32
    }

    /// `P(X_{G+tau} = to | X_G = from)`.
    pub fn prob(&self, from: usize, tau: u32, to: usize) -> f64 {
        self.steps[(tau - 1) as usize][(from, to)]
    }

    pub fn step(&self, tau: u32) -> &DMatrix<f64> {
        &self.steps[(tau - 1) as usize]
    }
}

/// Steady-state probabilities of observed state / interval pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationMeasure {
    pub z: Vec<Vec<f64>>,
}

impl OccupationMeasure {
    pub fn from_flat(x: &[f64], n_states: usize, m_max: u32) -> Self {
        let m = m_max as usize;
        assert_eq!(
            x.len(),
            n_states * m,
            "flat occupation vector has wrong length"
        );
        Self {
            z: x.chunks(m).map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.z.iter().flatten().copied().collect()
    }

    pub fn state_mass(&self, state: usize) -> f64 {
        self.z[state].iter().sum()
    }
}

/// Randomized stationary policy: `dist[j][tau - 1] = P(tau | observed j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovPolicy {
    dist: Vec<Vec<f64>>,
    defaulted: Vec<bool>,
}

impl MarkovPolicy {
    pub fn from_rows(dist: Vec<Vec<f64>>) -> Result<Self, CmdpError> {
        let n = dist.len();
        let m = dist.first().map_or(0, Vec::len);
        if n == 0 || m == 0 {
            return Err(CmdpError::PolicyShape(
                "policy has no rows or no intervals".into(),
            ));
        }
        for (j, row) in dist.iter().enumerate() {
            if row.len() != m {
                return Err(CmdpError::PolicyShape(format!(
                    "row {j} has {} entries, expected {m}",
                    row.len()
                )));
            }
            if row
                .iter()
                .any(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
            {
                return Err(CmdpError::PolicyShape(format!(
                    "row {j} has entries outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > POLICY_ROW_TOLERANCE {
                return Err(CmdpError::PolicyShape(format!("row {j} sums to {sum}")));
            }
        }
        Ok(Self {
            defaulted: vec![false; n],
            dist,
        })
    }

    /// Always waits `tau` slots.
    pub fn periodic(n_states: usize, m_max: u32, tau: u32) -> Self {
        Self::deterministic(&vec![tau; n_states], m_max)
    }

    /// Waits `intervals[j]` slots after observing state `j`.
    pub fn deterministic(intervals: &[u32], m_max: u32) -> Self {
        let dist = intervals
            .iter()
            .map(|&tau| {
                assert!(
                    (1..=m_max).contains(&tau),
                    "interval {tau} outside 1..={m_max}"
                );
                let mut row = vec![0.0; m_max as usize];
                row[(tau - 1) as usize] = 1.0;
                row
            })
            .collect();
        Self {
            defaulted: vec![false; intervals.len()],
            dist,
        }
    }

    pub fn n_states(&self) -> usize {
        self.dist.len()
    }

    pub fn m_max(&self) -> u32 {
        self.dist[0].len() as u32
    }

    pub fn prob(&self, state: usize, tau: u32) -> f64 {
        self.dist[state][(tau - 1) as usize]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.dist[state]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.dist
    }

    /// Rows that carried no occupation mass and were set by the default rule.
    pub fn defaulted(&self) -> &[bool] {
        &self.defaulted
    }

    pub fn any_defaulted(&self) -> bool {
        self.defaulted.iter().any(|&d| d)
    }

    /// The interval chosen in each state, if the policy is deterministic.
    pub fn as_deterministic(&self) -> Option<Vec<u32>> {
        self.dist
            .iter()
            .map(|row| row.iter().position(|&p| p == 1.0).map(|k| k as u32 + 1))
            .collect()
    }
}

/// Normalizes each state's occupation row into `P(tau | j)`. States with
/// mass below `zero_mass` get all probability on `tau = M` and are flagged.
pub fn extract_policy(z: &OccupationMeasure, zero_mass: f64) -> MarkovPolicy {
    let m = z.z.first().map_or(0, Vec::len);
    let mut defaulted = Vec::with_capacity(z.z.len());
    let dist =
        z.z.iter()
            .map(|row| {
                let mass: f64 = row.iter().map(|v| v.max(0.0)).sum();
                if mass > zero_mass {
                    defaulted.push(false);
                    row.iter().map(|v| v.max(0.0) / mass).collect()
                } else {
                    defaulted.push(true);
                    let mut r = vec![0.0; m];
                    r[m - 1] = 1.0;
                    r
                }
            })
            .collect();
    MarkovPolicy { dist, defaulted }
}

/// Long-run averages of a Markov policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Slots.
    pub avg_age_penalty: f64,
    /// Slots.
    pub avg_sampling_interval: f64,
    /// Samples per slot, `1 / avg_sampling_interval`.
    pub avg_sampling_frequency: f64,
    /// Stationary distribution of the observed-state chain.
    pub induced_stationary: Vec<f64>,
}

/// Result of solving one of the two problems.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub problem: Problem,
    pub policy: MarkovPolicy,
    pub report: EvalReport,
    /// LP objective at `occupation`.
    pub lp_objective: f64,
    pub occupation: OccupationMeasure,
    /// Raw simplex result (a vertex of the optimal face).
    pub lp: LpSolution,
}

/// Optimal periodic interval under a frequency bound: `ceil(1 / nu)`.
pub fn optimal_periodic_p1(nu: f64, m_max: u32) -> Result<u32, CmdpError> {
    Problem::MinAgePenalty { nu }.validate()?;
    let tau = (1.0 / nu - PERIOD_SLACK).ceil().max(1.0);
    bounded_period(tau, m_max)
}

/// Optimal periodic interval under an age bound: `floor(d) + 1`.
pub fn optimal_periodic_p2(age_limit: f64, m_max: u32) -> Result<u32, CmdpError> {
    Problem::MaxInterval { age_limit }.validate()?;
    let tau = (age_limit + PERIOD_SLACK).floor() + 1.0;
    bounded_period(tau, m_max)
}

fn bounded_period(tau: f64, m_max: u32) -> Result<u32, CmdpError> {
    if tau > f64::from(m_max) {
        return Err(CmdpError::PeriodExceedsM {
            tau: if tau >= u64::MAX as f64 {
                u64::MAX
            } else {
                tau as u64
            },
            m_max,
        });
    }
    Ok(tau as u32)
}

/// A source chain together with everything the LPs need for a fixed `M`.
#[derive(Debug, Clone)]
pub struct SamplingModel {
    chain: MarkovChain,
    kernel: Kernel,
    costs: CostTable,
    zero_mass: f64,
    central: bool,
}

impl SamplingModel {
    pub fn new(chain: MarkovChain, m_max: u32) -> Result<Self, CmdpError> {
        if m_max == 0 {
            return Err(CmdpError::InvalidParameter(
                "maximum sampling interval M must be at least 1".into(),
            ));
        }
        let kernel = Kernel::new(&chain, m_max);
        let costs = CostTable::new(&chain, m_max);
        Ok(Self {
            chain,
            kernel,
            costs,
            zero_mass: DEFAULT_ZERO_MASS,
            central: true,
        })
    }

    pub fn with_zero_mass_threshold(mut self, zero_mass: f64) -> Self {
        self.zero_mass = zero_mass;
        self
    }

    /// Report the simplex vertex instead of the center of the optimal face
    /// when the LP has several optima.
    pub fn with_vertex_solutions(mut self) -> Self {
        self.central = false;
        self
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn costs(&self) -> &CostTable {
        &self.costs
    }

    pub fn n_states(&self) -> usize {
        self.chain.n_states()
    }

    pub fn m_max(&self) -> u32 {
        self.kernel.m_max()
    }

    pub fn n_vars(&self) -> usize {
        self.n_states() * self.m_max() as usize
    }

    pub fn var_index(&self, state: usize, tau: u32) -> usize {
        state * self.m_max() as usize + (tau - 1) as usize
    }

    fn per_var(&self, f: impl Fn(usize, u32) -> f64) -> Vec<f64> {
        (0..self.n_states())
            .flat_map(|j| (1..=self.m_max()).map(move |tau| (j, tau)))
            .map(|(j, tau)| f(j, tau))
            .collect()
    }

    /// Normalization and balance equalities shared by both problems.
    fn with_occupation_constraints(&self, mut lp: LinearProgram) -> LinearProgram {
        lp = lp.equality(vec![1.0; self.n_vars()], 1.0);
        for i in 0..self.n_states() {
            let balance = self.per_var(|j, tau| {
                let outflow = if j == i { 1.0 } else { 0.0 };
                outflow - self.kernel.prob(j, tau, i)
            });
            lp = lp.equality(balance, 0.0);
        }
        lp
    }

    /// Minimize expected age penalty subject to mean interval `>= 1 / nu`.
    pub fn build_p1(&self, nu: f64) -> Result<LinearProgram, CmdpError> {
        Problem::MinAgePenalty { nu }.validate()?;
        let required_interval = 1.0 / nu;
        let m_max = self.m_max();
        if required_interval > f64::from(m_max) * (1.0 + PERIOD_SLACK) {
            return Err(CmdpError::InfeasibleByConstruction {
                required_interval,
                m_max,
            });
        }
        let lp = LinearProgram::minimize(self.per_var(|j, tau| self.costs.get(j, tau))).inequality(
            self.per_var(|_, tau| f64::from(tau)),
            Relation::GreaterEq,
            required_interval,
        );
        Ok(self.with_occupation_constraints(lp))
    }

    /// Maximize mean interval subject to expected age penalty `<= age_limit`.
    pub fn build_p2(&self, age_limit: f64) -> Result<LinearProgram, CmdpError> {
        Problem::MaxInterval { age_limit }.validate()?;
        let lp = LinearProgram::maximize(self.per_var(|_, tau| f64::from(tau))).inequality(
            self.per_var(|j, tau| self.costs.get(j, tau)),
            Relation::LessEq,
            age_limit,
        );
        Ok(self.with_occupation_constraints(lp))
    }

    pub fn build(&self, problem: Problem) -> Result<LinearProgram, CmdpError> {
        match problem {
            Problem::MinAgePenalty { nu } => self.build_p1(nu),
            Problem::MaxInterval { age_limit } => self.build_p2(age_limit),
        }
    }

    fn check_policy(&self, policy: &MarkovPolicy) -> Result<(), CmdpError> {
        if policy.n_states() != self.n_states() || policy.m_max() != self.m_max() {
            return Err(CmdpError::PolicyShape(format!(
                "policy is {}x{}, model is {}x{}",
                policy.n_states(),
                policy.m_max(),
                self.n_states(),
                self.m_max()
            )));
        }
        Ok(())
    }

    /// `P(next observed = i | observed j) = sum_tau P(tau | j) [P^tau]_{ji}`.
    pub fn induced_chain(&self, policy: &MarkovPolicy) -> Result<DMatrix<f64>, CmdpError> {
        self.check_policy(policy)?;
        let n = self.n_states();
        let mut induced = DMatrix::zeros(n, n);
        for j in 0..n {
            for tau in 1..=self.m_max() {
                let w = policy.prob(j, tau);
                if w == 0.0 {
                    continue;
                }
                let step = self.kernel.step(tau);
                for i in 0..n {
                    induced[(j, i)] += w * step[(j, i)];
                }
            }
        }
        Ok(induced)
    }

    /// Occupation measure `z[j][tau] = zeta_j P(tau | j)` with `zeta` the
    /// stationary distribution of the induced chain.
    pub fn occupation_measure(
        &self,
        policy: &MarkovPolicy,
    ) -> Result<OccupationMeasure, CmdpError> {
        let induced = self.induced_chain(policy)?;
        check_ergodic(&induced).map_err(CmdpError::InducedNotErgodic)?;
        let zeta = solve_stationary(&induced).map_err(CmdpError::InducedChain)?;
        let z = (0..self.n_states())
            .map(|j| policy.row(j).iter().map(|p| zeta[j] * p).collect())
            .collect();
        Ok(OccupationMeasure { z })
    }

    pub fn evaluate_policy(&self, policy: &MarkovPolicy) -> Result<EvalReport, CmdpError> {
        let occupation = self.occupation_measure(policy)?;
        Ok(self.report_for(&occupation))
    }

    fn report_for(&self, occupation: &OccupationMeasure) -> EvalReport {
        let mut penalty = 0.0;
        let mut interval = 0.0;
        for (j, row) in occupation.z.iter().enumerate() {
            for (k, &mass) in row.iter().enumerate() {
                let tau = k as u32 + 1;
                penalty += self.costs.get(j, tau) * mass;
                interval += f64::from(tau) * mass;
            }
        }
        EvalReport {
            avg_age_penalty: penalty,
            avg_sampling_interval: interval,
            avg_sampling_frequency: 1.0 / interval,
            induced_stationary: (0..self.n_states())
                .map(|j| occupation.state_mass(j))
                .collect(),
        }
    }

    /// Builds and solves the LP, extracts the policy and re-evaluates it.
    pub fn solve(&self, problem: Problem) -> Result<Solution, CmdpError> {
        let lp = self.build(problem)?;
        let solution = lpsolver::solve(&lp)?;
        match solution.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(CmdpError::Infeasible),
            LpStatus::Unbounded => return Err(CmdpError::Unbounded),
        }
        let x = if self.central {
            lpsolver::central_optimum(&lp, &solution, &SimplexOptions::default())?
        } else {
            solution.x.clone()
        };
        let lp_objective = lp.objective_at(&x);
        let occupation = OccupationMeasure::from_flat(&x, self.n_states(), self.m_max());
        let policy = extract_policy(&occupation, self.zero_mass);
        let report = self.evaluate_policy(&policy)?;
        let evaluated = problem.objective_of(&report);
        if !policy.any_defaulted()
            && (evaluated - lp_objective).abs() > OBJECTIVE_MISMATCH_TOLERANCE
        {
            return Err(CmdpError::ObjectiveMismatch {
                lp: lp_objective,
                evaluated,
            });
        }
        Ok(Solution {
            problem,
            policy,
            report,
            lp_objective,
            occupation,
            lp: solution,
        })
    }

    pub fn solve_p1(&self, nu: f64) -> Result<Solution, CmdpError> {
        self.solve(Problem::MinAgePenalty { nu })
    }

    pub fn solve_p2(&self, age_limit: f64) -> Result<Solution, CmdpError> {
        self.solve(Problem::MaxInterval { age_limit })
    }

    /// The optimal periodic interval for `problem` and its evaluation.
    pub fn periodic_baseline(&self, problem: Problem) -> Result<(u32, EvalReport), CmdpError> {
        let tau = match problem {
            Problem::MinAgePenalty { nu } => optimal_periodic_p1(nu, self.m_max())?,
            Problem::MaxInterval { age_limit } => optimal_periodic_p2(age_limit, self.m_max())?,
        };
        let policy = MarkovPolicy::periodic(self.n_states(), self.m_max(), tau);
        Ok((tau, self.evaluate_policy(&policy)?))
    }
}
