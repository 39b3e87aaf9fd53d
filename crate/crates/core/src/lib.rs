//! Optimal causal sampling of a finite-state Markov source.
//!
//! A sampler observes a discrete-time Markov chain and, after each sample,
//! picks how many slots to wait before the next one. Waiting longer saves
//! samples but lets transitions go unnoticed; the *age penalty* of a sample
//! counts the slots elapsed since the source first left the previously
//! observed state. This crate computes randomized stationary policies that
//! minimize the average age penalty under a sampling-frequency budget, or the
//! sampling frequency under an age-penalty budget, by solving
//! occupation-measure linear programs, and checks them analytically and by
//! simulation.
//!
//! ```
//! use markov_sampler::{clairvoyant_frequency, MarkovChain, SamplingModel};
//!
//! let chain = MarkovChain::two_state(0.1, 0.6).unwrap();
//! let nu = clairvoyant_frequency(&chain);
//! let model = SamplingModel::new(chain, 7).unwrap();
//! let solution = model.solve_p1(nu).unwrap();
//! assert!((solution.lp_objective - 1.416).abs() < 2e-3);
//! ```

pub mod cmdp;
pub mod dtmc;
pub mod exec;
pub mod lpsolver;
pub mod penalty;
pub mod sim;
pub mod sweep;

pub use cmdp::{
    extract_policy, optimal_periodic_p1, optimal_periodic_p2, CmdpError, EvalReport, Kernel,
    MarkovPolicy, OccupationMeasure, Problem, SamplingModel, Solution,
};
pub use dtmc::{ChainError, ErgodicityFailure, MarkovChain, SamplePath};
pub use exec::{with_workers, Execution};
pub use lpsolver::{check_feasible, LinearProgram, LpError, LpSolution, LpStatus, Relation, Sense};
pub use penalty::{age_cost, clairvoyant_frequency, two_state_clairvoyant_frequency, CostTable};
pub use sim::{
    brute_force_deterministic, run_policy, run_policy_batch, run_policy_with, DeterministicOptimum,
    SimError, SimOptions, SimReport,
};
pub use sweep::{run_sweep, NuBound, SweepProblem, SweepRow, SweepSpec, SWEEP_COLUMNS};
