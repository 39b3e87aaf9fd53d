//! Monte Carlo validation of sampling policies and the exhaustive
//! deterministic-policy oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmdp::{CmdpError, EvalReport, MarkovPolicy, Problem, SamplingModel};
use crate::dtmc::{source_rng, MarkovChain, StepSampler};
use crate::exec::Execution;

/// Sampling decisions discarded before averaging.
pub const DEFAULT_BURN_IN: u64 = 1_000;
/// Largest number of deterministic policies the oracle will enumerate.
pub const MAX_ENUMERATION: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("policy covers {policy} states, chain has {chain}")]
    PolicyShape { policy: usize, chain: usize },
    #[error("need at least one sample")]
    NoSamples,
    #[error("{count} deterministic policies exceed the enumeration limit of {limit}")]
    TooLarge { count: u128, limit: u64 },
    #[error(transparent)]
    Model(#[from] CmdpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub burn_in: u64,
    /// State observed by the first sample.
    pub initial_state: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            burn_in: DEFAULT_BURN_IN,
            initial_state: 0,
        }
    }
}

/// Empirical long-run averages over `n_samples` sampling decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n_samples: u64,
    pub burn_in: u64,
    /// Slots.
    pub empirical_age_penalty: f64,
    /// Slots.
    pub empirical_interval: f64,
    /// Samples per slot.
    pub empirical_frequency: f64,
    pub seed: u64,
}

fn policy_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

pub fn run_policy(
    chain: &MarkovChain,
    policy: &MarkovPolicy,
    k_samples: u64,
    seed: u64,
) -> Result<SimReport, SimError> {
    run_policy_with(chain, policy, k_samples, seed, &SimOptions::default())
}

/// Runs the source slot by slot and samples it according to `policy`.
///
/// The age penalty of a sample taken `tau` slots after the previous one is
/// `tau - n` where `n` is the first slot in the interval at which the state
/// changed, or 0 if it never changed. Source transitions and policy draws use
/// separate streams of the same seed, so the source path does not depend on
/// the policy's randomization.
pub fn run_policy_with(
    chain: &MarkovChain,
    policy: &MarkovPolicy,
    k_samples: u64,
    seed: u64,
    options: &SimOptions,
) -> Result<SimReport, SimError> {
    if policy.n_states() != chain.n_states() {
        return Err(SimError::PolicyShape {
            policy: policy.n_states(),
            chain: chain.n_states(),
        });
    }
    if k_samples == 0 {
        return Err(SimError::NoSamples);
    }
    let source = StepSampler::new(chain);
    let chooser = StepSampler::from_rows(policy.rows());
    let mut source_rng = source_rng(seed);
    let mut policy_rng = policy_rng(seed);

    let mut state = options.initial_state.min(chain.n_states() - 1);
    let mut total_age: u64 = 0;
    let mut total_interval: u64 = 0;
    for k in 0..options.burn_in + k_samples {
        let tau = chooser.step(state, &mut policy_rng) as u64 + 1;
        let mut first_change = None;
        for n in 1..=tau {
            let next = source.step(state, &mut source_rng);
            if first_change.is_none() && next != state {
                first_change = Some(n);
            }
            state = next;
        }
        let age = first_change.map_or(0, |n| tau - n);
        debug_assert!(age < tau);
        if k >= options.burn_in {
            total_age += age;
            total_interval += tau;
        }
    }
    let k = k_samples as f64;
    Ok(SimReport {
        n_samples: k_samples,
        burn_in: options.burn_in,
        empirical_age_penalty: total_age as f64 / k,
        empirical_interval: total_interval as f64 / k,
        empirical_frequency: k / total_interval as f64,
        seed,
    })
}

/// Independent replications, one per seed, in seed order.
pub fn run_policy_batch(
    chain: &MarkovChain,
    policy: &MarkovPolicy,
    k_samples: u64,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<SimReport>, SimError> {
    exec.map(seeds, |&seed| run_policy(chain, policy, k_samples, seed))
        .into_iter()
        .collect()
}

/// Best deterministic stationary policy found by exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicOptimum {
    /// Interval chosen in each state.
    pub intervals: Vec<u32>,
    pub report: EvalReport,
}

const FEASIBILITY_SLACK: f64 = 1e-9;
const CHUNK: u64 = 4_096;

/// Enumerates all `M^N` maps from states to intervals, evaluates each
/// analytically and keeps the best one meeting the problem's constraint.
///
/// Returns `Ok(None)` when no deterministic policy is feasible. Policies whose
/// induced chain is not ergodic are skipped. Ties keep the lowest enumeration
/// index, so the result does not depend on `exec`.
pub fn brute_force_deterministic(
    model: &SamplingModel,
    problem: Problem,
    exec: Execution,
) -> Result<Option<DeterministicOptimum>, SimError> {
    let problem = problem.validate()?;
    let n = model.n_states() as u32;
    let m = u64::from(model.m_max());
    let count = u128::from(m).pow(n);
    if count > u128::from(MAX_ENUMERATION) {
        return Err(SimError::TooLarge {
            count,
            limit: MAX_ENUMERATION,
        });
    }
    let count = count as u64;
    let decode = |index: u64| -> Vec<u32> {
        let mut rest = index;
        (0..n)
            .map(|_| {
                let tau = (rest % m) as u32 + 1;
                rest /= m;
                tau
            })
            .collect()
    };
    let better = |candidate: &(u64, EvalReport), incumbent: &(u64, EvalReport)| {
        problem.improves(
            problem.objective_of(&candidate.1),
            problem.objective_of(&incumbent.1),
            0.0,
        )
    };
    let fold = |best: Option<(u64, EvalReport)>, next: Option<(u64, EvalReport)>| match (best, next)
    {
        (Some(b), Some(c)) => Some(if better(&c, &b) { c } else { b }),
        (b, c) => b.or(c),
    };

    let n_chunks = count.div_ceil(CHUNK);
    let chunk_best = exec.map_range(0..n_chunks, |chunk| {
        let start = chunk * CHUNK;
        (start..(start + CHUNK).min(count))
            .filter_map(|index| {
                let policy = MarkovPolicy::deterministic(&decode(index), model.m_max());
                let report = model.evaluate_policy(&policy).ok()?;
                problem
                    .is_satisfied_by(&report, FEASIBILITY_SLACK)
                    .then_some((index, report))
            })
            .map(Some)
            .fold(None, fold)
    });
    Ok(chunk_best
        .into_iter()
        .fold(None, fold)
        .map(|(index, report)| DeterministicOptimum {
            intervals: decode(index),
            report,
        }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_every_slot_has_no_age() {
        let chain = MarkovChain::two_state(0.4, 0.7).unwrap();
        let policy = MarkovPolicy::periodic(2, 3, 1);
        let report = run_policy(&chain, &policy, 20_000, 3).unwrap();
        assert_eq!(report.empirical_age_penalty, 0.0);
        assert_eq!(report.empirical_interval, 1.0);
        assert_eq!(report.empirical_frequency, 1.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let chain = MarkovChain::two_state(0.4, 0.7).unwrap();
        let policy =
            MarkovPolicy::from_rows(vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.4, 0.0]]).unwrap();
        let a = run_policy(&chain, &policy, 10_000, 11).unwrap();
        let b = run_policy(&chain, &policy, 10_000, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, run_policy(&chain, &policy, 10_000, 12).unwrap());
    }

    #[test]
    fn periodic_two_on_fast_chain() {
        let chain = MarkovChain::two_state(0.9, 0.9).unwrap();
        let policy = MarkovPolicy::periodic(2, 4, 2);
        let report = run_policy(&chain, &policy, 200_000, 5).unwrap();
        assert!((report.empirical_age_penalty - 0.9).abs() < 0.01);
        assert_eq!(report.empirical_interval, 2.0);
    }

    #[test]
    fn rejects_mismatched_policy_and_empty_runs() {
        let chain = MarkovChain::two_state(0.4, 0.7).unwrap();
        assert!(matches!(
            run_policy(&chain, &MarkovPolicy::periodic(3, 2, 1), 10, 0),
            Err(SimError::PolicyShape {
                policy: 3,
                chain: 2
            })
        ));
        assert!(matches!(
            run_policy(&chain, &MarkovPolicy::periodic(2, 2, 1), 0, 0),
            Err(SimError::NoSamples)
        ));
    }

    #[test]
    fn batch_matches_individual_runs() {
        let chain = MarkovChain::two_state(0.2, 0.5).unwrap();
        let policy = MarkovPolicy::periodic(2, 3, 3);
        let seeds = [1, 2, 3, 4];
        let seq = run_policy_batch(&chain, &policy, 5_000, &seeds, Execution::Sequential).unwrap();
        let par = run_policy_batch(&chain, &policy, 5_000, &seeds, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq[2], run_policy(&chain, &policy, 5_000, 3).unwrap());
    }

    #[test]
    fn zero_age_limit_picks_every_slot() {
        let model = SamplingModel::new(MarkovChain::two_state(0.9, 0.9).unwrap(), 4).unwrap();
        let best = brute_force_deterministic(
            &model,
            Problem::MaxInterval { age_limit: 0.0 },
            Execution::Sequential,
        )
        .unwrap()
        .unwrap();
        assert_eq!(best.intervals, vec![1, 1]);
        assert_eq!(best.report.avg_sampling_interval, 1.0);
    }

    #[test]
    fn enumeration_guard() {
        let model = SamplingModel::new(MarkovChain::two_state(0.5, 0.5).unwrap(), 1001).unwrap();
        assert!(matches!(
            brute_force_deterministic(
                &model,
                Problem::MaxInterval { age_limit: 1.0 },
                Execution::Sequential
            ),
            Err(SimError::TooLarge { .. })
        ));
    }

    #[test]
    fn execution_strategy_does_not_change_the_optimum() {
        let chain = MarkovChain::from_rows(&[
            vec![0.6, 0.3, 0.1],
            vec![0.2, 0.5, 0.3],
            vec![0.3, 0.3, 0.4],
        ])
        .unwrap();
        let model = SamplingModel::new(chain, 6).unwrap();
        let problem = Problem::MinAgePenalty { nu: 0.3 };
        let seq = brute_force_deterministic(&model, problem, Execution::Sequential).unwrap();
        let par = brute_force_deterministic(&model, problem, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        assert!(seq.unwrap().report.avg_sampling_interval >= 1.0 / 0.3 - 1e-9);
    }

    #[test]
    fn nothing_feasible_is_reported() {
        // Waiting at most 2 slots cannot reach a mean interval of 3.
        let model = SamplingModel::new(MarkovChain::two_state(0.5, 0.5).unwrap(), 2).unwrap();
        let result = brute_force_deterministic(
            &model,
            Problem::MinAgePenalty { nu: 1.0 / 3.0 },
            Execution::Sequential,
        )
        .unwrap();
        assert!(result.is_none());
    }
}
