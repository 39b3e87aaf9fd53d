//! Age-penalty costs and the clairvoyant sampling frequency.

use serde::Serialize;

use crate::dtmc::MarkovChain;

/// Expected age penalty (in slots) of a sample taken `tau` slots after
/// observing a state whose self-transition probability is `p_stay`.
///
/// The first exit happens `n` slots later with probability
/// `(1 - p_stay) p_stay^(n-1)`, and contributes `tau - n` slots of staleness
/// when `n < tau`. Summed directly; `p_stay = 1` yields 0.
pub fn age_cost(p_stay: f64, tau: u32) -> f64 {
    let exit = 1.0 - p_stay;
    let mut stay_run = 1.0;
    let mut total = 0.0;
    for n in 1..tau {
        total += f64::from(tau - n) * exit * stay_run;
        stay_run *= p_stay;
    }
    total
}

/// `c[j][tau - 1]` for every state `j` and interval `tau` in `1..=M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostTable {
    m_max: u32,
    costs: Vec<Vec<f64>>,
}

impl CostTable {
    pub fn new(chain: &MarkovChain, m_max: u32) -> Self {
        assert!(m_max >= 1, "maximum sampling interval must be at least 1");
        let costs = (0..chain.n_states())
            .map(|j| {
                let p_stay = chain.prob(j, j);
                (1..=m_max).map(|tau| age_cost(p_stay, tau)).collect()
            })
            .collect();
        Self { m_max, costs }
    }

    pub fn m_max(&self) -> u32 {
        self.m_max
    }

    pub fn n_states(&self) -> usize {
        self.costs.len()
    }

    /// Cost of interval `tau` (1-based, in slots) from state `state`.
    pub fn get(&self, state: usize, tau: u32) -> f64 {
        self.costs[state][(tau - 1) as usize]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.costs[state]
    }
}

/// Average sampling frequency of a sampler that fires exactly at the
/// transition instants: `1 - sum_j xi_j p_jj`.
pub fn clairvoyant_frequency(chain: &MarkovChain) -> f64 {
    let xi = chain.stationary();
    let self_loops: f64 = (0..chain.n_states())
        .map(|j| xi[j] * chain.prob(j, j))
        .sum();
    1.0 - self_loops
}

/// Two-state closed form `2 p12 p21 / (p12 + p21)`.
pub fn two_state_clairvoyant_frequency(p12: f64, p21: f64) -> f64 {
    2.0 * p12 * p21 / (p12 + p21)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_interval_is_free() {
        for p in [0.0, 0.3, 0.9, 1.0] {
            assert_eq!(age_cost(p, 1), 0.0);
        }
    }

    #[test]
    fn immediate_exit_costs_tau_minus_one() {
        assert_eq!(age_cost(0.0, 4), 3.0);
    }

    #[test]
    fn absorbing_state_costs_nothing() {
        for tau in 1..10 {
            assert_eq!(age_cost(1.0, tau), 0.0);
        }
    }

    #[test]
    fn hand_summed_value() {
        // 0.1 * (5 + 4*0.9 + 3*0.81 + 2*0.729 + 0.6561)
        assert!((age_cost(0.9, 6) - 1.31441).abs() < 1e-12);
    }

    #[test]
    fn cost_table_examples() {
        let chain = MarkovChain::two_state(0.1, 0.6).unwrap();
        let table = CostTable::new(&chain, 2);
        assert!((table.get(0, 2) - 0.1).abs() < 1e-15);
        assert!((table.get(1, 2) - 0.6).abs() < 1e-15);

        let half = MarkovChain::two_state(0.5, 0.5).unwrap();
        let table = CostTable::new(&half, 3);
        for j in 0..2 {
            assert_eq!(table.get(j, 1), 0.0);
            assert!((table.get(j, 3) - 1.25).abs() < 1e-15);
        }
    }

    #[test]
    fn costs_are_monotone_and_bounded() {
        for p in [0.0, 0.05, 0.5, 0.95] {
            let mut prev = 0.0;
            for tau in 1..=40 {
                let c = age_cost(p, tau);
                assert!(c >= prev - 1e-15);
                assert!(c <= f64::from(tau - 1) + 1e-12);
                prev = c;
            }
        }
    }

    #[test]
    fn clairvoyant_frequency_examples() {
        let chain = MarkovChain::two_state(0.1, 0.6).unwrap();
        let nu = clairvoyant_frequency(&chain);
        assert!((nu - 0.12 / 0.7).abs() < 1e-12);
        assert!((1.0 / nu - 5.833).abs() < 1e-3);

        let fast = MarkovChain::two_state(0.9, 0.9).unwrap();
        assert!((clairvoyant_frequency(&fast) - 0.9).abs() < 1e-12);

        let no_loops = MarkovChain::from_rows(&[
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap();
        assert!((clairvoyant_frequency(&no_loops) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn general_formula_matches_two_state_closed_form() {
        for a in 1..=9 {
            for b in 1..=9 {
                let (p12, p21) = (f64::from(a) / 10.0, f64::from(b) / 10.0);
                let chain = MarkovChain::two_state(p12, p21).unwrap();
                let general = clairvoyant_frequency(&chain);
                let closed = two_state_clairvoyant_frequency(p12, p21);
                assert!((general - closed).abs() < 1e-12, "{p12} {p21}");
            }
        }
    }
}
