//! Finite-state discrete-time Markov chains: validation, stationary
//! distribution, n-step kernels and reproducible sample paths.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on row sums accepted at construction.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("transition matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("chain needs at least 2 states, got {0}")]
    TooFewStates(usize),
    #[error("p[{row}][{col}] = {value} is not a finite probability in [0, 1]")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("row p[{row}] sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("chain is not ergodic: {0}")]
    NotErgodic(ErgodicityFailure),
    #[error("stationary distribution could not be solved")]
    SingularSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErgodicityFailure {
    /// State `to` cannot be reached from state `from`.
    Reducible {
        from: usize,
        to: usize,
    },
    Periodic {
        period: usize,
    },
}

impl std::fmt::Display for ErgodicityFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Reducible { from, to } => {
                write!(f, "reducible (state {to} unreachable from state {from})")
            }
            Self::Periodic { period } => write!(f, "periodic with period {period}"),
        }
    }
}

/// A validated, ergodic, row-stochastic chain with its stationary distribution.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    p: DMatrix<f64>,
    stationary: DVector<f64>,
}

impl MarkovChain {
    pub fn new(p: DMatrix<f64>) -> Result<Self, ChainError> {
        let (rows, cols) = p.shape();
        if rows != cols {
            return Err(ChainError::NotSquare { rows, cols });
        }
        if rows < 2 {
            return Err(ChainError::TooFewStates(rows));
        }
        for i in 0..rows {
            let mut sum = 0.0;
            for j in 0..cols {
                let v = p[(i, j)];
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(ChainError::InvalidEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(ChainError::NotStochastic { row: i, sum });
            }
        }
        check_ergodic(&p).map_err(ChainError::NotErgodic)?;
        let stationary = solve_stationary(&p)?;
        Ok(Self { p, stationary })
    }

    /// Builds a chain from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ChainError> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(ChainError::NotSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Two-state chain with off-diagonal probabilities `p12` (1 → 2) and `p21` (2 → 1).
    pub fn two_state(p12: f64, p21: f64) -> Result<Self, ChainError> {
        Self::from_rows(&[vec![1.0 - p12, p12], vec![p21, 1.0 - p21]])
    }

    pub fn n_states(&self) -> usize {
        self.p.nrows()
    }

    pub fn transition_matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.p[(from, to)]
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.stationary
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_states())
            .map(|i| self.p.row(i).iter().copied().collect())
            .collect()
    }

    /// `P^n`, with `P^0` the identity.
    pub fn n_step(&self, n: u32) -> DMatrix<f64> {
        let size = self.n_states();
        if n <= 8 {
            let mut acc = DMatrix::identity(size, size);
            for _ in 0..n {
                acc = &acc * &self.p;
            }
            return acc;
        }
        let mut result = DMatrix::identity(size, size);
        let mut base = self.p.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Simulates `horizon` slots starting from `x0`.
    ///
    /// Paths are drawn from a `ChaCha8Rng` seeded with `seed` (stream 0), so
    /// they reproduce across platforms.
    ///
    /// # Panics
    ///
    /// Panics if `x0` is not a state of the chain.
    pub fn sample_path(&self, x0: usize, horizon: usize, seed: u64) -> SamplePath {
        assert!(x0 < self.n_states(), "initial state {x0} out of range");
        let sampler = StepSampler::new(self);
        let mut rng = source_rng(seed);
        let mut states = Vec::with_capacity(horizon + 1);
        let mut transition_instants = Vec::new();
        states.push(x0);
        let mut x = x0;
        for t in 1..=horizon {
            let next = sampler.step(x, &mut rng);
            if next != x {
                transition_instants.push(t);
            }
            states.push(next);
            x = next;
        }
        SamplePath {
            states,
            transition_instants,
        }
    }
}

/// Source-path RNG for a seed. Policy randomization uses a separate stream.
pub(crate) fn source_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// Inverse-CDF sampler over the rows of a stochastic matrix.
#[derive(Debug, Clone)]
pub(crate) struct StepSampler {
    cumulative: Vec<Vec<f64>>,
    /// Last state with positive probability in each row; absorbs rounding in the scan.
    last_positive: Vec<usize>,
}

impl StepSampler {
    pub(crate) fn new(chain: &MarkovChain) -> Self {
        Self::from_rows(&chain.rows())
    }

    pub(crate) fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cumulative = rows
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0.0, |acc, &v| {
                        *acc += v;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        let last_positive = rows
            .iter()
            .map(|row| row.iter().rposition(|&v| v > 0.0).unwrap_or(0))
            .collect();
        Self {
            cumulative,
            last_positive,
        }
    }

    #[inline]
    pub(crate) fn step<R: Rng>(&self, from: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let row = &self.cumulative[from];
        row.iter()
            .position(|&c| u < c)
            .map_or(self.last_positive[from], |k| {
                k.min(self.last_positive[from])
            })
    }
}

/// A simulated trajectory `X_0..X_H` with the slots at which the state changed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePath {
    pub states: Vec<usize>,
    pub transition_instants: Vec<usize>,
}

impl SamplePath {
    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// Fraction of slots `t >= 1` with `X_t != X_{t-1}`.
    pub fn transition_frequency(&self) -> f64 {
        if self.horizon() == 0 {
            return 0.0;
        }
        self.transition_instants.len() as f64 / self.horizon() as f64
    }

    /// Fraction of slots `0..=H` spent in each state.
    pub fn occupancy(&self, n_states: usize) -> Vec<f64> {
        let mut counts = vec![0usize; n_states];
        for &s in &self.states {
            counts[s] += 1;
        }
        let total = self.states.len() as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }
}

/// Irreducibility by reachability closure of the positive-entry digraph,
/// aperiodicity by the gcd of BFS level differences along every edge.
pub(crate) fn check_ergodic(p: &DMatrix<f64>) -> Result<(), ErgodicityFailure> {
    let n = p.nrows();
    let forward = bfs_levels(n, |u, v| p[(u, v)] > 0.0);
    if let Some(to) = forward.iter().position(Option::is_none) {
        return Err(ErgodicityFailure::Reducible { from: 0, to });
    }
    let backward = bfs_levels(n, |u, v| p[(v, u)] > 0.0);
    if let Some(from) = backward.iter().position(Option::is_none) {
        return Err(ErgodicityFailure::Reducible { from, to: 0 });
    }
    let level: Vec<usize> = forward.into_iter().map(Option::unwrap).collect();
    let mut period = 0usize;
    for u in 0..n {
        for v in 0..n {
            if p[(u, v)] > 0.0 {
                let diff = (level[u] + 1).abs_diff(level[v]);
                period = gcd(period, diff);
            }
        }
    }
    if period == 1 {
        Ok(())
    } else {
        Err(ErgodicityFailure::Periodic { period })
    }
}

fn bfs_levels(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Option<usize>> {
    let mut level = vec![None; n];
    level[0] = Some(0);
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let next = level[u].unwrap() + 1;
        for v in 0..n {
            if level[v].is_none() && edge(u, v) {
                level[v] = Some(next);
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Solves `xi^T (P - I) = 0` with the last balance equation replaced by `sum(xi) = 1`.
pub(crate) fn solve_stationary(p: &DMatrix<f64>) -> Result<DVector<f64>, ChainError> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).ok_or(ChainError::SingularSystem)
}
