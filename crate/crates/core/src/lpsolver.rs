//! Dense two-phase simplex for small linear programs over nonnegative
//! variables.
//!
//! Entering and leaving variables follow Bland's rule (lowest index), which
//! guarantees termination on degenerate programs such as the occupation
//! measure LPs, whose balance rows are linearly dependent.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    LessEq,
    GreaterEq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equality {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `sense objective . x` subject to equalities, inequalities and `x >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub equalities: Vec<Equality>,
    pub inequalities: Vec<Inequality>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        Self {
            sense,
            objective,
            equalities: Vec::new(),
            inequalities: Vec::new(),
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Minimize, objective)
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Maximize, objective)
    }

    pub fn equality(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.equalities.push(Equality { coeffs, rhs });
        self
    }

    pub fn inequality(mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        self.inequalities.push(Inequality {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.equalities.len() + self.inequalities.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if n == 0 {
            return Err(LpError::Malformed("program has no variables".into()));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed(
                "objective has non-finite coefficients".into(),
            ));
        }
        let rows = self
            .equalities
            .iter()
            .map(|e| (&e.coeffs, e.rhs))
            .chain(self.inequalities.iter().map(|c| (&c.coeffs, c.rhs)));
        for (k, (coeffs, rhs)) in rows.enumerate() {
            if coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "constraint {k} has {} coefficients, expected {n}",
                    coeffs.len()
                )));
            }
            if !rhs.is_finite() || coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::Malformed(format!(
                    "constraint {k} has non-finite entries"
                )));
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless `status` is `Optimal`.
    pub x: Vec<f64>,
    /// `objective . x`; NaN unless `status` is `Optimal`.
    pub objective_value: f64,
    /// One multiplier per constraint, equalities first, in the program's own
    /// sense: `rhs . duals` equals the optimal objective.
    pub duals: Vec<f64>,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        Self {
            status,
            x: Vec::new(),
            objective_value: f64::NAN,
            duals: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Smallest pivot magnitude and reduced-cost improvement considered nonzero.
    pub pivot_tolerance: f64,
    /// Largest phase-one residual accepted as feasible.
    pub feasibility_tolerance: f64,
    pub max_pivots: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            pivot_tolerance: 1e-9,
            feasibility_tolerance: 1e-8,
            max_pivots: 100_000,
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with(lp, &SimplexOptions::default())
}

pub fn solve_with(lp: &LinearProgram, options: &SimplexOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut tableau = Tableau::standard_form(lp, options);
    if !tableau.phase_one()? {
        return Ok(LpSolution::without_point(LpStatus::Infeasible));
    }
    if !tableau.phase_two()? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded));
    }
    let x = tableau.primal();
    let duals = tableau.duals();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective_at(&x),
        x,
        duals,
    })
}

/// True iff `x` satisfies every constraint and nonnegativity within `tol`.
pub fn check_feasible(lp: &LinearProgram, x: &[f64], tol: f64) -> Result<bool, LpError> {
    lp.validate()?;
    if x.len() != lp.n_vars() {
        return Err(LpError::Malformed(format!(
            "point has {} entries, program has {} variables",
            x.len(),
            lp.n_vars()
        )));
    }
    if x.iter().any(|&v| !v.is_finite() || v < -tol) {
        return Ok(false);
    }
    let eq_ok = lp
        .equalities
        .iter()
        .all(|e| (dot(&e.coeffs, x) - e.rhs).abs() <= tol);
    let ineq_ok = lp.inequalities.iter().all(|c| {
        let lhs = dot(&c.coeffs, x);
        match c.relation {
            Relation::LessEq => lhs <= c.rhs + tol,
            Relation::GreaterEq => lhs >= c.rhs - tol,
        }
    });
    Ok(eq_ok && ineq_ok)
}

/// Analytic center of the optimal face of `lp`, given one optimal solution.
///
/// Simplex stops at a vertex; when the optimum is not unique this returns the
/// point of the optimal face maximizing `sum(log w)` over the coordinates
/// (structural and slack) that are positive somewhere on the face. That is
/// the limit point of the central path, so it matches what interior-point
/// solvers report and respects any symmetry of the program. Falls back to
/// `optimum.x` if the face is unbounded or the refinement loses feasibility.
pub fn central_optimum(
    lp: &LinearProgram,
    optimum: &LpSolution,
    options: &SimplexOptions,
) -> Result<Vec<f64>, LpError> {
    lp.validate()?;
    if !optimum.is_optimal() || optimum.x.len() != lp.n_vars() {
        return Err(LpError::Malformed(
            "central refinement needs an optimal solution".into(),
        ));
    }
    let face = OptimalFace::new(lp, optimum);
    let Some(center) = face.analytic_center(options)? else {
        return Ok(optimum.x.clone());
    };
    let x = center[..lp.n_vars()].to_vec();
    let still_optimal = (lp.objective_at(&x) - optimum.objective_value).abs()
        <= options.feasibility_tolerance * (1.0 + optimum.objective_value.abs());
    if still_optimal && check_feasible(lp, &x, options.feasibility_tolerance)? {
        Ok(x)
    } else {
        Ok(optimum.x.clone())
    }
}

/// `{w >= 0 : rows w = rhs}` over structural and slack variables, with the
/// objective pinned at its optimal value.
struct OptimalFace {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    start: Vec<f64>,
}

impl OptimalFace {
    fn new(lp: &LinearProgram, optimum: &LpSolution) -> Self {
        let n = lp.n_vars();
        let width = n + lp.inequalities.len();
        let mut rows = Vec::with_capacity(lp.n_constraints() + 1);
        let mut rhs = Vec::with_capacity(lp.n_constraints() + 1);
        let mut start = optimum.x.clone();
        for e in &lp.equalities {
            let mut row = e.coeffs.clone();
            row.resize(width, 0.0);
            rows.push(row);
            rhs.push(e.rhs);
        }
        for (k, c) in lp.inequalities.iter().enumerate() {
            let mut row = c.coeffs.clone();
            row.resize(width, 0.0);
            let lhs = dot(&c.coeffs, &optimum.x);
            let (sign, slack) = match c.relation {
                Relation::LessEq => (1.0, c.rhs - lhs),
                Relation::GreaterEq => (-1.0, lhs - c.rhs),
            };
            row[n + k] = sign;
            rows.push(row);
            rhs.push(c.rhs);
            start.push(slack.max(0.0));
        }
        let mut objective = lp.objective.clone();
        objective.resize(width, 0.0);
        rows.push(objective);
        rhs.push(optimum.objective_value);
        Self { rows, rhs, start }
    }

    fn width(&self) -> usize {
        self.start.len()
    }

    fn program_maximizing(&self, k: usize) -> LinearProgram {
        let mut objective = vec![0.0; self.width()];
        objective[k] = 1.0;
        let mut lp = LinearProgram::maximize(objective);
        for (row, &b) in self.rows.iter().zip(&self.rhs) {
            lp = lp.equality(row.clone(), b);
        }
        lp
    }

    /// Returns `None` when the optimum is unique or the face is unbounded.
    fn analytic_center(&self, options: &SimplexOptions) -> Result<Option<Vec<f64>>, LpError> {
        const SUPPORT: f64 = 1e-7;
        let width = self.width();
        let mut witnesses = vec![self.start.clone()];
        let mut support = vec![false; width];
        for k in 0..width {
            if self.start[k] > SUPPORT {
                support[k] = true;
                continue;
            }
            let best = solve_with(&self.program_maximizing(k), options)?;
            match best.status {
                LpStatus::Optimal if best.objective_value > SUPPORT => {
                    support[k] = true;
                    witnesses.push(best.x);
                }
                LpStatus::Optimal => {}
                LpStatus::Unbounded => return Ok(None),
                // The face contains `start`; numerical trouble only.
                LpStatus::Infeasible => return Ok(None),
            }
        }
        let cols: Vec<usize> = (0..width).filter(|&k| support[k]).collect();
        if cols.is_empty() {
            return Ok(None);
        }
        // Interior point of the face relative to its support.
        let count = witnesses.len() as f64;
        let interior: Vec<f64> = cols
            .iter()
            .map(|&k| witnesses.iter().map(|w| w[k]).sum::<f64>() / count)
            .collect();

        let a = DMatrix::from_fn(self.rows.len(), cols.len(), |i, c| self.rows[i][cols[c]]);
        let gram = a.transpose() * &a;
        let eigen = gram.symmetric_eigen();
        let scale = eigen
            .eigenvalues
            .iter()
            .fold(1.0_f64, |m, v| m.max(v.abs()));
        let null: Vec<usize> = (0..cols.len())
            .filter(|&i| eigen.eigenvalues[i].abs() <= 1e-12 * scale)
            .collect();
        if null.is_empty() {
            return Ok(None);
        }
        let basis = eigen.eigenvectors.select_columns(&null);
        let mut w = DVector::from_vec(interior);
        if w.iter().any(|&v| v <= 0.0) {
            return Ok(None);
        }

        let barrier = |w: &DVector<f64>| w.iter().map(|v| v.ln()).sum::<f64>();
        for _ in 0..200 {
            let inv = w.map(|v| 1.0 / v);
            let grad = basis.transpose() * &inv;
            let weighted =
                DMatrix::from_fn(basis.nrows(), basis.ncols(), |r, c| basis[(r, c)] * inv[r]);
            let hessian = weighted.transpose() * &weighted;
            let Some(step) = hessian.cholesky().map(|ch| ch.solve(&grad)) else {
                break;
            };
            let decrement = grad.dot(&step);
            if decrement < 1e-20 {
                break;
            }
            let direction = &basis * &step;
            let current = barrier(&w);
            let mut t = 1.0;
            loop {
                let trial = &w + t * &direction;
                if trial.iter().all(|&v| v > 0.0)
                    && barrier(&trial) >= current + 0.25 * t * decrement
                {
                    w = trial;
                    break;
                }
                t *= 0.5;
                if t < 1e-12 {
                    break;
                }
            }
            if t < 1e-12 {
                break;
            }
        }

        let mut full = vec![0.0; width];
        for (c, &k) in cols.iter().enumerate() {
            full[k] = w[c];
        }
        Ok(Some(full))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Column layout: structural variables, then one slack per inequality, then
/// artificials. The last column of every row holds the right-hand side.
struct Tableau {
    options: SimplexOptions,
    n_structural: usize,
    /// First artificial column.
    artificial_start: usize,
    n_cols: usize,
    rows: Vec<Vec<f64>>,
    /// Original constraint index and the sign applied to make its rhs nonnegative.
    row_origin: Vec<(usize, f64)>,
    /// Standard-form constraint columns before any pivot, indexed like `rows`.
    initial: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Minimization costs over all columns (maximization is negated).
    costs: Vec<f64>,
    sense: Sense,
    n_constraints: usize,
    pivots: usize,
}

impl Tableau {
    fn standard_form(lp: &LinearProgram, options: &SimplexOptions) -> Self {
        let n = lp.n_vars();
        let n_slack = lp.inequalities.len();
        let mut raw: Vec<(Vec<f64>, f64)> = Vec::with_capacity(lp.n_constraints());
        for e in &lp.equalities {
            let mut row = e.coeffs.clone();
            row.resize(n + n_slack, 0.0);
            raw.push((row, e.rhs));
        }
        for (k, c) in lp.inequalities.iter().enumerate() {
            let mut row = c.coeffs.clone();
            row.resize(n + n_slack, 0.0);
            row[n + k] = match c.relation {
                Relation::LessEq => 1.0,
                Relation::GreaterEq => -1.0,
            };
            raw.push((row, c.rhs));
        }

        let mut row_origin = Vec::with_capacity(raw.len());
        let mut needs_artificial = Vec::with_capacity(raw.len());
        let mut basis = Vec::with_capacity(raw.len());
        for (i, (row, rhs)) in raw.iter_mut().enumerate() {
            let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
            if sign < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
                *rhs = -*rhs;
            }
            row_origin.push((i, sign));
            let slack = i
                .checked_sub(lp.equalities.len())
                .map(|k| n + k)
                .filter(|&col| row[col] == 1.0);
            needs_artificial.push(slack.is_none());
            basis.push(slack.unwrap_or(usize::MAX));
        }

        let artificial_start = n + n_slack;
        let n_artificial = needs_artificial.iter().filter(|&&a| a).count();
        let n_cols = artificial_start + n_artificial;
        let mut rows = Vec::with_capacity(raw.len());
        let mut next_artificial = artificial_start;
        for (i, (row, rhs)) in raw.into_iter().enumerate() {
            let mut full = row;
            full.resize(n_cols + 1, 0.0);
            full[n_cols] = rhs;
            if needs_artificial[i] {
                full[next_artificial] = 1.0;
                basis[i] = next_artificial;
                next_artificial += 1;
            }
            rows.push(full);
        }

        let mut costs = vec![0.0; n_cols];
        for (j, &c) in lp.objective.iter().enumerate() {
            costs[j] = match lp.sense {
                Sense::Minimize => c,
                Sense::Maximize => -c,
            };
        }

        Self {
            options: *options,
            n_structural: n,
            artificial_start,
            n_cols,
            initial: rows.iter().map(|r| r[..n_cols].to_vec()).collect(),
            rows,
            row_origin,
            basis,
            costs,
            sense: lp.sense,
            n_constraints: lp.n_constraints(),
            pivots: 0,
        }
    }

    /// Reduced-cost row for `costs`, with the negated objective in the rhs slot.
    fn reduced_costs(&self, costs: &[f64]) -> Vec<f64> {
        let mut reduced: Vec<f64> = costs.to_vec();
        reduced.push(0.0);
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = costs[b];
            if cb != 0.0 {
                for (r, v) in reduced.iter_mut().zip(row) {
                    *r -= cb * v;
                }
            }
        }
        reduced
    }

    fn pivot(&mut self, objective: &mut [f64], r: usize, c: usize) {
        let pivot = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= pivot);
        self.rows[r][c] = 1.0;
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let factor = row[c];
            if factor != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                row[c] = 0.0;
            }
        }
        let factor = objective[c];
        if factor != 0.0 {
            for (v, p) in objective.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            objective[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs simplex iterations over columns `< allowed_cols`. Returns false
    /// when the objective is unbounded below.
    fn iterate(&mut self, objective: &mut [f64], allowed_cols: usize) -> Result<bool, LpError> {
        let tol = self.options.pivot_tolerance;
        let rhs = self.n_cols;
        loop {
            if self.pivots >= self.options.max_pivots {
                return Err(LpError::PivotLimit(self.options.max_pivots));
            }
            let Some(entering) = (0..allowed_cols).find(|&j| objective[j] < -tol) else {
                return Ok(true);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[entering];
                if a <= tol {
                    continue;
                }
                let ratio = row[rhs].max(0.0) / a;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((best, best_ratio)) => {
                        let scale = 1e-12 * (1.0 + best_ratio.abs());
                        if ratio < best_ratio - scale
                            || (ratio <= best_ratio + scale && self.basis[i] < self.basis[best])
                        {
                            Some((i, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            let Some((r, _)) = leaving else {
                return Ok(false);
            };
            self.pivot(objective, r, entering);
        }
    }

    /// Minimizes the sum of artificials and removes them from the basis.
    /// Returns false when the program is infeasible.
    fn phase_one(&mut self) -> Result<bool, LpError> {
        if self.artificial_start == self.n_cols {
            return Ok(true);
        }
        let mut costs = vec![0.0; self.n_cols];
        costs[self.artificial_start..]
            .iter_mut()
            .for_each(|c| *c = 1.0);
        let mut objective = self.reduced_costs(&costs);
        // Artificial costs are positive, so phase one is bounded below by zero.
        self.iterate(&mut objective, self.artificial_start)?;
        let residual = -objective[self.n_cols];
        if residual > self.options.feasibility_tolerance {
            return Ok(false);
        }

        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] < self.artificial_start {
                i += 1;
                continue;
            }
            let replacement = (0..self.artificial_start)
                .filter(|&j| self.rows[i][j].abs() > self.options.pivot_tolerance)
                .max_by(|&a, &b| {
                    self.rows[i][a]
                        .abs()
                        .total_cmp(&self.rows[i][b].abs())
                        .then(b.cmp(&a))
                });
            match replacement {
                Some(j) => {
                    self.pivot(&mut objective, i, j);
                    i += 1;
                }
                None => {
                    // Linearly dependent constraint.
                    self.rows.remove(i);
                    self.basis.remove(i);
                    self.row_origin.remove(i);
                    self.initial.remove(i);
                }
            }
        }
        Ok(true)
    }

    fn phase_two(&mut self) -> Result<bool, LpError> {
        let costs = self.costs.clone();
        let mut objective = self.reduced_costs(&costs);
        self.iterate(&mut objective, self.artificial_start)
    }

    fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_structural];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.n_structural {
                x[b] = row[self.n_cols].max(0.0);
            }
        }
        x
    }

    /// Solves `B^T y = c_B` on the standard-form columns of the final basis
    /// and maps `y` back to the original constraints.
    fn duals(&self) -> Vec<f64> {
        let m = self.rows.len();
        let mut duals = vec![0.0; self.n_constraints];
        if m == 0 {
            return duals;
        }
        let basis_t = DMatrix::from_fn(m, m, |col, row| self.initial[row][self.basis[col]]);
        let cb = DVector::from_iterator(m, self.basis.iter().map(|&b| self.costs[b]));
        let Some(y) = basis_t.lu().solve(&cb) else {
            return duals;
        };
        let flip = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        for (k, &(origin, sign)) in self.row_origin.iter().enumerate() {
            duals[origin] = flip * sign * y[k];
        }
        duals
    }
}
