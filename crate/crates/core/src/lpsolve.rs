//! Dense linear programming for `minimize cᵀv subject to U v ≤ p`, `v` free.
//!
//! The inequality form is solved through its dual,
//! `minimize pᵀy subject to Uᵀy = -c, y ≥ 0`, with a two-phase tableau
//! simplex. The dual has one equality row per primal variable, so the
//! tableau stays `(n + 1) × (m + n + 1)` even when there are many more
//! constraints than variables. The primal optimizer is the vertex defined by
//! the optimal dual basis: the constraints indexed by the basic dual
//! variables hold with equality at `v`.
//!
//! Entering variables follow the most-negative reduced cost; after a run of
//! degenerate pivots the rule falls back to Bland's lowest-index choice until
//! the objective moves again. Outside that fallback the ratio test is
//! two-pass: among rows whose ratio is within a small slack of the minimum it
//! takes the largest pivot, then the lowest basic variable index. Each phase
//! ends by recomputing the tableau from the original data for the final
//! basis and resuming if rounding had hidden an improving column.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpTolerances {
    /// Smallest magnitude accepted as a pivot element.
    pub pivot: f64,
    /// Allowed constraint violation.
    pub feasibility: f64,
}

impl Default for LpTolerances {
    fn default() -> Self {
        Self {
            pivot: 1e-10,
            feasibility: 1e-8,
        }
    }
}

/// `minimize cᵀv subject to U v ≤ p`. `U` is row-major `m × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

impl LpProblem {
    pub fn new(c: Vec<f64>, u: Vec<f64>, p: Vec<f64>) -> Self {
        assert!(!c.is_empty() && !p.is_empty(), "LP needs n ≥ 1 and m ≥ 1");
        assert_eq!(u.len(), c.len() * p.len(), "U must be m × n");
        Self { c, u, p }
    }

    pub fn vars(&self) -> usize {
        self.c.len()
    }

    pub fn rows(&self) -> usize {
        self.p.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.vars();
        &self.u[i * n..(i + 1) * n]
    }

    /// `U v`.
    pub fn lhs(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows())
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest positive entry of `U v - p`, or 0 when `v` is feasible.
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        self.lhs(v)
            .iter()
            .zip(&self.p)
            .map(|(l, r)| l - r)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimizer; empty unless `status` is `Optimal`.
    pub v: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, pivots: usize) -> Self {
        Self {
            status,
            v: Vec::new(),
            objective: f64::NAN,
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn solve(problem: &LpProblem, tol: &LpTolerances) -> LpSolution {
    let n = problem.vars();
    let m = problem.rows();
    if problem
        .u
        .iter()
        .chain(&problem.c)
        .chain(&problem.p)
        .any(|x| !x.is_finite())
    {
        return LpSolution::failed(LpStatus::NumericalFailure, 0);
    }

    // Dual: rows are primal variables, columns are primal constraints.
    let mut eq = vec![0.0; n * m];
    for i in 0..m {
        for j in 0..n {
            eq[j * m + i] = problem.u[i * n + j];
        }
    }
    let rhs: Vec<f64> = problem.c.iter().map(|x| -x).collect();
    let mut tab = Tableau::new(&eq, &rhs, n, m);

    match tab.phase_one(tol) {
        PhaseOutcome::Done => {}
        PhaseOutcome::Infeasible => {
            let pivots = tab.pivots;
            return LpSolution::failed(primal_unbounded_or_infeasible(problem, tol), pivots);
        }
        PhaseOutcome::Unbounded | PhaseOutcome::Stalled => {
            return LpSolution::failed(LpStatus::NumericalFailure, tab.pivots);
        }
    }
    match tab.phase_two(&problem.p, tol) {
        PhaseOutcome::Done => {}
        PhaseOutcome::Unbounded => return LpSolution::failed(LpStatus::Infeasible, tab.pivots),
        PhaseOutcome::Infeasible | PhaseOutcome::Stalled => {
            return LpSolution::failed(LpStatus::NumericalFailure, tab.pivots)
        }
    }

    let v = primal_vertex(problem, &tab).unwrap_or_else(|| tab.multipliers());
    let violation = problem.max_violation(&v);
    let scale = problem.p.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    if !v.iter().all(|x| x.is_finite()) || violation > tol.feasibility * scale {
        return LpSolution::failed(LpStatus::NumericalFailure, tab.pivots);
    }
    let objective = problem.c.iter().zip(&v).map(|(a, b)| a * b).sum();
    LpSolution {
        status: LpStatus::Optimal,
        v,
        objective,
        pivots: tab.pivots,
    }
}

/// Re-solves the tight constraints of the optimal dual basis directly. This
/// removes the rounding accumulated in the tableau's multiplier row.
fn primal_vertex(problem: &LpProblem, tab: &Tableau) -> Option<Vec<f64>> {
    let n = problem.vars();
    let mut rows = Vec::with_capacity(n);
    for &b in &tab.basis {
        if b >= tab.structural {
            return None;
        }
        rows.push(b);
    }
    let mut a: Vec<f64> = rows.iter().flat_map(|&i| problem.row(i).to_vec()).collect();
    let mut rhs: Vec<f64> = rows.iter().map(|&i| problem.p[i]).collect();
    gauss_solve(&mut a, &mut rhs, n)
}

/// Solves the square system in place with partial pivoting.
fn gauss_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i * n + col]
                .abs()
                .partial_cmp(&a[j * n + col].abs())
                .unwrap()
        })?;
        if a[piv * n + col].abs() < 1e-13 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for i in col + 1..n {
            let f = a[i * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[i * n + k] -= f * a[col * n + k];
                }
                b[i] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i * n + k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i * n + i];
    }
    Some(x)
}

/// The dual is infeasible, so the primal is either infeasible or unbounded.
/// Farkas: the primal is infeasible iff some `y ≥ 0` has `Uᵀy = 0` and
/// `pᵀy < 0`; normalizing `1ᵀy = 1` makes that a bounded LP.
fn primal_unbounded_or_infeasible(problem: &LpProblem, tol: &LpTolerances) -> LpStatus {
    let n = problem.vars();
    let m = problem.rows();
    let mut eq = vec![0.0; (n + 1) * m];
    for i in 0..m {
        for j in 0..n {
            eq[j * m + i] = problem.u[i * n + j];
        }
        eq[n * m + i] = 1.0;
    }
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = 1.0;
    let mut tab = Tableau::new(&eq, &rhs, n + 1, m);
    match tab.phase_one(tol) {
        PhaseOutcome::Infeasible => return LpStatus::Unbounded,
        PhaseOutcome::Done => {}
        _ => return LpStatus::NumericalFailure,
    }
    match tab.phase_two(&problem.p, tol) {
        PhaseOutcome::Done => {
            if tab.objective_value() < -tol.feasibility {
                LpStatus::Infeasible
            } else {
                LpStatus::Unbounded
            }
        }
        _ => LpStatus::NumericalFailure,
    }
}

enum PhaseOutcome {
    Done,
    Infeasible,
    Unbounded,
    Stalled,
}

/// Full tableau for `min gᵀy, E y = f, y ≥ 0` with one artificial per row.
///
/// Layout: `rows` constraint rows followed by the reduced-cost row; columns
/// are the structural variables, then the artificials, then the right-hand
/// side.
struct Tableau {
    rows: usize,
    structural: usize,
    width: usize,
    data: Vec<f64>,
    /// Constraint rows as first built, for refactoring.
    original: Vec<f64>,
    costs: Vec<f64>,
    basis: Vec<usize>,
    /// ±1 applied to each row so the initial right-hand side is nonnegative.
    sign: Vec<f64>,
    pivots: usize,
}

const DEGENERATE_RUN_BEFORE_BLAND: usize = 20;
const HARRIS_SLACK: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const MAX_REFACTORS: usize = 4;
const RELATIVE_PIVOT: f64 = 1e-7;
/// Basic values this far below zero are rounding and get reset to zero.
const NEGATIVE_RHS_CLAMP: f64 = 1e-9;

impl Tableau {
    fn new(eq: &[f64], f: &[f64], rows: usize, structural: usize) -> Self {
        let width = structural + rows + 1;
        let mut data = vec![0.0; (rows + 1) * width];
        let mut sign = vec![1.0; rows];
        for i in 0..rows {
            sign[i] = if f[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..structural {
                data[i * width + j] = sign[i] * eq[i * structural + j];
            }
            data[i * width + structural + i] = 1.0;
            data[i * width + width - 1] = sign[i] * f[i];
        }
        Self {
            rows,
            structural,
            width,
            original: data[..rows * width].to_vec(),
            data,
            costs: Vec::new(),
            basis: (0..rows).map(|i| structural + i).collect(),
            sign,
            pivots: 0,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn cost_row(&self) -> usize {
        self.rows
    }

    /// Current objective value `gᵀy` (the cost row stores its negation).
    fn objective_value(&self) -> f64 {
        -self.at(self.cost_row(), self.width - 1)
    }

    /// Rebuilds the reduced-cost row from `self.costs` and the current basis.
    fn set_costs(&mut self) {
        let w = self.width;
        let cr = self.cost_row();
        for j in 0..w {
            self.data[cr * w + j] = self.costs.get(j).copied().unwrap_or(0.0);
        }
        for i in 0..self.rows {
            let cb = self.costs.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for j in 0..w {
                    self.data[cr * w + j] -= cb * self.data[i * w + j];
                }
            }
        }
    }

    fn eliminate(&mut self, row: usize, col: usize) {
        let w = self.width;
        let inv = 1.0 / self.data[row * w + col];
        for j in 0..w {
            self.data[row * w + j] *= inv;
        }
        self.data[row * w + col] = 1.0;
        let (before, rest) = self.data.split_at_mut(row * w);
        let (prow, after) = rest.split_at_mut(w);
        for chunk in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = chunk[col];
            if f != 0.0 {
                for (x, p) in chunk.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                chunk[col] = 0.0;
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        self.eliminate(row, col);
        self.basis[row] = col;
        self.pivots += 1;
        let w = self.width;
        for i in 0..self.rows {
            let r = &mut self.data[i * w + w - 1];
            if *r < 0.0 && *r > -NEGATIVE_RHS_CLAMP {
                *r = 0.0;
            }
        }
    }

    /// Recomputes the tableau for the current basis from the original rows,
    /// discarding accumulated rounding. On a numerically singular basis the
    /// tableau is left unchanged and `false` is returned.
    fn refactor(&mut self) -> bool {
        let w = self.width;
        let old_basis = self.basis.clone();
        let old_data = self.data.clone();
        self.data[..self.rows * w].copy_from_slice(&self.original);
        self.data[self.rows * w..].iter_mut().for_each(|x| *x = 0.0);
        let mut assigned = vec![false; self.rows];
        for &col in &old_basis {
            let mut row = None;
            let mut best = 1e-12;
            for i in 0..self.rows {
                let a = self.at(i, col).abs();
                if !assigned[i] && a > best {
                    row = Some(i);
                    best = a;
                }
            }
            let Some(row) = row else {
                self.data = old_data;
                self.basis = old_basis;
                return false;
            };
            self.eliminate(row, col);
            self.basis[row] = col;
            assigned[row] = true;
        }
        self.set_costs();
        true
    }

    fn has_entering_column(&self) -> bool {
        let cr = self.cost_row();
        (0..self.structural).any(|j| self.at(cr, j) < -COST_TOL)
    }

    /// Runs simplex iterations on the current cost row. Only structural
    /// columns may enter. In a phase whose objective is bounded below, a
    /// column with no usable pivot only signals rounding noise in its reduced
    /// cost and is skipped until the next pivot.
    fn iterate(&mut self, tol: &LpTolerances, bounded: bool) -> PhaseOutcome {
        let max_pivots = self.pivots + 50 * (self.rows + self.structural) + 1000;
        let mut degenerate_run = 0;
        let mut skipped = vec![false; self.structural];
        let cr = self.cost_row();
        loop {
            let bland = degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..self.structural {
                let d = self.at(cr, j);
                if d < best && !skipped[j] {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(col) = enter else {
                return PhaseOutcome::Done;
            };
            if self.pivots >= max_pivots {
                return PhaseOutcome::Stalled;
            }

            let leave = if bland {
                self.leaving_row_bland(col, tol)
            } else {
                self.leaving_row_harris(col, tol)
            };
            let Some((row, ratio)) = leave else {
                if bounded || self.at(cr, col) > -1e-9 {
                    skipped[col] = true;
                    continue;
                }
                return PhaseOutcome::Unbounded;
            };
            if ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            skipped.iter_mut().for_each(|s| *s = false);
            self.pivot(row, col);
        }
    }

    /// Smallest entry of column `col` accepted as a pivot.
    fn pivot_floor(&self, col: usize, tol: &LpTolerances) -> f64 {
        let colmax = (0..self.rows).fold(0.0f64, |m, i| m.max(self.at(i, col).abs()));
        tol.pivot.max(RELATIVE_PIVOT * colmax)
    }

    /// Minimum ratio, ties to the lowest basic variable index.
    fn leaving_row_bland(&self, col: usize, tol: &LpTolerances) -> Option<(usize, f64)> {
        let floor = self.pivot_floor(col, tol);
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, col);
            if a > floor {
                let ratio = self.rhs(i).max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some((l, r)) => ratio < r || (ratio == r && self.basis[i] < self.basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        leave
    }

    /// Two-pass ratio test: bound the step with slightly relaxed right-hand
    /// sides, then take the largest pivot within that bound.
    fn leaving_row_harris(&self, col: usize, tol: &LpTolerances) -> Option<(usize, f64)> {
        let floor = self.pivot_floor(col, tol);
        let mut bound = f64::INFINITY;
        for i in 0..self.rows {
            let a = self.at(i, col);
            if a > floor {
                bound = bound.min((self.rhs(i).max(0.0) + HARRIS_SLACK) / a);
            }
        }
        let mut leave: Option<(usize, f64)> = None;
        let mut best_pivot = 0.0;
        for i in 0..self.rows {
            let a = self.at(i, col);
            if a > floor {
                let ratio = self.rhs(i).max(0.0) / a;
                if ratio > bound {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((l, _)) => {
                        a > best_pivot || (a == best_pivot && self.basis[i] < self.basis[l])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                    best_pivot = a;
                }
            }
        }
        leave
    }

    /// Iterates to a terminal state, refactoring to confirm it.
    fn run_phase(&mut self, tol: &LpTolerances, bounded: bool) -> PhaseOutcome {
        let mut unbounded_seen = false;
        for _ in 0..=MAX_REFACTORS {
            let out = self.iterate(tol, bounded);
            match out {
                PhaseOutcome::Done | PhaseOutcome::Unbounded => {
                    if !self.refactor() {
                        return out;
                    }
                    if !self.has_entering_column() {
                        return PhaseOutcome::Done;
                    }
                    if matches!(out, PhaseOutcome::Unbounded) {
                        if unbounded_seen {
                            return PhaseOutcome::Unbounded;
                        }
                        unbounded_seen = true;
                    }
                }
                other => return other,
            }
        }
        PhaseOutcome::Stalled
    }

    fn phase_one(&mut self, tol: &LpTolerances) -> PhaseOutcome {
        let mut costs = vec![0.0; self.structural + self.rows];
        for c in costs.iter_mut().skip(self.structural) {
            *c = 1.0;
        }
        self.costs = costs;
        self.set_costs();
        match self.run_phase(tol, true) {
            PhaseOutcome::Done => {}
            other => return other,
        }
        let scale = (0..self.rows).fold(1.0f64, |a, i| a.max(self.rhs(i).abs()));
        if self.objective_value() > tol.feasibility * scale {
            return PhaseOutcome::Infeasible;
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..self.rows {
            if self.basis[i] >= self.structural {
                let col = (0..self.structural)
                    .filter(|&j| self.at(i, j).abs() > tol.pivot)
                    .max_by(|&a, &b| {
                        self.at(i, a)
                            .abs()
                            .partial_cmp(&self.at(i, b).abs())
                            .unwrap()
                            .then(b.cmp(&a))
                    });
                if let Some(col) = col {
                    self.pivot(i, col);
                }
            }
        }
        PhaseOutcome::Done
    }

    fn phase_two(&mut self, costs: &[f64], tol: &LpTolerances) -> PhaseOutcome {
        self.costs = costs.to_vec();
        self.set_costs();
        self.run_phase(tol, false)
    }

    /// Simplex multipliers of the original (unsigned) equality rows.
    fn multipliers(&self) -> Vec<f64> {
        let cr = self.cost_row();
        (0..self.rows)
            .map(|i| -self.sign[i] * self.at(cr, self.structural + i))
            .collect()
    }
}
