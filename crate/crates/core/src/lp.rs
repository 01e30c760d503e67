//! Tiny dense linear programming.
//!
//! Two-phase primal simplex on a full tableau with Bland's rule. Instances
//! here have a handful of variables (children of a tree node plus a couple
//! of splits), so a dense tableau is both the simplest and the fastest
//! option, and Bland's rule makes the pivot sequence deterministic and
//! cycle-free, which matters because arbitrage certificates are read off
//! optimal bases.

use crate::error::{Error, Result};

const EPS: f64 = 1e-9;

/// `maximize objective . x` over `x >= 0` subject to equality and
/// upper-bound rows.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub ub: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let scale = self.rows[row][col];
        for x in self.rows[row].iter_mut() {
            *x /= scale;
        }
        let pivot_row = self.rows[row].clone();
        for (r, other) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = other[col];
            if f == 0.0 {
                continue;
            }
            for (x, p) in other.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for (x, p) in self.obj.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule: entering column is the lowest-index improving one,
    /// leaving row breaks ratio ties by the lowest basic variable index.
    fn run(&mut self, allowed: &dyn Fn(usize) -> bool) -> Result<bool> {
        let max_iter = 200 * (self.ncols + self.rows.len() + 4);
        for _ in 0..max_iter {
            let entering = (0..self.ncols).find(|&j| allowed(j) && self.obj[j] < -EPS);
            let Some(col) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][col];
                if a > EPS {
                    let ratio = self.rows[r][self.ncols] / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - EPS
                                || (ratio < lratio + EPS && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return Ok(false);
            };
            self.pivot(row, col);
        }
        Err(Error::InvalidArgument("simplex failed to converge".into()))
    }
}

/// Solves the problem; every structural variable is nonnegative.
pub fn solve(problem: &LpProblem) -> Result<LpSolution> {
    let n = problem.objective.len();
    for (row, _) in problem.eq.iter().chain(&problem.ub) {
        if row.len() != n {
            return Err(Error::InvalidArgument("lp row length mismatch".into()));
        }
    }
    let n_slack = problem.ub.len();
    let m = problem.eq.len() + problem.ub.len();
    let n_art = m;
    let ncols = n + n_slack + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    for (i, (a, b)) in problem.eq.iter().chain(&problem.ub).enumerate() {
        let is_ub = i >= problem.eq.len();
        let mut row = vec![0.0; ncols + 1];
        let flip = if *b < 0.0 { -1.0 } else { 1.0 };
        for (j, &aj) in a.iter().enumerate() {
            row[j] = flip * aj;
        }
        if is_ub {
            row[n + (i - problem.eq.len())] = flip;
        }
        row[n + n_slack + i] = 1.0;
        row[ncols] = flip * b;
        rows.push(row);
        basis.push(n + n_slack + i);
    }

    // Phase I: drive the artificial variables to zero.
    let mut obj = vec![0.0; ncols + 1];
    for j in (n + n_slack)..ncols {
        obj[j] = 1.0;
    }
    let mut t = Tableau {
        rows,
        obj,
        basis,
        ncols,
    };
    for r in 0..m {
        let f = t.obj[t.basis[r]];
        if f != 0.0 {
            let row = t.rows[r].clone();
            for (x, p) in t.obj.iter_mut().zip(&row) {
                *x -= f * p;
            }
        }
    }
    t.run(&|_| true)?;
    if -t.obj[ncols] > 1e-7 {
        return Ok(LpSolution::Infeasible);
    }
    // Pivot any artificial still in the basis onto a structural column.
    for r in 0..m {
        if t.basis[r] >= n + n_slack {
            if let Some(col) = (0..n + n_slack).find(|&j| t.rows[r][j].abs() > EPS) {
                t.pivot(r, col);
            }
        }
    }

    // Phase II on the original objective; artificial columns stay locked out.
    let mut obj = vec![0.0; ncols + 1];
    for (j, &c) in problem.objective.iter().enumerate() {
        obj[j] = -c;
    }
    t.obj = obj;
    for r in 0..m {
        let f = t.obj[t.basis[r]];
        if f != 0.0 {
            let row = t.rows[r].clone();
            for (x, p) in t.obj.iter_mut().zip(&row) {
                *x -= f * p;
            }
        }
    }
    let structural = n + n_slack;
    let bounded = t.run(&|j| j < structural)?;
    if !bounded {
        return Ok(LpSolution::Unbounded);
    }

    let mut x = vec![0.0; n];
    for r in 0..m {
        if t.basis[r] < n {
            x[t.basis[r]] = t.rows[r][ncols].max(0.0);
        }
    }
    let value = problem
        .objective
        .iter()
        .zip(&x)
        .map(|(c, xi)| c * xi)
        .sum();
    Ok(LpSolution::Optimal { x, value })
}

/// Convenience wrapper for problems whose variables are free (split into
/// positive and negative parts internally).
pub fn solve_free(
    objective: &[f64],
    eq: &[(Vec<f64>, f64)],
    ub: &[(Vec<f64>, f64)],
) -> Result<LpSolution> {
    let n = objective.len();
    let split = |row: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * n);
        for &a in row {
            out.push(a);
        }
        for &a in row {
            out.push(-a);
        }
        out
    };
    let problem = LpProblem {
        objective: split(objective),
        eq: eq.iter().map(|(a, b)| (split(a), *b)).collect(),
        ub: ub.iter().map(|(a, b)| (split(a), *b)).collect(),
    };
    match solve(&problem)? {
        LpSolution::Optimal { x, value } => {
            let merged = (0..n).map(|j| x[j] - x[j + n]).collect();
            Ok(LpSolution::Optimal { x: merged, value })
        }
        other => Ok(other),
    }
}
