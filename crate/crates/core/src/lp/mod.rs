//! Linear programs with general row relations and variable bounds.
//!
//! [`solve_lp`] reduces the problem to `min c'x, Ax <= b, x >= 0` (free
//! variables are split into positive and negative parts, finite bounds are
//! shifted or turned into rows), equilibrates rows and columns, and runs the
//! revised simplex in [`simplex`]. When every reduced cost of the slack basis
//! is nonnegative the dual simplex is used directly; otherwise a two-phase
//! primal simplex runs.

mod simplex;

use std::fmt;

use crate::error::{Error, Result};
use simplex::{Engine, Outcome, SparseCol};

/// Default feasibility tolerance.
pub const DEFAULT_LP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpConstraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min cost . x` subject to row constraints and per-variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormLp {
    pub cost: Vec<f64>,
    pub constraints: Vec<LpConstraint>,
    /// `(lower, upper)`, either of which may be infinite.
    pub bounds: Vec<(f64, f64)>,
}

impl StandardFormLp {
    /// A problem with the given cost and all variables free.
    pub fn new(cost: Vec<f64>) -> Self {
        let n = cost.len();
        Self {
            cost,
            constraints: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn add_constraint(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(LpConstraint {
            coefficients,
            relation,
            rhs,
        });
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.bounds[var] = (lower, upper);
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.cost.len();
        if self.bounds.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} bounds for {m} variables",
                self.bounds.len()
            )));
        }
        if self.cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("cost entries must be finite".into()));
        }
        for (k, row) in self.constraints.iter().enumerate() {
            if row.coefficients.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "constraint {k} has {} coefficients, expected {m}",
                    row.coefficients.len()
                )));
            }
            if !row.rhs.is_finite() || row.coefficients.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "constraint {k} has non-finite entries"
                )));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidArgument(format!(
                    "variable {j} has invalid bounds ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub primal: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
}

/// Largest violation of any row or bound at `x` (0 when feasible).
///
/// Evaluated directly from the problem data, independently of the solver.
pub fn max_violation(lp: &StandardFormLp, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for row in &lp.constraints {
        let lhs: f64 = row.coefficients.iter().zip(x).map(|(a, v)| a * v).sum();
        let v = match row.relation {
            Relation::Le => lhs - row.rhs,
            Relation::Ge => row.rhs - lhs,
            Relation::Eq => (lhs - row.rhs).abs(),
        };
        worst = worst.max(v);
    }
    for (&(lo, hi), &v) in lp.bounds.iter().zip(x) {
        worst = worst.max(lo - v).max(v - hi);
    }
    worst
}

/// How an original variable maps onto internal nonnegative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = offset + sign * x'`
    Shifted { col: usize, sign: f64, offset: f64 },
    /// `x = x+ - x-`
    Split { pos: usize, neg: usize },
}

/// Solves `lp`; `tol` is the primal feasibility tolerance.
pub fn solve_lp(lp: &StandardFormLp, tol: f64) -> Result<LpSolution> {
    lp.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let nvar = lp.num_vars();
    let infeasible = || LpSolution {
        primal: vec![0.0; nvar],
        objective: f64::NAN,
        status: LpStatus::Infeasible,
        iterations: 0,
    };
    if lp.bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(infeasible());
    }

    // variable substitution
    let mut maps = Vec::with_capacity(nvar);
    let mut ncols = 0usize;
    let mut col_cost = Vec::new();
    let mut twin = Vec::new();
    let mut extra_rows: Vec<(usize, f64)> = Vec::new();
    for (k, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let c = lp.cost[k];
        if lo.is_finite() {
            maps.push(VarMap::Shifted {
                col: ncols,
                sign: 1.0,
                offset: lo,
            });
            if hi.is_finite() {
                extra_rows.push((ncols, hi - lo));
            }
            col_cost.push(c);
            twin.push(None);
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Shifted {
                col: ncols,
                sign: -1.0,
                offset: hi,
            });
            col_cost.push(-c);
            twin.push(None);
            ncols += 1;
        } else {
            maps.push(VarMap::Split {
                pos: ncols,
                neg: ncols + 1,
            });
            col_cost.push(c);
            col_cost.push(-c);
            twin.push(None);
            twin.push(Some(ncols));
            ncols += 2;
        }
    }

    // rows in `<=` form
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs = Vec::new();
    for con in &lp.constraints {
        let mut entries = Vec::new();
        let mut b = con.rhs;
        for (k, &a) in con.coefficients.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[k] {
                VarMap::Shifted { col, sign, offset } => {
                    b -= a * offset;
                    entries.push((col, a * sign));
                }
                VarMap::Split { pos, neg } => {
                    entries.push((pos, a));
                    entries.push((neg, -a));
                }
            }
        }
        match con.relation {
            Relation::Le => {
                rows.push(entries);
                rhs.push(b);
            }
            Relation::Ge => {
                rows.push(entries.into_iter().map(|(j, a)| (j, -a)).collect());
                rhs.push(-b);
            }
            Relation::Eq => {
                rows.push(entries.iter().map(|&(j, a)| (j, -a)).collect());
                rhs.push(-b);
                rows.push(entries);
                rhs.push(b);
            }
        }
    }
    for (col, width) in extra_rows {
        rows.push(vec![(col, 1.0)]);
        rhs.push(width);
    }
    let m = rows.len();

    // equilibration: rows then columns to unit max-abs
    let mut row_scale = vec![1.0; m];
    for (i, row) in rows.iter().enumerate() {
        let big = row.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
        if big > 0.0 {
            row_scale[i] = 1.0 / big;
        }
    }
    let mut col_max = vec![0.0f64; ncols];
    for (i, row) in rows.iter().enumerate() {
        for &(j, a) in row {
            col_max[j] = col_max[j].max((a * row_scale[i]).abs());
        }
    }
    let col_scale: Vec<f64> = col_max
        .iter()
        .map(|&c| if c > 0.0 { 1.0 / c } else { 1.0 })
        .collect();

    let mut cols = vec![SparseCol::default(); ncols];
    for (i, row) in rows.iter().enumerate() {
        for &(j, a) in row {
            let v = a * row_scale[i] * col_scale[j];
            if v != 0.0 {
                cols[j].rows.push(i as u32);
                cols[j].vals.push(v);
            }
        }
    }
    let scaled_cost: Vec<f64> = col_cost.iter().zip(&col_scale).map(|(c, s)| c * s).collect();
    let scaled_rhs: Vec<f64> = rhs.iter().zip(&row_scale).map(|(b, r)| b * r).collect();

    // Columns with no rows and negative cost make the problem unbounded
    // whenever it is feasible; the engine handles that through pricing.
    let dual_feasible = scaled_cost.iter().all(|&c| c >= 0.0);
    let mut engine = Engine::new(
        m,
        cols,
        twin,
        scaled_cost,
        scaled_rhs,
        !dual_feasible,
        tol * 1e-2,
    );
    let outcome = if dual_feasible {
        engine.dual()
    } else {
        engine.two_phase()
    };
    let iterations = engine.iterations;
    let status = match outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Infeasible => LpStatus::Infeasible,
        Outcome::Unbounded => LpStatus::Unbounded,
        Outcome::Stalled => return Err(Error::SolverStalled { iterations }),
    };
    if status != LpStatus::Optimal {
        return Ok(LpSolution {
            primal: vec![0.0; nvar],
            objective: if status == LpStatus::Unbounded {
                f64::NEG_INFINITY
            } else {
                f64::NAN
            },
            status,
            iterations,
        });
    }

    let values = engine.values();
    let internal: Vec<f64> = (0..ncols).map(|j| values[j].max(0.0) * col_scale[j]).collect();
    let primal: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shifted { col, sign, offset } => offset + sign * internal[col],
            VarMap::Split { pos, neg } => internal[pos] - internal[neg],
        })
        .collect();
    let objective = lp.objective(&primal);
    Ok(LpSolution {
        primal,
        objective,
        status,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_free_variable() {
        // min x s.t. x >= 1
        let mut lp = StandardFormLp::new(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Ge, 1.0);
        let sol = solve_lp(&lp, 1e-8).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[0] - 1.0).abs() < 1e-9);
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_vertex_problem() {
        // min x + y s.t. x + 2y >= 2, x, y >= 0 -> (0, 1)
        let mut lp = StandardFormLp::new(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 2.0], Relation::Ge, 2.0);
        lp.set_bounds(0, 0.0, f64::INFINITY);
        lp.set_bounds(1, 0.0, f64::INFINITY);
        let sol = solve_lp(&lp, 1e-8).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.primal[0].abs() < 1e-9);
        assert!((sol.primal[1] - 1.0).abs() < 1e-9);
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = StandardFormLp::new(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, -1.0);
        lp.add_constraint(vec![1.0], Relation::Ge, 0.0);
        assert_eq!(solve_lp(&lp, 1e-8).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = StandardFormLp::new(vec![-1.0, 0.0]);
        lp.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0);
        lp.set_bounds(0, 0.0, f64::INFINITY);
        lp.set_bounds(1, 0.0, f64::INFINITY);
        assert_eq!(solve_lp(&lp, 1e-8).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_upper_bounds() {
        // max x + y s.t. x + y = 3, x <= 1, y in [0, 5]
        let mut lp = StandardFormLp::new(vec![-1.0, -2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 3.0);
        lp.set_bounds(0, f64::NEG_INFINITY, 1.0);
        lp.set_bounds(1, 0.0, 5.0);
        let sol = solve_lp(&lp, 1e-8).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // y as large as possible: y = 5, x = -2
        assert!((sol.primal[1] - 5.0).abs() < 1e-9);
        assert!((sol.primal[0] + 2.0).abs() < 1e-9);
        assert!(max_violation(&lp, &sol.primal) < 1e-9);
    }

    #[test]
    fn crossed_bounds_are_infeasible() {
        let mut lp = StandardFormLp::new(vec![1.0]);
        lp.set_bounds(0, 2.0, 1.0);
        assert_eq!(solve_lp(&lp, 1e-8).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn malformed_rows_rejected() {
        let mut lp = StandardFormLp::new(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve_lp(&lp, 1e-8), Err(Error::DimensionMismatch(_))));
        let mut lp = StandardFormLp::new(vec![1.0]);
        lp.add_constraint(vec![f64::NAN], Relation::Le, 1.0);
        assert!(solve_lp(&lp, 1e-8).is_err());
    }

    #[test]
    fn degenerate_l1_problem_uses_dual_path() {
        // min |a| + |b| s.t. a + b >= 1, a - b <= 0.5 (split form, all costs >= 0)
        let mut lp = StandardFormLp::new(vec![1.0, 1.0, 0.0, 0.0]);
        // u_a >= |a|, u_b >= |b|
        lp.add_constraint(vec![-1.0, 0.0, 1.0, 0.0], Relation::Le, 0.0);
        lp.add_constraint(vec![-1.0, 0.0, -1.0, 0.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.0, -1.0, 0.0, 1.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.0, -1.0, 0.0, -1.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.0, 0.0, 1.0, 1.0], Relation::Ge, 1.0);
        lp.add_constraint(vec![0.0, 0.0, 1.0, -1.0], Relation::Le, 0.5);
        lp.set_bounds(0, 0.0, f64::INFINITY);
        lp.set_bounds(1, 0.0, f64::INFINITY);
        let sol = solve_lp(&lp, 1e-8).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!(max_violation(&lp, &sol.primal) < 1e-9);
    }
}
