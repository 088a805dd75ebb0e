//! Revised simplex engine on `min c'x, Ax <= b, x >= 0` with an identity
//! starting basis (slacks, plus artificials for rows with negative rhs).
//!
//! The basis inverse is kept in product form: each pivot appends one eta
//! column, and the file is rebuilt from the basis columns every
//! `REINVERT_EVERY` pivots. The primal loop uses Bland's rule throughout. The
//! dual loop picks the most infeasible row and falls back to Bland's rule
//! after a long run of degenerate pivots.

/// Compressed sparse column.
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseCol {
    pub rows: Vec<u32>,
    pub vals: Vec<f64>,
}

impl SparseCol {
    #[inline]
    fn dot(&self, dense: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.vals)
            .map(|(&r, &v)| dense[r as usize] * v)
            .sum()
    }
}

#[derive(Debug)]
struct Eta {
    row: usize,
    pivot_inv: f64,
    /// Off-pivot entries `(i, -a_i / a_r)`.
    entries: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    Stalled,
}

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-10;
const RATIO_TIE: f64 = 1e-12;
const REFRESH_EVERY: usize = 64;
const REINVERT_EVERY: usize = 96;
const DEGENERATE_RUN: usize = 50;

pub(crate) struct Engine {
    m: usize,
    cols: Vec<SparseCol>,
    /// `twin[j] = Some(k)` when column `j` is exactly `-column k`.
    twin: Vec<Option<usize>>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    artificial: Vec<bool>,
    basis: Vec<usize>,
    /// Basis position of each column, `usize::MAX` when nonbasic.
    position: Vec<usize>,
    x_b: Vec<f64>,
    etas: Vec<Eta>,
    primal_tol: f64,
    pub iterations: usize,
    cap: usize,
    since_reinvert: usize,
}

impl Engine {
    /// Builds the engine from structural columns of `A x <= b`; one slack per
    /// row is appended, and rows with negative rhs get an artificial when
    /// `with_artificials` is set (otherwise the slack basis starts infeasible,
    /// which is what the dual loop expects).
    pub fn new(
        m: usize,
        structural: Vec<SparseCol>,
        twin: Vec<Option<usize>>,
        cost: Vec<f64>,
        mut rhs: Vec<f64>,
        with_artificials: bool,
        primal_tol: f64,
    ) -> Self {
        let n_struct = structural.len();
        let mut cols = structural;
        let mut twin = twin;
        let mut cost = cost;
        let mut artificial = vec![false; n_struct];
        let mut basis = vec![0usize; m];

        let mut flipped = vec![false; m];
        if with_artificials {
            for (i, b) in rhs.iter_mut().enumerate() {
                if *b < 0.0 {
                    flipped[i] = true;
                    *b = -*b;
                }
            }
            if flipped.iter().any(|&f| f) {
                for col in cols.iter_mut() {
                    for (r, v) in col.rows.iter().zip(col.vals.iter_mut()) {
                        if flipped[*r as usize] {
                            *v = -*v;
                        }
                    }
                }
            }
        }
        for (i, &flip) in flipped.iter().enumerate() {
            let j = cols.len();
            cols.push(SparseCol {
                rows: vec![i as u32],
                vals: vec![if flip { -1.0 } else { 1.0 }],
            });
            twin.push(None);
            cost.push(0.0);
            artificial.push(false);
            if !flip {
                basis[i] = j;
            }
        }
        for (i, &flip) in flipped.iter().enumerate() {
            if flip {
                let j = cols.len();
                cols.push(SparseCol {
                    rows: vec![i as u32],
                    vals: vec![1.0],
                });
                twin.push(None);
                cost.push(0.0);
                artificial.push(true);
                basis[i] = j;
            }
        }
        let n = cols.len();
        let mut position = vec![usize::MAX; n];
        for (i, &j) in basis.iter().enumerate() {
            position[j] = i;
        }
        let x_b = rhs.clone();
        Self {
            m,
            cols,
            twin,
            cost,
            rhs,
            artificial,
            basis,
            position,
            x_b,
            etas: Vec::new(),
            primal_tol,
            iterations: 0,
            cap: 50 * (n + m),
            since_reinvert: 0,
        }
    }

    pub fn has_artificials(&self) -> bool {
        self.artificial.iter().any(|&a| a)
    }

    fn ftran(&self, v: &mut [f64]) {
        for eta in &self.etas {
            let t = v[eta.row];
            if t != 0.0 {
                v[eta.row] = t * eta.pivot_inv;
                for &(i, c) in &eta.entries {
                    v[i as usize] += c * t;
                }
            }
        }
    }

    fn btran(&self, y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = y[eta.row] * eta.pivot_inv;
            for &(i, c) in &eta.entries {
                s += y[i as usize] * c;
            }
            y[eta.row] = s;
        }
    }

    fn column_dense(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        for (&r, &val) in self.cols[j].rows.iter().zip(&self.cols[j].vals) {
            v[r as usize] = val;
        }
        self.ftran(&mut v);
        v
    }

    /// Rebuilds the eta file from the current basis columns. Slacks keep
    /// their own rows; other columns take the free row with the largest
    /// entry. The old file is kept if the basis looks singular.
    fn reinvert(&mut self) {
        let m = self.m;
        let old = std::mem::take(&mut self.etas);
        let mut row_taken = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        let mut rest = Vec::new();
        for &j in &self.basis {
            let col = &self.cols[j];
            if col.rows.len() == 1 && !row_taken[col.rows[0] as usize] && col.vals[0].abs() == 1.0 {
                let r = col.rows[0] as usize;
                row_taken[r] = true;
                new_basis[r] = j;
                if col.vals[0] < 0.0 {
                    self.etas.push(Eta { row: r, pivot_inv: -1.0, entries: Vec::new() });
                }
            } else {
                rest.push(j);
            }
        }
        for j in rest {
            let mut v = vec![0.0; m];
            for (&r, &val) in self.cols[j].rows.iter().zip(&self.cols[j].vals) {
                v[r as usize] = val;
            }
            self.ftran(&mut v);
            let mut best: Option<(usize, f64)> = None;
            for (i, &a) in v.iter().enumerate() {
                if !row_taken[i] && best.is_none_or(|(_, b)| a.abs() > b) {
                    best = Some((i, a.abs()));
                }
            }
            let Some((r, _)) = best.filter(|&(_, size)| size > PIVOT_TOL) else {
                self.etas = old;
                return;
            };
            let piv = v[r];
            let entries = v
                .iter()
                .enumerate()
                .filter(|&(i, &a)| i != r && a != 0.0)
                .map(|(i, &a)| (i as u32, -a / piv))
                .collect();
            self.etas.push(Eta { row: r, pivot_inv: 1.0 / piv, entries });
            row_taken[r] = true;
            new_basis[r] = j;
        }
        self.basis = new_basis;
        for (i, &j) in self.basis.iter().enumerate() {
            self.position[j] = i;
        }
        self.since_reinvert = 0;
        self.recompute_primal();
    }

    fn recompute_primal(&mut self) {
        let mut v = self.rhs.clone();
        self.ftran(&mut v);
        self.x_b = v;
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        self.btran(&mut y);
        y
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let y = self.duals(cost);
        self.pricing(&y, cost)
    }

    /// `cost[j] - y . A_j` for every column (zero for basic ones).
    fn pricing(&self, y: &[f64], cost: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.cols.len()];
        for j in 0..self.cols.len() {
            if self.position[j] != usize::MAX {
                continue;
            }
            // y.A_j = -(y.A_k) for a mirrored pair, and y.A_k = cost[k] - d[k]
            let ya = match self.twin[j] {
                Some(k) if k < j && self.position[k] == usize::MAX => -(cost[k] - d[k]),
                _ => self.cols[j].dot(y),
            };
            d[j] = cost[j] - ya;
        }
        d
    }

    /// Row `r` of `B^-1 A` for the nonbasic columns.
    fn pivot_row(&self, r: usize) -> Vec<f64> {
        let mut rho = vec![0.0; self.m];
        rho[r] = 1.0;
        self.btran(&mut rho);
        let mut alpha = vec![0.0; self.cols.len()];
        for j in 0..self.cols.len() {
            if self.position[j] != usize::MAX {
                continue;
            }
            alpha[j] = match self.twin[j] {
                Some(k) if k < j && self.position[k] == usize::MAX => -alpha[k],
                _ => self.cols[j].dot(&rho),
            };
        }
        alpha
    }

    fn pivot(&mut self, r: usize, q: usize, column: &[f64]) {
        let piv = column[r];
        let theta = self.x_b[r] / piv;
        for (x, &a) in self.x_b.iter_mut().zip(column) {
            *x -= theta * a;
        }
        self.x_b[r] = theta;
        let entries = column
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != r && a != 0.0)
            .map(|(i, &a)| (i as u32, -a / piv))
            .collect();
        self.etas.push(Eta {
            row: r,
            pivot_inv: 1.0 / piv,
            entries,
        });
        let leaving = self.basis[r];
        self.position[leaving] = usize::MAX;
        self.basis[r] = q;
        self.position[q] = r;
        self.iterations += 1;
        self.since_reinvert += 1;
        if self.since_reinvert >= REINVERT_EVERY {
            self.reinvert();
        }
    }

    /// Primal simplex with the given costs; artificial columns never enter
    /// and basic artificials block any step that would move them off zero.
    pub fn primal(&mut self, cost: &[f64], block_artificials: bool) -> Outcome {
        loop {
            if self.iterations >= self.cap {
                return Outcome::Stalled;
            }
            if self.iterations % REFRESH_EVERY == 0 {
                self.recompute_primal();
            }
            let y = self.duals(cost);
            // Bland: the lowest-index improving column enters
            let mut entering = None;
            for j in 0..self.cols.len() {
                if self.position[j] != usize::MAX || self.artificial[j] {
                    continue;
                }
                let d = cost[j] - self.cols[j].dot(&y);
                if d < -DUAL_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(q) = entering else {
                return Outcome::Optimal;
            };
            let column = self.column_dense(q);
            let mut best: Option<(f64, usize, usize)> = None;
            for (i, &a) in column.iter().enumerate() {
                let var = self.basis[i];
                let ratio = if block_artificials && self.artificial[var] && a.abs() > PIVOT_TOL {
                    0.0
                } else if a > PIVOT_TOL {
                    self.x_b[i].max(0.0) / a
                } else {
                    continue;
                };
                best = match best {
                    None => Some((ratio, var, i)),
                    Some((br, bv, bi)) => {
                        if ratio < br - RATIO_TIE || (ratio <= br + RATIO_TIE && var < bv) {
                            Some((ratio, var, i))
                        } else {
                            Some((br, bv, bi))
                        }
                    }
                };
            }
            let Some((_, _, r)) = best else {
                return Outcome::Unbounded;
            };
            self.pivot(r, q, &column);
        }
    }

    /// Two-phase primal simplex.
    pub fn two_phase(&mut self) -> Outcome {
        if self.has_artificials() {
            let phase1: Vec<f64> = self
                .artificial
                .iter()
                .map(|&a| if a { 1.0 } else { 0.0 })
                .collect();
            // artificials may leave freely during phase one
            let outcome = self.primal(&phase1, false);
            if outcome != Outcome::Optimal {
                return outcome;
            }
            self.recompute_primal();
            let infeasibility: f64 = self
                .basis
                .iter()
                .zip(&self.x_b)
                .filter(|(&j, _)| self.artificial[j])
                .map(|(_, &x)| x.max(0.0))
                .sum();
            if infeasibility > self.primal_tol {
                return Outcome::Infeasible;
            }
        }
        let cost = self.cost.clone();
        self.primal(&cost, true)
    }

    /// Dual simplex from a dual-feasible basis (all reduced costs >= 0).
    pub fn dual(&mut self) -> Outcome {
        let cost = self.cost.clone();
        let mut d = self.reduced_costs(&cost);
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= self.cap {
                return Outcome::Stalled;
            }
            if self.iterations > 0 && self.iterations % REFRESH_EVERY == 0 {
                self.recompute_primal();
                d = self.reduced_costs(&cost);
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut leaving: Option<(usize, usize)> = None;
            for (i, (&var, &x)) in self.basis.iter().zip(&self.x_b).enumerate() {
                if x >= -self.primal_tol {
                    continue;
                }
                let better = match leaving {
                    None => true,
                    Some((_, v)) if bland => var < v,
                    Some((r, _)) => x < self.x_b[r],
                };
                if better {
                    leaving = Some((i, var));
                }
            }
            let Some((r, _)) = leaving else {
                // confirm with freshly computed values before declaring optimality
                self.recompute_primal();
                if self.x_b.iter().any(|&x| x < -self.primal_tol) {
                    continue;
                }
                d = self.reduced_costs(&cost);
                if d.iter().any(|&v| v < -1e-9) {
                    return self.primal(&cost, false);
                }
                return Outcome::Optimal;
            };
            let alpha = self.pivot_row(r);
            let mut best: Option<(f64, usize)> = None;
            for (j, &a) in alpha.iter().enumerate() {
                if self.position[j] != usize::MAX || a >= -PIVOT_TOL {
                    continue;
                }
                let ratio = d[j].max(0.0) / -a;
                match best {
                    Some((br, _)) if ratio >= br - RATIO_TIE => {}
                    _ => best = Some((ratio, j)),
                }
            }
            let Some((_, q)) = best else {
                return Outcome::Infeasible;
            };
            let column = self.column_dense(q);
            if column[r].abs() <= PIVOT_TOL {
                // row and column disagree on the pivot: the factorization
                // has drifted, so rebuild values and try again
                self.recompute_primal();
                d = self.reduced_costs(&cost);
                if self.iterations >= self.cap {
                    return Outcome::Stalled;
                }
                self.iterations += 1;
                continue;
            }
            let theta_d = d[q] / column[r];
            if theta_d.abs() <= RATIO_TIE {
                degenerate += 1;
            } else if !bland {
                degenerate = 0;
            }
            for (j, &a) in alpha.iter().enumerate() {
                if self.position[j] == usize::MAX && a != 0.0 {
                    d[j] -= theta_d * a;
                }
            }
            let leaving_var = self.basis[r];
            let reinverts = self.since_reinvert + 1 >= REINVERT_EVERY;
            self.pivot(r, q, &column);
            d[q] = 0.0;
            d[leaving_var] = -theta_d;
            if reinverts {
                d = self.reduced_costs(&cost);
            }
        }
    }

    /// Values of all columns (basic from `x_b`, nonbasic at zero).
    pub fn values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.cols.len()];
        for (&j, &v) in self.basis.iter().zip(&self.x_b) {
            x[j] = v;
        }
        x
    }
}
