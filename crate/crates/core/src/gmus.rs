//! The generalized matrix uncertainty selector: IRLS with one linear program
//! per outer step. δ = 0 gives the generalized Dantzig selector.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::family::GlmFamily;
use crate::irls::{
    irls_weights_and_response, resolve_start, run_irls, FitResult, InitialBeta, IrlsConfig,
    IrlsStep, Problem, StepOutcome,
};
use crate::lp::{solve_lp, LpStatus, Relation, StandardFormLp};

fn gram_and_moment(w_tilde: ArrayView2<'_, f64>, z_tilde: ArrayView1<'_, f64>) -> (Array2<f64>, Array1<f64>) {
    let n = w_tilde.nrows() as f64;
    let gram = w_tilde.t().dot(&w_tilde) / n;
    let moment = w_tilde.t().dot(&z_tilde) / n;
    (gram, moment)
}

fn check_weighted(w_tilde: ArrayView2<'_, f64>, z_tilde: ArrayView1<'_, f64>, v1: ArrayView1<'_, f64>) -> Result<()> {
    if w_tilde.nrows() != z_tilde.len() || w_tilde.nrows() != v1.len() {
        return Err(Error::DimensionMismatch(format!(
            "weighted design has {} rows, response {} and weights {}",
            w_tilde.nrows(),
            z_tilde.len(),
            v1.len()
        )));
    }
    Ok(())
}

/// LP over `(u, β)` whose solution is the GMUS step:
///
/// ```text
/// min 1ᵀu  s.t.  β − u ≤ 0,  −β − u ≤ 0,
///               ±Gβ − c(1ᵀu)1 ≤ λ1 ± b
/// ```
///
/// with `G = W̃ᵀW̃/n`, `b = W̃ᵀz̃/n` and `c = δ‖V¹‖₂/√n`.
pub fn build_gmus_lp(
    w_tilde: ArrayView2<'_, f64>,
    z_tilde: ArrayView1<'_, f64>,
    v1: ArrayView1<'_, f64>,
    lambda: f64,
    delta: f64,
) -> Result<StandardFormLp> {
    build_gmus_lp_with_intercept(w_tilde, z_tilde, v1, lambda, delta, false)
}

/// As [`build_gmus_lp`]; with `intercept`, β₀ is unpenalized and its score
/// row becomes an equality.
pub fn build_gmus_lp_with_intercept(
    w_tilde: ArrayView2<'_, f64>,
    z_tilde: ArrayView1<'_, f64>,
    v1: ArrayView1<'_, f64>,
    lambda: f64,
    delta: f64,
    intercept: bool,
) -> Result<StandardFormLp> {
    check_weighted(w_tilde, z_tilde, v1)?;
    let p = w_tilde.ncols();
    let n = w_tilde.nrows() as f64;
    let (gram, b) = gram_and_moment(w_tilde, z_tilde);
    let c = delta * v1.dot(&v1).sqrt() / n.sqrt();
    let skip = usize::from(intercept);

    let mut cost = vec![1.0; p];
    cost.extend(std::iter::repeat(0.0).take(p));
    let mut lp = StandardFormLp::new(cost);
    for j in 0..p {
        lp.set_bounds(j, 0.0, f64::INFINITY);
    }
    if intercept {
        lp.set_bounds(0, 0.0, 0.0);
    }
    for sign in [1.0, -1.0] {
        for j in skip..p {
            let mut row = vec![0.0; 2 * p];
            row[j] = -1.0;
            row[p + j] = sign;
            lp.add_constraint(row, Relation::Le, 0.0);
        }
    }
    if intercept {
        let mut row = vec![0.0; 2 * p];
        for k in 0..p {
            row[p + k] = gram[[0, k]];
        }
        lp.add_constraint(row, Relation::Eq, b[0]);
    }
    for sign in [1.0, -1.0] {
        for j in skip..p {
            let mut row = vec![0.0; 2 * p];
            for k in skip..p {
                row[k] = -c;
            }
            for k in 0..p {
                row[p + k] = sign * gram[[j, k]];
            }
            lp.add_constraint(row, Relation::Le, lambda + sign * b[j]);
        }
    }
    Ok(lp)
}

/// Compact Dantzig-selector LP over `(β⁺, β⁻) ≥ 0`:
/// `min 1ᵀ(β⁺ + β⁻)` subject to `|b − G(β⁺ − β⁻)| ≤ λ` componentwise.
pub fn build_gds_lp(
    w_tilde: ArrayView2<'_, f64>,
    z_tilde: ArrayView1<'_, f64>,
    lambda: f64,
    intercept: bool,
) -> Result<StandardFormLp> {
    let ones = Array1::ones(w_tilde.nrows());
    build_compact_lp(w_tilde, z_tilde, ones.view(), lambda, 0.0, intercept)
}

/// The GMUS program after substituting `β = β⁺ − β⁻`, `u = β⁺ + β⁻`.
///
/// The substitution maps the feasible set of [`build_gmus_lp`] one-to-one onto
/// `{(β⁺, β⁻) ≥ 0 : ±G(β⁺ − β⁻) − c 1ᵀ(β⁺ + β⁻) ≤ λ ± b}` with the same
/// objective, so both programs share their optimal β. This one has half the
/// rows and no coupling block.
pub fn build_compact_lp(
    w_tilde: ArrayView2<'_, f64>,
    z_tilde: ArrayView1<'_, f64>,
    v1: ArrayView1<'_, f64>,
    lambda: f64,
    delta: f64,
    intercept: bool,
) -> Result<StandardFormLp> {
    check_weighted(w_tilde, z_tilde, v1)?;
    let p = w_tilde.ncols();
    let n = w_tilde.nrows() as f64;
    let (gram, b) = gram_and_moment(w_tilde, z_tilde);
    let c = delta * v1.dot(&v1).sqrt() / n.sqrt();
    let skip = usize::from(intercept);
    let mut cost = vec![1.0; 2 * p];
    if intercept {
        cost[0] = 0.0;
        cost[p] = 0.0;
    }
    let mut lp = StandardFormLp::new(cost);
    for j in 0..2 * p {
        lp.set_bounds(j, 0.0, f64::INFINITY);
    }
    let row_of = |j: usize, sign: f64, coupling: f64| {
        let mut row = vec![0.0; 2 * p];
        for k in 0..p {
            let pen = if k < skip { 0.0 } else { coupling };
            row[k] = sign * gram[[j, k]] - pen;
            row[p + k] = -sign * gram[[j, k]] - pen;
        }
        row
    };
    if intercept {
        lp.add_constraint(row_of(0, 1.0, 0.0), Relation::Eq, b[0]);
    }
    for sign in [1.0, -1.0] {
        for j in skip..p {
            lp.add_constraint(row_of(j, sign, c), Relation::Le, lambda + sign * b[j]);
        }
    }
    Ok(lp)
}

fn solve_checked(lp: &StandardFormLp, tol: f64) -> Result<Vec<f64>> {
    let sol = solve_lp(lp, tol)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.primal),
        LpStatus::Infeasible => Err(Error::LpFailure("infeasible")),
        LpStatus::Unbounded => Err(Error::LpFailure("unbounded")),
    }
}

/// Which of the two equivalent GMUS programs a step solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LpForm {
    /// [`build_gmus_lp`], variables `(u, β)`.
    Coupled,
    /// [`build_compact_lp`], variables `(β⁺, β⁻)`.
    #[default]
    Compact,
}

/// Outer GMUS step.
pub struct GmusStep<'a> {
    pub problem: Problem<'a>,
    pub lp_tol: f64,
    pub form: LpForm,
}

impl<'a> IrlsStep<'a> for GmusStep<'a> {
    fn step(&self, beta: ArrayView1<'_, f64>) -> Result<StepOutcome> {
        let pr = &self.problem;
        let q = irls_weights_and_response(pr.w, pr.y, beta, pr.family, 1)?;
        let (w_t, z_t, v1) = (q.w_tilde.view(), q.z_tilde.view(), q.v[0].view());
        let p = beta.len();
        let beta = match self.form {
            LpForm::Coupled => {
                let lp = build_gmus_lp_with_intercept(w_t, z_t, v1, pr.lambda, pr.delta, pr.intercept)?;
                Array1::from(solve_checked(&lp, self.lp_tol)?[p..].to_vec())
            }
            LpForm::Compact => {
                let lp = build_compact_lp(w_t, z_t, v1, pr.lambda, pr.delta, pr.intercept)?;
                let x = solve_checked(&lp, self.lp_tol)?;
                (0..p).map(|j| x[j] - x[p + j]).collect()
            }
        };
        Ok(StepOutcome {
            beta,
            inner_sweeps: None,
            inner_converged: true,
        })
    }

    fn problem(&self) -> Problem<'a> {
        self.problem
    }
}

/// Outer step of the generalized Dantzig selector through the compact program.
pub struct GdsStep<'a> {
    pub problem: Problem<'a>,
    pub lp_tol: f64,
}

impl<'a> IrlsStep<'a> for GdsStep<'a> {
    fn step(&self, beta: ArrayView1<'_, f64>) -> Result<StepOutcome> {
        let pr = &self.problem;
        let q = irls_weights_and_response(pr.w, pr.y, beta, pr.family, 1)?;
        let lp = build_gds_lp(q.w_tilde.view(), q.z_tilde.view(), pr.lambda, pr.intercept)?;
        let x = solve_checked(&lp, self.lp_tol)?;
        let p = beta.len();
        let beta = (0..p).map(|j| x[j] - x[p + j]).collect::<Array1<f64>>();
        Ok(StepOutcome {
            beta,
            inner_sweeps: None,
            inner_converged: true,
        })
    }

    fn problem(&self) -> Problem<'a> {
        self.problem
    }
}

/// Fits GMUS at (λ, δ). The δ = 0 case solves the GDS through the same
/// `(u, β)` program.
pub fn gmus_fit(
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    lambda: f64,
    delta: f64,
    config: &IrlsConfig,
) -> Result<FitResult> {
    config.validate()?;
    let problem = Problem { w, y, family, lambda, delta, intercept: config.intercept };
    problem.validate()?;
    let start = match &config.initial_beta {
        InitialBeta::Zero => Array1::zeros(w.ncols()),
        InitialBeta::Given(b) => resolve_start(w.ncols(), b)?,
        InitialBeta::GdsStart if delta == 0.0 => Array1::zeros(w.ncols()),
        InitialBeta::GdsStart => gds_fit(w, y, family, lambda, config)?.beta,
    };
    run_irls(&GmusStep { problem, lp_tol: config.lp_tol, form: LpForm::Compact }, start, config)
}

/// Fits the generalized Dantzig selector with the compact `(β⁺, β⁻)` program.
pub fn gds_fit(
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    lambda: f64,
    config: &IrlsConfig,
) -> Result<FitResult> {
    config.validate()?;
    let problem = Problem { w, y, family, lambda, delta: 0.0, intercept: config.intercept };
    problem.validate()?;
    let start = match &config.initial_beta {
        InitialBeta::Given(b) => resolve_start(w.ncols(), b)?,
        _ => Array1::zeros(w.ncols()),
    };
    run_irls(&GdsStep { problem, lp_tol: config.lp_tol }, start, config)
}
