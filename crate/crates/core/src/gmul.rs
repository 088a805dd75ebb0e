//! The generalized matrix uncertainty lasso: IRLS with an inner cyclic
//! coordinate-descent loop. δ = 0 gives the L1-penalized GLM (lasso).

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::family::{GlmFamily, WEIGHT_FLOOR};
use crate::irls::{
    irls_weights_and_response, linear_predictor, penalized_l1, resolve_start, run_irls, score,
    FitResult, InitialBeta, IrlsConfig, IrlsStep, Problem, StepOutcome,
};

/// `S(a, b)`: shrinks `a` toward zero by `b`.
pub fn soft_threshold(a: f64, b: f64) -> f64 {
    if b >= a.abs() {
        0.0
    } else if a > 0.0 {
        a - b
    } else {
        a + b
    }
}

/// `γ₁ = δ‖V¹‖₂ / (2√n)`.
pub fn compute_gamma(v1: ArrayView1<'_, f64>, delta: f64, n: usize) -> f64 {
    delta * v1.dot(&v1).sqrt() / (2.0 * (n as f64).sqrt())
}

/// `ω_j = λ + γ₁ Σ_{l≠j} |β_l|`.
pub fn compute_omega(beta: ArrayView1<'_, f64>, lambda: f64, gamma1: f64) -> Array1<f64> {
    omega_with_intercept(beta, lambda, gamma1, false)
}

fn omega_with_intercept(beta: ArrayView1<'_, f64>, lambda: f64, gamma1: f64, intercept: bool) -> Array1<f64> {
    let l1 = penalized_l1(beta, intercept);
    let mut omega = beta.mapv(|b| lambda + gamma1 * (l1 - b.abs()));
    if intercept {
        omega[0] = 0.0;
    }
    omega
}

/// Inner-loop result.
#[derive(Debug, Clone, PartialEq)]
pub struct CdOutcome {
    pub beta: Array1<f64>,
    /// Full passes over all coordinates.
    pub sweeps: usize,
    /// Passes restricted to the nonzero coordinates (active-set variant).
    pub active_passes: usize,
    pub converged: bool,
}

/// Value of the reweighted inner objective
/// `−(1/n) z̃ᵀW̃β + βᵀ((1/2n)W̃ᵀW̃ + γ₁I)β + Σ ω_j|β_j|`.
pub fn surrogate_objective(
    w_tilde: ArrayView2<'_, f64>,
    z_tilde: ArrayView1<'_, f64>,
    gamma1: f64,
    omega: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
) -> f64 {
    let ridge = Array1::from_elem(beta.len(), gamma1);
    surrogate_with_ridge(w_tilde, z_tilde, ridge.view(), omega, beta)
}

fn surrogate_with_ridge(
    w_tilde: ArrayView2<'_, f64>,
    z_tilde: ArrayView1<'_, f64>,
    half_ridge: ArrayView1<'_, f64>,
    omega: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
) -> f64 {
    let n = w_tilde.nrows() as f64;
    let fitted = linear_predictor(w_tilde, beta);
    let linear = -z_tilde.dot(&fitted) / n;
    let quad = fitted.dot(&fitted) / (2.0 * n);
    let pen: f64 = beta
        .iter()
        .zip(half_ridge.iter().zip(omega.iter()))
        .map(|(b, (g, o))| g * b * b + o * b.abs())
        .sum();
    linear + quad + pen
}

fn check_cd_inputs(
    w_tilde: ArrayView2<'_, f64>,
    z_tilde: ArrayView1<'_, f64>,
    omega: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
) -> Result<()> {
    let p = w_tilde.ncols();
    if w_tilde.nrows() != z_tilde.len() || omega.len() != p || beta.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "weighted design {}x{p}, response {}, omega {}, beta {}",
            w_tilde.nrows(),
            z_tilde.len(),
            omega.len(),
            beta.len()
        )));
    }
    if omega.iter().any(|&o| !(o >= 0.0)) {
        return Err(Error::InvalidArgument("omega must be nonnegative".into()));
    }
    Ok(())
}

/// Cyclic coordinate descent on the reweighted objective with penalty
/// weights `omega`, starting at `beta_init`. Stops when the L2 change over a
/// sweep drops below `inner_tol`.
pub fn coordinate_descent(
    w_tilde: ArrayView2<'_, f64>,
    z_tilde: ArrayView1<'_, f64>,
    gamma1: f64,
    omega: ArrayView1<'_, f64>,
    beta_init: ArrayView1<'_, f64>,
    inner_tol: f64,
    inner_max: usize,
) -> Result<CdOutcome> {
    check_cd_inputs(w_tilde, z_tilde, omega, beta_init)?;
    if !(gamma1 >= 0.0) {
        return Err(Error::InvalidArgument("gamma1 must be nonnegative".into()));
    }
    let ridge = Array1::from_elem(beta_init.len(), 2.0 * gamma1);
    let settings = CdSettings { tol: inner_tol, max_sweeps: inner_max, active_set: false };
    Ok(cd_core(w_tilde, z_tilde, ridge.view(), omega, beta_init, settings, |_| {}))
}

/// As [`coordinate_descent`], calling `after_sweep` with the iterate at the
/// end of every sweep.
pub fn coordinate_descent_traced(
    w_tilde: ArrayView2<'_, f64>,
    z_tilde: ArrayView1<'_, f64>,
    gamma1: f64,
    omega: ArrayView1<'_, f64>,
    beta_init: ArrayView1<'_, f64>,
    inner_tol: f64,
    inner_max: usize,
    after_sweep: impl FnMut(&Array1<f64>),
) -> Result<CdOutcome> {
    check_cd_inputs(w_tilde, z_tilde, omega, beta_init)?;
    let ridge = Array1::from_elem(beta_init.len(), 2.0 * gamma1);
    let settings = CdSettings { tol: inner_tol, max_sweeps: inner_max, active_set: false };
    Ok(cd_core(w_tilde, z_tilde, ridge.view(), omega, beta_init, settings, after_sweep))
}

/// As [`coordinate_descent`], but between full sweeps cycles over the
/// current nonzero coordinates only until they settle. Convergence is still
/// declared on a full sweep; `sweeps` counts full sweeps only.
pub fn coordinate_descent_active_set(
    w_tilde: ArrayView2<'_, f64>,
    z_tilde: ArrayView1<'_, f64>,
    gamma1: f64,
    omega: ArrayView1<'_, f64>,
    beta_init: ArrayView1<'_, f64>,
    inner_tol: f64,
    inner_max: usize,
) -> Result<CdOutcome> {
    check_cd_inputs(w_tilde, z_tilde, omega, beta_init)?;
    if !(gamma1 >= 0.0) {
        return Err(Error::InvalidArgument("gamma1 must be nonnegative".into()));
    }
    let ridge = Array1::from_elem(beta_init.len(), 2.0 * gamma1);
    let settings = CdSettings { tol: inner_tol, max_sweeps: inner_max, active_set: true };
    Ok(cd_core(w_tilde, z_tilde, ridge.view(), omega, beta_init, settings, |_| {}))
}

#[derive(Debug, Clone, Copy)]
struct CdSettings {
    tol: f64,
    max_sweeps: usize,
    active_set: bool,
}

struct CdState<'a> {
    w_tilde: ArrayView2<'a, f64>,
    col_sq: Vec<f64>,
    ridge: ArrayView1<'a, f64>,
    omega: ArrayView1<'a, f64>,
    beta: Array1<f64>,
    resid: Array1<f64>,
    n: f64,
}

impl CdState<'_> {
    /// Exact minimization in coordinate `j`; returns the squared change.
    fn update(&mut self, j: usize) -> f64 {
        let col = self.w_tilde.column(j);
        let old = self.beta[j];
        let denom = self.col_sq[j] + self.ridge[j];
        let new = if denom > 0.0 {
            let a = col.dot(&self.resid) / self.n + self.col_sq[j] * old;
            soft_threshold(a, self.omega[j]) / denom
        } else {
            0.0
        };
        let d = new - old;
        if d == 0.0 {
            return 0.0;
        }
        self.resid.scaled_add(-d, &col);
        self.beta[j] = new;
        d * d
    }
}

fn cd_core(
    w_tilde: ArrayView2<'_, f64>,
    z_tilde: ArrayView1<'_, f64>,
    ridge: ArrayView1<'_, f64>,
    omega: ArrayView1<'_, f64>,
    beta_init: ArrayView1<'_, f64>,
    settings: CdSettings,
    mut after_sweep: impl FnMut(&Array1<f64>),
) -> CdOutcome {
    let n = w_tilde.nrows() as f64;
    let beta = beta_init.to_owned();
    let resid = &z_tilde - &linear_predictor(w_tilde, beta.view());
    let mut st = CdState {
        w_tilde,
        col_sq: w_tilde.axis_iter(Axis(1)).map(|c| c.dot(&c) / n).collect(),
        ridge,
        omega,
        beta,
        resid,
        n,
    };
    let p = st.beta.len();
    let mut sweeps = 0;
    let mut active_passes = 0;
    let mut converged = false;
    while sweeps < settings.max_sweeps {
        sweeps += 1;
        let change: f64 = (0..p).map(|j| st.update(j)).sum();
        after_sweep(&st.beta);
        if change.sqrt() < settings.tol {
            converged = true;
            break;
        }
        if settings.active_set {
            let active: Vec<usize> = (0..p).filter(|&j| st.beta[j] != 0.0).collect();
            for _ in 0..settings.max_sweeps {
                active_passes += 1;
                let change: f64 = active.iter().map(|&j| st.update(j)).sum();
                if change.sqrt() < settings.tol {
                    break;
                }
            }
        }
    }
    CdOutcome { beta: st.beta, sweeps, active_passes, converged }
}

/// Outer GMUL step: reweight, recompute γ₁ and ω at the current iterate, then
/// run the inner loop warm-started from it.
pub struct GmulStep<'a> {
    pub problem: Problem<'a>,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub active_set: bool,
}

impl<'a> IrlsStep<'a> for GmulStep<'a> {
    fn step(&self, beta: ArrayView1<'_, f64>) -> Result<StepOutcome> {
        let pr = &self.problem;
        let q = irls_weights_and_response(pr.w, pr.y, beta, pr.family, 1)?;
        let gamma1 = compute_gamma(q.v[0].view(), pr.delta, pr.w.nrows());
        let omega = omega_with_intercept(beta, pr.lambda, gamma1, pr.intercept);
        let mut ridge = Array1::from_elem(beta.len(), 2.0 * gamma1);
        if pr.intercept {
            ridge[0] = 0.0;
        }
        let out = cd_core(
            q.w_tilde.view(),
            q.z_tilde.view(),
            ridge.view(),
            omega.view(),
            beta,
            CdSettings { tol: self.inner_tol, max_sweeps: self.inner_max, active_set: self.active_set },
            |_| {},
        );
        Ok(StepOutcome {
            beta: out.beta,
            inner_sweeps: Some(out.sweeps),
            inner_converged: out.converged,
        })
    }

    fn problem(&self) -> Problem<'a> {
        self.problem
    }
}

/// Fits GMUL at (λ, δ); δ = 0 is the lasso.
pub fn gmul_fit(
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
        InitialBeta::GdsStart => gmul_fit(w, y, family, lambda, 0.0, config)?.beta,
    };
    let stepper = GmulStep {
        problem,
        inner_tol: config.inner_tol,
        inner_max: config.inner_max,
        active_set: config.active_set,
    };
    let mut fit = run_irls(&stepper, start, config)?;
    let cert = kkt_check_with_intercept(fit.beta.view(), w, y, family, lambda, delta, config.intercept)?;
    fit.kkt_residual = Some(cert.max_residual);
    Ok(fit)
}

/// The L1-penalized GLM.
pub fn lasso_fit(
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    lambda: f64,
    config: &IrlsConfig,
) -> Result<FitResult> {
    gmul_fit(w, y, family, lambda, 0.0, config)
}

/// Stationarity diagnostics at `beta`, with the score taken as
/// `s_j = (1/n) Σ_i w_ij (y_i − μ(w_iᵀβ))` so that `s_j = τ_j · bound_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktCertificate {
    pub tau: Array1<f64>,
    /// Largest violation of `s_j = τ_j (λ + (δ/√n)‖β‖₁‖μ'(Wβ)‖₂)`.
    pub max_residual: f64,
    pub bound_value_per_j: Array1<f64>,
    /// Largest violation of the fixed-point condition of the reweighted
    /// iteration, `s_j = τ_j (λ + γ₁(‖β‖₁ + |β_j|))` on the support and
    /// `|s_j| ≤ λ + γ₁‖β‖₁` off it.
    pub fixed_point_residual: f64,
    /// Θ¹ slack; non-positive certifies membership.
    pub theta_slack: f64,
}

/// KKT certificate for the GMUL/lasso conditions at `beta`.
pub fn kkt_check(
    beta: ArrayView1<'_, f64>,
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    lambda: f64,
    delta: f64,
) -> Result<KktCertificate> {
    kkt_check_with_intercept(beta, w, y, family, lambda, delta, false)
}

/// As [`kkt_check`]; with `intercept`, coordinate 0 must have zero score.
pub fn kkt_check_with_intercept(
    beta: ArrayView1<'_, f64>,
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    lambda: f64,
    delta: f64,
    intercept: bool,
) -> Result<KktCertificate> {
    crate::data::check_dims(w, y)?;
    if beta.len() != w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "beta has length {} but design has {} columns",
            beta.len(),
            w.ncols()
        )));
    }
    let n = w.nrows();
    let eta = linear_predictor(w, beta);
    let s = score(w, y, beta, family);
    let l1 = penalized_l1(beta, intercept);
    let v1 = eta.mapv(|t| family.mean_derivative_unchecked(t, 1));
    let bound = lambda + delta / (n as f64).sqrt() * l1 * v1.dot(&v1).sqrt();
    let gamma1 = compute_gamma(v1.mapv(|v| v.max(WEIGHT_FLOOR)).view(), delta, n);

    let p = beta.len();
    let mut tau = Array1::zeros(p);
    let mut bounds = Array1::from_elem(p, bound);
    let mut max_residual = 0.0f64;
    let mut fixed_point = 0.0f64;
    for j in 0..p {
        if intercept && j == 0 {
            bounds[0] = 0.0;
            max_residual = max_residual.max(s[0].abs());
            fixed_point = fixed_point.max(s[0].abs());
            continue;
        }
        let b = beta[j];
        if b != 0.0 {
            let sign = b.signum();
            tau[j] = sign;
            max_residual = max_residual.max((s[j] - sign * bound).abs());
            let fp_bound = lambda + gamma1 * (l1 + b.abs());
            fixed_point = fixed_point.max((s[j] - sign * fp_bound).abs());
        } else {
            tau[j] = if bound > 0.0 { (s[j] / bound).clamp(-1.0, 1.0) } else { 0.0 };
            max_residual = max_residual.max(s[j].abs() - bound);
            fixed_point = fixed_point.max(s[j].abs() - (lambda + gamma1 * l1));
        }
    }
    let skip = usize::from(intercept);
    let max_score = s.iter().skip(skip).fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(KktCertificate {
        tau,
        max_residual,
        bound_value_per_j: bounds,
        fixed_point_residual: fixed_point,
        theta_slack: max_score - bound,
    })
}
