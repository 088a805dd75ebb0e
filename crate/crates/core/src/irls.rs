//! Shared IRLS machinery: adjusted response, weights, the outer loop and fit
//! diagnostics used by both the LP-based and the coordinate-descent solvers.

use std::collections::VecDeque;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, ShapeBuilder, Zip};

use crate::data::check_dims;
use crate::error::{Error, Result};
use crate::family::{GlmFamily, WEIGHT_FLOOR};

/// Threshold above which a coefficient counts as selected.
pub const NONZERO_THRESHOLD: f64 = 1e-8;

/// The outer map is treated as cycling once an iterate returns to within
/// this fraction of the last step of one of its `MAX_CYCLE` predecessors.
const CYCLE_RATIO: f64 = 1e-4;
const MAX_CYCLE: usize = 8;

/// A step counts as oscillating when the iterate lands within this fraction
/// of the step length of the iterate two steps back.
const OSCILLATION_RATIO: f64 = 0.5;
/// Consecutive oscillating steps, with no shrinkage of the step length,
/// after which the run is treated as stalled.
const OSCILLATION_WINDOW: usize = 10;

/// Starting point of the outer IRLS loop.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialBeta {
    Zero,
    /// Solve the δ = 0 problem of the same estimator first (GDS for GMUS,
    /// lasso for GMUL). Equivalent to `Zero` when δ is already 0.
    #[default]
    GdsStart,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlsConfig {
    pub eps_tol: f64,
    pub max_iter: usize,
    pub initial_beta: InitialBeta,
    /// Θ slack accepted for a fit to be reported as converged.
    pub feasibility_tol: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
    /// Use the active-set variant of the inner coordinate descent.
    pub active_set: bool,
    pub lp_tol: f64,
    /// Treat column 0 as an unpenalized intercept.
    pub intercept: bool,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        Self {
            eps_tol: 1e-6,
            max_iter: 100,
            initial_beta: InitialBeta::GdsStart,
            feasibility_tol: 1e-8,
            inner_tol: 1e-8,
            inner_max: 10_000,
            active_set: true,
            lp_tol: 1e-9,
            intercept: false,
        }
    }
}

impl IrlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_tol > 0.0) {
            return Err(Error::InvalidArgument("eps_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.inner_tol > 0.0) || self.inner_max == 0 {
            return Err(Error::InvalidArgument(
                "inner_tol must be positive and inner_max at least 1".into(),
            ));
        }
        if !(self.lp_tol > 0.0) || !(self.feasibility_tol >= 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta: Array1<f64>,
    pub lambda: f64,
    pub delta: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Θ¹ slack at `beta`; non-positive means feasible.
    pub max_constraint_violation: f64,
    /// L1 norm over penalized coefficients.
    pub l1_norm: f64,
    /// KKT residual (coordinate-descent estimators only).
    pub kkt_residual: Option<f64>,
    /// Inner sweeps per outer iteration (coordinate-descent estimators only).
    pub inner_sweeps: Vec<usize>,
    /// False if any inner loop hit its sweep cap.
    pub inner_converged: bool,
}

impl FitResult {
    pub fn selected(&self) -> Vec<usize> {
        selected_indices(self.beta.view())
    }

    pub fn n_selected(&self) -> usize {
        self.selected().len()
    }
}

pub(crate) fn selected_indices(beta: ArrayView1<'_, f64>) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > NONZERO_THRESHOLD)
        .map(|(j, _)| j)
        .collect()
}

/// Quantities of one IRLS linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct IrlsQuantities {
    pub z: Array1<f64>,
    /// `v[r-1]` holds μ^(r)(Wβ); order 1 is floored.
    pub v: Vec<Array1<f64>>,
    pub w_tilde: Array2<f64>,
    pub z_tilde: Array1<f64>,
}

pub(crate) fn linear_predictor(w: ArrayView2<'_, f64>, beta: ArrayView1<'_, f64>) -> Array1<f64> {
    let mut eta = Array1::zeros(w.nrows());
    for (col, &b) in w.axis_iter(Axis(1)).zip(beta.iter()) {
        if b != 0.0 {
            eta.scaled_add(b, &col);
        }
    }
    eta
}

/// Computes z, V^(1..=order), W̃ = diag(√V¹)W and z̃ = √V¹ ∘ z at `beta`.
pub fn irls_weights_and_response(
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    family: &GlmFamily,
    order: usize,
) -> Result<IrlsQuantities> {
    check_dims(w, y)?;
    if beta.len() != w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "beta has length {} but design has {} columns",
            beta.len(),
            w.ncols()
        )));
    }
    if !(1..=2).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let eta = linear_predictor(w, beta);
    let v1 = eta.mapv(|t| family.mean_derivative_unchecked(t, 1).max(WEIGHT_FLOOR));
    let mut z = Array1::zeros(eta.len());
    Zip::from(&mut z)
        .and(&eta)
        .and(&y)
        .and(&v1)
        .for_each(|z, &t, &yi, &d| *z = t + (yi - family.mean_unchecked(t)) / d);
    let sqrt_v = v1.mapv(f64::sqrt);
    let mut w_tilde = Array2::zeros(w.raw_dim().f());
    for (mut out, col) in w_tilde.axis_iter_mut(Axis(1)).zip(w.axis_iter(Axis(1))) {
        Zip::from(&mut out).and(&col).and(&sqrt_v).for_each(|o, &x, &s| *o = s * x);
    }
    let z_tilde = &sqrt_v * &z;
    let mut v = vec![v1];
    if order == 2 {
        v.push(eta.mapv(|t| family.mean_derivative_unchecked(t, 2)));
    }
    Ok(IrlsQuantities { z, v, w_tilde, z_tilde })
}

/// `(1/n) Wᵀ(y − μ(Wβ))`, the score of the log-likelihood.
pub fn score(
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    family: &GlmFamily,
) -> Array1<f64> {
    let eta = linear_predictor(w, beta);
    let resid = Zip::from(&y).and(&eta).map_collect(|&yi, &t| yi - family.mean_unchecked(t));
    w.t().dot(&resid) / w.nrows() as f64
}

pub(crate) fn penalized_l1(beta: ArrayView1<'_, f64>, intercept: bool) -> f64 {
    let skip = usize::from(intercept);
    beta.iter().skip(skip).map(|b| b.abs()).sum()
}

/// Right-hand side of the Θ^R inequality.
pub(crate) fn theta_bound(
    eta: &Array1<f64>,
    family: &GlmFamily,
    lambda: f64,
    delta: f64,
    l1: f64,
    order: usize,
) -> f64 {
    let sqrt_n = (eta.len() as f64).sqrt();
    let mut bound = lambda;
    let mut factorial = 1.0;
    for r in 1..=order {
        factorial *= r as f64;
        let norm = eta
            .iter()
            .map(|&t| family.mean_derivative_unchecked(t, r).powi(2))
            .sum::<f64>()
            .sqrt();
        bound += delta.powi(r as i32) / (factorial * sqrt_n) * l1.powi(r as i32) * norm;
    }
    bound
}

/// Θ^R membership slack at `beta`; column 0 is skipped when `intercept` is set.
pub fn constraint_slack_with_intercept(
    beta: ArrayView1<'_, f64>,
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    lambda: f64,
    delta: f64,
    order: usize,
    intercept: bool,
) -> Result<f64> {
    check_dims(w, y)?;
    if beta.len() != w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "beta has length {} but design has {} columns",
            beta.len(),
            w.ncols()
        )));
    }
    if !(1..=2).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let eta = linear_predictor(w, beta);
    let s = score(w, y, beta, family);
    let skip = usize::from(intercept);
    let max_score = s.iter().skip(skip).fold(0.0f64, |m, v| m.max(v.abs()));
    let l1 = penalized_l1(beta, intercept);
    Ok(max_score - theta_bound(&eta, family, lambda, delta, l1, order))
}

/// Θ^R membership slack; non-positive exactly when `beta` lies in Θ^R.
pub fn constraint_slack(
    beta: ArrayView1<'_, f64>,
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    lambda: f64,
    delta: f64,
    order: usize,
) -> Result<f64> {
    constraint_slack_with_intercept(beta, w, y, family, lambda, delta, order, false)
}

/// Result of one outer IRLS step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub beta: Array1<f64>,
    pub inner_sweeps: Option<usize>,
    pub inner_converged: bool,
}

/// One outer IRLS update `β^(k) -> β^(k+1)` at fixed (λ, δ).
pub trait IrlsStep<'a> {
    fn step(&self, beta: ArrayView1<'_, f64>) -> Result<StepOutcome>;
    fn problem(&self) -> Problem<'a>;
}

/// Data and regularization shared by every estimator.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub w: ArrayView2<'a, f64>,
    pub y: ArrayView1<'a, f64>,
    pub family: &'a GlmFamily,
    pub lambda: f64,
    pub delta: f64,
    pub intercept: bool,
}

impl<'a> Problem<'a> {
    pub(crate) fn validate(&self) -> Result<()> {
        check_dims(self.w, self.y)?;
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda must be a finite nonnegative number, got {}",
                self.lambda
            )));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "delta must be a finite nonnegative number, got {}",
                self.delta
            )));
        }
        if self.intercept && self.w.ncols() < 2 {
            return Err(Error::InvalidArgument(
                "an intercept needs at least one further column".into(),
            ));
        }
        for &v in self.y.iter() {
            self.family.check_response(v)?;
        }
        Ok(())
    }

    pub(crate) fn slack(&self, beta: ArrayView1<'_, f64>) -> f64 {
        constraint_slack_with_intercept(
            beta,
            self.w,
            self.y,
            self.family,
            self.lambda,
            self.delta,
            1,
            self.intercept,
        )
        .expect("dimensions validated")
    }
}

pub(crate) fn resolve_start(p: usize, given: &[f64]) -> Result<Array1<f64>> {
    if given.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "initial beta has length {} but design has {p} columns",
            given.len()
        )));
    }
    if given.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial beta must be finite".into()));
    }
    Ok(Array1::from(given.to_vec()))
}

/// Runs the outer loop from `start` until the L2 change drops below
/// `eps_tol` and the iterate lies in Θ¹, or until `max_iter` steps. A run
/// that has locked into a short cycle stops early and reports the cycle's
/// sparsest member. A run that keeps alternating between two regions without
/// settling also stops early. Any unconverged run other than a cycle reports
/// the sparser of its last two iterates.
pub fn run_irls<'a, S: IrlsStep<'a> + ?Sized>(
    stepper: &S,
    start: Array1<f64>,
    config: &IrlsConfig,
) -> Result<FitResult> {
    let problem = stepper.problem();
    let l1 = |b: &Array1<f64>| penalized_l1(b.view(), problem.intercept);
    let mut beta = start;
    let mut converged = false;
    let mut iterations = 0;
    let mut sweeps = Vec::new();
    let mut inner_converged = true;
    // most recent first; history[0] is the iterate before `beta`
    let mut history: VecDeque<Array1<f64>> = VecDeque::with_capacity(MAX_CYCLE);
    let mut cycle_len = 0;
    // (length of the current oscillating run, step length when it began)
    let mut oscillation = (0usize, 0.0f64);
    while iterations < config.max_iter {
        let out = stepper.step(beta.view())?;
        iterations += 1;
        if let Some(s) = out.inner_sweeps {
            sweeps.push(s);
        }
        inner_converged &= out.inner_converged;
        let change = (&out.beta - &beta).mapv(|d| d * d).sum().sqrt();
        let old = std::mem::replace(&mut beta, out.beta);
        if change < config.eps_tol && problem.slack(beta.view()) <= config.feasibility_tol {
            converged = true;
            break;
        }
        history.push_front(old);
        history.truncate(MAX_CYCLE);
        // history[m - 1] is m steps back
        cycle_len = (2..=history.len())
            .find(|&m| (&beta - &history[m - 1]).mapv(|d| d * d).sum().sqrt() <= CYCLE_RATIO * change)
            .unwrap_or(0);
        if cycle_len > 0 {
            break;
        }
        let back2 = history.get(1).map(|b| (&beta - b).mapv(|d| d * d).sum().sqrt());
        if back2.is_some_and(|d| d <= OSCILLATION_RATIO * change) {
            if oscillation.0 == 0 {
                oscillation.1 = change;
            }
            oscillation.0 += 1;
            if oscillation.0 >= OSCILLATION_WINDOW && change >= 0.5 * oscillation.1 {
                break;
            }
        } else {
            oscillation.0 = 0;
        }
    }
    if !converged && iterations > 1 {
        let members = if cycle_len > 0 { cycle_len - 1 } else { 1 };
        for candidate in history.iter().take(members) {
            if l1(candidate) < l1(&beta) {
                beta = candidate.clone();
            }
        }
    }
    let slack = problem.slack(beta.view());
    let l1_norm = penalized_l1(beta.view(), problem.intercept);
    Ok(FitResult {
        beta,
        lambda: problem.lambda,
        delta: problem.delta,
        outer_iterations: iterations,
        converged,
        max_constraint_violation: slack,
        l1_norm,
        kkt_residual: None,
        inner_sweeps: sweeps,
        inner_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gaussian_quantities_are_identity() {
        let w = array![[1.0, -2.0], [0.5, 3.0], [2.0, 0.0]];
        let y = array![0.3, -1.0, 2.0];
        let beta = array![0.7, -0.2];
        let q = irls_weights_and_response(w.view(), y.view(), beta.view(), &GlmFamily::gaussian(), 1)
            .unwrap();
        for (a, b) in q.z.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(q.v[0].iter().all(|&v| v == 1.0));
        assert_eq!(q.w_tilde, w);
        assert_eq!(q.z_tilde, q.z);
    }

    #[test]
    fn logistic_at_zero() {
        let w = array![[1.0], [-1.0], [0.5]];
        let y = array![1.0, 0.0, 1.0];
        let q = irls_weights_and_response(w.view(), y.view(), array![0.0].view(), &GlmFamily::logistic(), 1)
            .unwrap();
        assert_eq!(q.z, array![2.0, -2.0, 2.0]);
        assert!(q.v[0].iter().all(|&v| v == 0.25));
        assert_eq!(q.w_tilde, array![[0.5], [-0.5], [0.25]]);
        assert_eq!(q.z_tilde, array![1.0, -1.0, 1.0]);
    }

    #[test]
    fn poisson_single_observation() {
        let ln2 = 2f64.ln();
        let w = array![[1.0, 0.0]];
        let y = array![3.0];
        let q = irls_weights_and_response(w.view(), y.view(), array![ln2, 0.0].view(), &GlmFamily::poisson(), 2)
            .unwrap();
        assert!((q.z[0] - (ln2 + 0.5)).abs() < 1e-15);
        assert!((q.v[0][0] - 2.0).abs() < 1e-15);
        assert!((q.v[1][0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn order_three_rejected() {
        let w = array![[1.0]];
        let y = array![1.0];
        let err = irls_weights_and_response(w.view(), y.view(), array![0.0].view(), &GlmFamily::gaussian(), 3);
        assert_eq!(err.unwrap_err(), Error::UnsupportedOrder(3));
    }

    #[test]
    fn slack_toy() {
        let w = array![[1.0, 0.0], [0.0, 1.0]];
        let y = array![1.0, 0.0];
        let s = constraint_slack(array![0.0, 0.0].view(), w.view(), y.view(), &GlmFamily::gaussian(), 0.6, 0.3, 1)
            .unwrap();
        assert!((s + 0.1).abs() < 1e-15);
    }

    #[test]
    fn slack_second_order_adds_term() {
        // gaussian second derivative is zero, so R = 2 equals R = 1
        let w = array![[1.0, 0.5], [0.3, 1.0], [-1.0, 0.2]];
        let y = array![1.0, 0.0, 2.0];
        let b = array![0.4, -0.1];
        let g = GlmFamily::gaussian();
        let s1 = constraint_slack(b.view(), w.view(), y.view(), &g, 0.1, 0.2, 1).unwrap();
        let s2 = constraint_slack(b.view(), w.view(), y.view(), &g, 0.1, 0.2, 2).unwrap();
        assert_eq!(s1, s2);
        let l = GlmFamily::logistic();
        let y = array![1.0, 0.0, 1.0];
        let s1 = constraint_slack(b.view(), w.view(), y.view(), &l, 0.1, 0.2, 1).unwrap();
        let s2 = constraint_slack(b.view(), w.view(), y.view(), &l, 0.1, 0.2, 2).unwrap();
        assert!(s2 <= s1);
    }

    #[test]
    fn zero_beta_feasible_for_large_lambda() {
        let w = array![[1.0, 0.5], [0.3, 1.0], [-1.0, 0.2], [0.1, -0.4]];
        let y = array![1.0, 0.0, 1.0, 1.0];
        let fam = GlmFamily::logistic();
        let s = score(w.view(), y.view(), array![0.0, 0.0].view(), &fam);
        let lam = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for delta in [0.0, 0.5, 3.0] {
            let slack = constraint_slack(array![0.0, 0.0].view(), w.view(), y.view(), &fam, lam, delta, 1).unwrap();
            assert!(slack <= 0.0);
        }
    }
}
