//! Brute-force and closed-form oracles for the solvers.

mod common;

use common::{gaussian_instance, moments, normal};
use gmus_core::selection::kfold_cv;
use gmus_core::{lasso_fit, Estimator, GlmFamily, IrlsConfig};
use ndarray::{array, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gmus_l1_norm_matches_grid_oracle() {
    common::gmus_grid_oracle(20).unwrap();
}

#[test]
fn coordinate_descent_matches_surrogate_grid_minimizer() {
    common::coordinate_descent_grid_oracle(20).unwrap();
}

#[test]
fn delta_zero_fits_satisfy_their_optimality_conditions() {
    common::delta_zero_optimality(20).unwrap();
}

/// Accelerated proximal gradient on `(1/2n)‖y − Wβ‖² + λ‖β‖₁`.
fn fista_lasso(w: &Array2<f64>, y: &Array1<f64>, lambda: f64) -> Array1<f64> {
    let (g, b) = moments(w, y);
    // Power iteration for the step size.
    let mut v = Array1::ones(g.ncols());
    let mut lip = 0.0;
    for _ in 0..500 {
        let gv = g.dot(&v);
        lip = gv.dot(&gv).sqrt() / v.dot(&v).sqrt();
        v = &gv / gv.dot(&gv).sqrt();
    }
    let step = 1.0 / (1.01 * lip);
    let shrink = |x: f64| x.signum() * (x.abs() - step * lambda).max(0.0);
    let mut beta = Array1::zeros(g.ncols());
    let mut momentum = beta.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let grad = g.dot(&momentum) - &b;
        let next = (&momentum - &(grad * step)).mapv(shrink);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        momentum = &next + &((&next - &beta) * ((t - 1.0) / t_next));
        beta = next;
        t = t_next;
    }
    beta
}

#[test]
fn gaussian_lasso_objective_is_optimal() {
    for seed in 0..20u64 {
        let (w, y) = gaussian_instance(4000 + seed, 50, 10);
        let lambda = 0.1;
        let objective = |beta: &Array1<f64>| {
            let r = &y - &w.dot(beta);
            r.dot(&r) / (2.0 * 50.0) + lambda * beta.mapv(f64::abs).sum()
        };
        let fit = lasso_fit(w.view(), y.view(), &GlmFamily::gaussian(), lambda, &IrlsConfig::default()).unwrap();
        let reference = fista_lasso(&w, &y, lambda);
        assert!(
            objective(&fit.beta) <= objective(&reference) + 1e-6,
            "seed {seed}: {} vs {}",
            objective(&fit.beta),
            objective(&reference)
        );
    }
}

#[test]
fn leave_one_out_cv_matches_ols_hat_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 10;
    let w = Array2::from_shape_simple_fn((n, 2), || normal(&mut rng));
    let y = Array1::from_shape_fn(n, |i| 0.7 * w[[i, 0]] - 0.4 * w[[i, 1]] + normal(&mut rng));

    // e_i / (1 − h_ii) with H = W(WᵀW)⁻¹Wᵀ.
    let g = w.t().dot(&w);
    let det = g[[0, 0]] * g[[1, 1]] - g[[0, 1]] * g[[1, 0]];
    let inv = array![[g[[1, 1]], -g[[0, 1]]], [-g[[1, 0]], g[[0, 0]]]] / det;
    let beta = inv.dot(&w.t().dot(&y));
    let resid = &y - &w.dot(&beta);
    let mut expected = 0.0;
    for i in 0..n {
        let wi = w.row(i);
        let h = wi.dot(&inv.dot(&wi));
        expected += (resid[i] / (1.0 - h)).powi(2) / n as f64;
    }

    let grid = [1e-9, 1e-11];
    let cv = kfold_cv(w.view(), y.view(), &GlmFamily::gaussian(), Estimator::Lasso, &grid, n, 5).unwrap();
    for &m in cv.mean_deviance.iter() {
        assert!((m - expected).abs() < 1e-6, "{m} vs {expected}");
    }
}
