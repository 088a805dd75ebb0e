//! Brute-force oracle checks shared by the oracle suite and the acceptance run.

#![allow(dead_code)]

use gmus_core::gmul::{compute_omega, coordinate_descent, surrogate_objective};
use gmus_core::{gds_fit, gmus_fit, kkt_check, lasso_fit, standardize, GlmFamily, IrlsConfig};
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Check = Result<String, String>;

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_instance(seed: u64, n: usize, p: usize) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = Array2::from_shape_simple_fn((n, p), || normal(&mut rng));
    let (w, _) = standardize(raw.view()).unwrap();
    let truth = Array1::from_shape_fn(p, |j| if j % 2 == 0 { 1.0 } else { -0.5 });
    let y = w.dot(&truth) + Array1::from_shape_simple_fn(n, || normal(&mut rng));
    (w, y)
}

/// Gram matrix and cross products scaled by 1/n.
pub fn moments(w: &Array2<f64>, y: &Array1<f64>) -> (Array2<f64>, Array1<f64>) {
    let n = w.nrows() as f64;
    (w.t().dot(w) / n, w.t().dot(y) / n)
}

/// GMUS L1 norm against the smallest-L1 feasible point of a grid on [−2, 2]².
pub fn gmus_grid_oracle(instances: u64) -> Check {
    let step = 0.005;
    let half = (2.0 / step) as i64;
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let (w, y) = gaussian_instance(seed, 50, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let lambda = rng.random_range(0.05..0.2);
        let delta = rng.random_range(0.0..0.3);
        let fit = gmus_fit(w.view(), y.view(), &GlmFamily::gaussian(), lambda, delta, &IrlsConfig::default())
            .map_err(|e| format!("seed {seed}: {e}"))?;
        if !fit.converged {
            return Err(format!("seed {seed}: fit did not converge"));
        }
        // Gaussian weights are all one, so the bound is λ + δ‖β‖₁.
        let (g, b) = moments(&w, &y);
        let mut best = f64::INFINITY;
        for i in -half..=half {
            for k in -half..=half {
                let (b0, b1) = (i as f64 * step, k as f64 * step);
                let l1 = b0.abs() + b1.abs();
                if l1 >= best {
                    continue;
                }
                let s0 = b[0] - g[[0, 0]] * b0 - g[[0, 1]] * b1;
                let s1 = b[1] - g[[1, 0]] * b0 - g[[1, 1]] * b1;
                if s0.abs().max(s1.abs()) <= lambda + delta * l1 {
                    best = l1;
                }
            }
        }
        let gap = (fit.l1_norm - best).abs();
        if gap >= 0.01 {
            return Err(format!("seed {seed}: fit L1 {} vs grid {best}", fit.l1_norm));
        }
        worst = worst.max(gap);
    }
    Ok(format!("largest L1 gap {worst:.2e}"))
}

/// Coordinate descent against a dense grid minimizer of the inner objective.
pub fn coordinate_descent_grid_oracle(instances: u64) -> Check {
    let step = 0.001;
    let half = (2.0 / step) as i64;
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let n = 50;
        let wt = Array2::from_shape_simple_fn((n, 2), || normal(&mut rng));
        let zt = Array1::from_shape_simple_fn(n, || 0.8 * normal(&mut rng));
        let gamma1 = 0.3;
        let lagged = array![normal(&mut rng), normal(&mut rng)] * 0.3;
        let omega = compute_omega(lagged.view(), 0.05, gamma1);
        let out = coordinate_descent(wt.view(), zt.view(), gamma1, omega.view(), Array1::zeros(2).view(), 1e-12, 10_000)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        if !out.converged {
            return Err(format!("seed {seed}: inner loop did not converge"));
        }

        let (g, b) = moments(&wt, &zt);
        let objective = |b0: f64, b1: f64| {
            -(b[0] * b0 + b[1] * b1)
                + 0.5 * (g[[0, 0]] * b0 * b0 + 2.0 * g[[0, 1]] * b0 * b1 + g[[1, 1]] * b1 * b1)
                + gamma1 * (b0 * b0 + b1 * b1)
                + omega[0] * b0.abs()
                + omega[1] * b1.abs()
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in -half..=half {
            let b0 = i as f64 * step;
            for k in -half..=half {
                let b1 = k as f64 * step;
                let f = objective(b0, b1);
                if f < best.0 {
                    best = (f, b0, b1);
                }
            }
        }
        let gap = (out.beta[0] - best.1).abs().max((out.beta[1] - best.2).abs());
        if gap >= 0.005 {
            return Err(format!("seed {seed}: ({}, {}) vs grid ({}, {})", out.beta[0], out.beta[1], best.1, best.2));
        }
        let ours = surrogate_objective(wt.view(), zt.view(), gamma1, omega.view(), out.beta.view());
        if (ours - objective(out.beta[0], out.beta[1])).abs() >= 1e-12 || ours > best.0 + 1e-12 {
            return Err(format!("seed {seed}: objective {ours} vs grid {}", best.0));
        }
        worst = worst.max(gap);
    }
    Ok(format!("largest coordinate gap {worst:.2e}"))
}

/// δ = 0 fits: the GDS meets its constraint and the lasso its KKT conditions.
pub fn delta_zero_optimality(instances: u64) -> Check {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let (w, y) = gaussian_instance(3000 + seed, 50, 2);
        let family = GlmFamily::gaussian();
        let lambda = 0.08;
        let gds = gds_fit(w.view(), y.view(), &family, lambda, &IrlsConfig::default()).map_err(|e| e.to_string())?;
        if gds.max_constraint_violation > 1e-6 {
            return Err(format!("seed {seed}: GDS slack {}", gds.max_constraint_violation));
        }
        let lasso = lasso_fit(w.view(), y.view(), &family, lambda, &IrlsConfig::default()).map_err(|e| e.to_string())?;
        let cert = kkt_check(lasso.beta.view(), w.view(), y.view(), &family, lambda, 0.0).map_err(|e| e.to_string())?;
        if cert.max_residual > 1e-6 {
            return Err(format!("seed {seed}: lasso KKT residual {}", cert.max_residual));
        }
        // The Dantzig selector never has a larger L1 norm than the lasso.
        if gds.l1_norm > lasso.l1_norm + 1e-8 {
            return Err(format!("seed {seed}: GDS L1 {} above lasso L1 {}", gds.l1_norm, lasso.l1_norm));
        }
        worst = worst.max(gds.max_constraint_violation.max(0.0)).max(cert.max_residual);
    }
    Ok(format!("largest residual {worst:.2e}"))
}
