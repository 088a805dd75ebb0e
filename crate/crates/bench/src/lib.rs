//! Shared fixtures for the benchmarks.

use gmus_core::simulation::generate_dataset;
use gmus_core::{standardize, SimulationConfig};
use ndarray::{Array1, Array2};

/// A standardized logistic design of size `n × p` with ten signals.
pub fn logistic_problem(n: usize, p: usize) -> (Array2<f64>, Array1<f64>) {
    let config = SimulationConfig { n, ..SimulationConfig::logistic(p, 0.2) };
    let data = generate_dataset(&config, 0).expect("valid configuration");
    let (w, _) = standardize(data.w.view()).expect("non-constant columns");
    (w, data.y)
}

/// `W̃ = W/2` and `z̃ = (y − ½)·2`: the reweighted data of a logistic IRLS step at β = 0.
pub fn first_irls_step(w: &Array2<f64>, y: &Array1<f64>) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let v1 = Array1::from_elem(y.len(), 0.25);
    let z = y.mapv(|v| (v - 0.5) / 0.25);
    (w * 0.5, z * 0.5, v1)
}
