//! Cross-validation over λ, the one-standard-error rule, δ-grid elbow curves
//! and plateau-based elbow selection.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::family::{FamilyKind, GlmFamily};
use crate::irls::{linear_predictor, selected_indices, FitResult, InitialBeta, IrlsConfig};

pub const DEFAULT_GRID_LENGTH: usize = 50;
pub const DEFAULT_GRID_RATIO: f64 = 0.01;
pub const DEFAULT_FOLDS: usize = 10;

/// `(1/n) ‖Wᵀ(y − ȳ1)‖∞` over the penalized columns.
pub fn lambda_max(w: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, intercept: bool) -> Result<f64> {
    crate::data::check_dims(w, y)?;
    let n = y.len() as f64;
    let ybar = y.sum() / n;
    let centered = y.mapv(|v| v - ybar);
    let s = w.t().dot(&centered) / n;
    Ok(s.iter().skip(usize::from(intercept)).fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Log-spaced descending grid from [`lambda_max`] down to `ratio · λ_max`.
pub fn default_lambda_grid(
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    length: usize,
    ratio: f64,
) -> Result<Vec<f64>> {
    lambda_grid_with_intercept(w, y, family, length, ratio, false)
}

pub fn lambda_grid_with_intercept(
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    _family: &GlmFamily,
    length: usize,
    ratio: f64,
    intercept: bool,
) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::InvalidArgument("lambda grid length must be at least 1".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("lambda grid ratio must lie in (0, 1), got {ratio}")));
    }
    let top = lambda_max(w, y, intercept)?;
    if !(top > 0.0) {
        return Err(Error::InvalidArgument(
            "response is uncorrelated with every column; lambda_max is zero".into(),
        ));
    }
    Ok(log_grid(top, ratio, length))
}

pub(crate) fn log_grid(top: f64, ratio: f64, length: usize) -> Vec<f64> {
    if length == 1 {
        return vec![top];
    }
    let step = ratio.ln() / (length - 1) as f64;
    (0..length).map(|k| top * (step * k as f64).exp()).collect()
}

/// Fits along a descending λ grid, each fit warm-started at the previous one.
pub fn fit_lambda_path(
    estimator: Estimator,
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    lambda_grid: &[f64],
    delta: f64,
    config: &IrlsConfig,
) -> Result<Vec<FitResult>> {
    let mut cfg = config.clone();
    let mut out = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let fit = estimator.fit(w, y, family, lambda, delta, &cfg)?;
        cfg.initial_beta = InitialBeta::Given(fit.beta.to_vec());
        out.push(fit);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambda_grid: Vec<f64>,
    pub mean_deviance: Vec<f64>,
    pub se_deviance: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_se: f64,
    pub index_min: usize,
    pub index_se: usize,
    /// Fold of every observation, `0..K`.
    pub fold_assignment: Vec<usize>,
    /// Held-out mean deviance, one row per fold.
    pub fold_deviance: Vec<Vec<f64>>,
}

/// Seeded permutation of `0..n` cut into `k` blocks whose sizes differ by at most one.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos * k / n;
    }
    folds
}

fn rows(w: ArrayView2<'_, f64>, idx: &[usize]) -> Array2<f64> {
    w.select(Axis(0), idx)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("lambda grid is empty".into()));
    }
    if grid.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument("lambda grid values must be positive".into()));
    }
    if grid.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::InvalidArgument("lambda grid must be strictly decreasing".into()));
    }
    Ok(())
}

/// K-fold cross-validation of a δ = 0 estimator with default IRLS settings.
pub fn kfold_cv(
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    method: Estimator,
    lambda_grid: &[f64],
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    kfold_cv_with(w, y, family, method, lambda_grid, k, seed, &IrlsConfig::default())
}

/// As [`kfold_cv`] with explicit IRLS settings. Folds run in parallel.
#[allow(clippy::too_many_arguments)]
pub fn kfold_cv_with(
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    method: Estimator,
    lambda_grid: &[f64],
    k: usize,
    seed: u64,
    config: &IrlsConfig,
) -> Result<CvResult> {
    crate::data::check_dims(w, y)?;
    check_grid(lambda_grid)?;
    if method.uses_delta() {
        return Err(Error::InvalidArgument(format!(
            "cross-validation is run for lasso or gds, not {method}"
        )));
    }
    let n = y.len();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!("fold count must lie in 2..={n}, got {k}")));
    }
    let folds = assign_folds(n, k, seed);
    let split = |f: usize| -> (Vec<usize>, Vec<usize>) {
        (0..n).partition(|&i| folds[i] != f)
    };
    for f in 0..k {
        let (train, _) = split(f);
        if family.kind == FamilyKind::Logistic && train.iter().all(|&i| y[i] == y[train[0]]) {
            return Err(Error::FoldDegeneracy { fold: f });
        }
    }
    let fold_deviance: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|f| -> Result<Vec<f64>> {
            let (train, test) = split(f);
            let (wt, yt) = (rows(w, &train), y.select(Axis(0), &train));
            let (wv, yv) = (rows(w, &test), y.select(Axis(0), &test));
            let path = fit_lambda_path(method, wt.view(), yt.view(), family, lambda_grid, 0.0, config)?;
            path.iter()
                .map(|fit| held_out_deviance(wv.view(), yv.view(), fit.beta.view(), family))
                .collect()
        })
        .collect::<Result<_>>()?;

    let len = lambda_grid.len();
    let kf = k as f64;
    let mut mean = vec![0.0; len];
    let mut se = vec![0.0; len];
    for l in 0..len {
        let vals: Vec<f64> = fold_deviance.iter().map(|r| r[l]).collect();
        let m = vals.iter().sum::<f64>() / kf;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (kf - 1.0);
        mean[l] = m;
        se[l] = var.sqrt() / kf.sqrt();
    }
    let (index_min, index_se) = one_se_rule(&mean, &se);
    Ok(CvResult {
        lambda_grid: lambda_grid.to_vec(),
        lambda_min: lambda_grid[index_min],
        lambda_se: lambda_grid[index_se],
        mean_deviance: mean,
        se_deviance: se,
        index_min,
        index_se,
        fold_assignment: folds,
        fold_deviance,
    })
}

/// Indices of the minimum and of the first (largest-λ) point within one SE of it.
pub fn one_se_rule(mean: &[f64], se: &[f64]) -> (usize, usize) {
    let index_min = mean
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v < mean[best] { i } else { best });
    let threshold = mean[index_min] + se[index_min];
    let index_se = mean.iter().position(|&v| v <= threshold).unwrap_or(index_min);
    (index_min, index_se)
}

/// Mean per-observation deviance of `beta` on held-out rows.
pub fn held_out_deviance(
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    family: &GlmFamily,
) -> Result<f64> {
    let eta = linear_predictor(w, beta);
    let mu: Vec<f64> = eta.iter().map(|&t| family.mean(t)).collect::<Result<_>>()?;
    let y = y.to_vec();
    Ok(family.deviance(&y, &mu)? / y.len() as f64)
}

/// Selected-set size against δ at a fixed λ.
#[derive(Debug, Clone, PartialEq)]
pub struct ElbowCurve {
    pub delta_grid: Vec<f64>,
    pub nonzero_counts: Vec<f64>,
    pub chosen_delta: Option<f64>,
    /// Per-point IRLS convergence; empty for averaged curves.
    pub converged: Vec<bool>,
    /// Selected coefficients per point; empty for averaged curves.
    pub selected: Vec<Vec<usize>>,
}

impl ElbowCurve {
    /// A curve from precomputed counts, e.g. Monte Carlo averages.
    pub fn from_counts(delta_grid: Vec<f64>, nonzero_counts: Vec<f64>) -> Result<Self> {
        check_delta_grid(&delta_grid)?;
        if delta_grid.len() != nonzero_counts.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} grid points but {} counts",
                delta_grid.len(),
                nonzero_counts.len()
            )));
        }
        Ok(Self { delta_grid, nonzero_counts, chosen_delta: None, converged: Vec::new(), selected: Vec::new() })
    }
}

/// `start, start + step, …` up to `stop` inclusive (within rounding).
pub fn delta_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid delta grid {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + step * k as f64).collect())
}

/// The default δ grid: 0 to 0.5 in steps of 0.025.
pub fn default_delta_grid() -> Vec<f64> {
    delta_grid(0.0, 0.5, 0.025).expect("valid constants")
}

fn check_delta_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("delta grid is empty".into()));
    }
    if grid[0] != 0.0 {
        return Err(Error::InvalidArgument("delta grid must start at 0".into()));
    }
    if grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::InvalidArgument("delta grid must be strictly increasing".into()));
    }
    Ok(())
}

/// One fit per δ at fixed λ, each warm-started from the previous δ.
pub fn elbow_curve(
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    method: Estimator,
    lambda: f64,
    delta_grid: &[f64],
    config: &IrlsConfig,
) -> Result<ElbowCurve> {
    let fits = elbow_fits(w, y, family, method, lambda, delta_grid, config)?;
    let mut curve = ElbowCurve::from_counts(
        delta_grid.to_vec(),
        fits.iter().map(|f| f.n_selected() as f64).collect(),
    )?;
    curve.converged = fits.iter().map(|f| f.converged).collect();
    curve.selected = fits.iter().map(|f| selected_indices(f.beta.view())).collect();
    Ok(curve)
}

/// The fits behind [`elbow_curve`].
pub fn elbow_fits(
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: &GlmFamily,
    method: Estimator,
    lambda: f64,
    delta_grid: &[f64],
    config: &IrlsConfig,
) -> Result<Vec<FitResult>> {
    check_delta_grid(delta_grid)?;
    if !method.uses_delta() {
        return Err(Error::InvalidArgument(format!("elbow curves need gmus or gmul, not {method}")));
    }
    let mut cfg = config.clone();
    if cfg.initial_beta == InitialBeta::GdsStart {
        cfg.initial_beta = InitialBeta::Zero;
    }
    let mut fits = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        let fit = method.fit(w, y, family, lambda, delta, &cfg)?;
        cfg.initial_beta = InitialBeta::Given(fit.beta.to_vec());
        fits.push(fit);
    }
    Ok(fits)
}

/// Outcome of [`elbow_select`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElbowSelection {
    pub delta: f64,
    pub index: usize,
    pub plateau_length: usize,
    /// The curve had a single point, so no elbow could be located.
    pub single_point: bool,
}

/// Smallest δ of the longest run of equal counts; ties go to the smaller δ.
pub fn elbow_select(curve: &ElbowCurve) -> Result<ElbowSelection> {
    elbow_select_with_tolerance(curve, 0.0)
}

/// As [`elbow_select`], with a run continuing while each count stays within
/// `tol` of the run's first count. Useful for Monte Carlo averaged curves.
pub fn elbow_select_with_tolerance(curve: &ElbowCurve, tol: f64) -> Result<ElbowSelection> {
    let counts = &curve.nonzero_counts;
    if counts.is_empty() || counts.len() != curve.delta_grid.len() {
        return Err(Error::InvalidArgument("elbow curve is empty or malformed".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument("plateau tolerance must be nonnegative".into()));
    }
    let (mut best_start, mut best_len) = (0, 0);
    let mut start = 0;
    while start < counts.len() {
        let mut end = start + 1;
        while end < counts.len() && (counts[end] - counts[start]).abs() <= tol {
            end += 1;
        }
        if end - start > best_len {
            best_start = start;
            best_len = end - start;
        }
        start = end;
    }
    Ok(ElbowSelection {
        delta: curve.delta_grid[best_start],
        index: best_start,
        plateau_length: best_len,
        single_point: counts.len() == 1,
    })
}

/// Elementwise mean of per-replication count curves on a shared grid.
pub fn average_counts(curves: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = curves.first() else {
        return Err(Error::InvalidArgument("no curves to average".into()));
    };
    if curves.iter().any(|c| c.len() != first.len()) {
        return Err(Error::DimensionMismatch("curves have different lengths".into()));
    }
    let mut sum = Array1::<f64>::zeros(first.len());
    for c in curves {
        sum += &ArrayView1::from(c.as_slice());
    }
    Ok((sum / curves.len() as f64).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn curve(deltas: &[f64], counts: &[f64]) -> ElbowCurve {
        ElbowCurve::from_counts(deltas.to_vec(), counts.to_vec()).unwrap()
    }

    #[test]
    fn plateau_example() {
        let c = curve(&[0.0, 0.05, 0.1, 0.125, 0.15, 0.175], &[50.0, 20.0, 12.0, 12.0, 12.0, 13.0]);
        let s = elbow_select(&c).unwrap();
        assert_eq!(s.delta, 0.1);
        assert_eq!(s.plateau_length, 3);
    }

    #[test]
    fn strictly_decreasing_picks_zero() {
        let c = curve(&[0.0, 0.1, 0.2, 0.3], &[9.0, 7.0, 4.0, 1.0]);
        assert_eq!(elbow_select(&c).unwrap().delta, 0.0);
    }

    #[test]
    fn constant_curve_picks_zero() {
        let c = curve(&[0.0, 0.1, 0.2], &[5.0, 5.0, 5.0]);
        let s = elbow_select(&c).unwrap();
        assert_eq!(s.delta, 0.0);
        assert_eq!(s.plateau_length, 3);
    }

    #[test]
    fn single_point_flagged() {
        let s = elbow_select(&curve(&[0.0], &[4.0])).unwrap();
        assert!(s.single_point);
        assert_eq!(s.delta, 0.0);
    }

    #[test]
    fn equal_plateaus_prefer_smaller_delta() {
        let c = curve(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5], &[9.0, 6.0, 6.0, 4.0, 3.0, 3.0]);
        assert_eq!(elbow_select(&c).unwrap().delta, 0.1);
    }

    #[test]
    fn tolerance_merges_near_equal_counts() {
        let c = curve(&[0.0, 0.1, 0.2, 0.3, 0.4], &[30.0, 14.2, 11.3, 11.1, 10.9]);
        assert_eq!(elbow_select(&c).unwrap().delta, 0.0);
        assert_eq!(elbow_select_with_tolerance(&c, 0.5).unwrap().delta, 0.2);
    }

    #[test]
    fn grid_must_start_at_zero() {
        assert!(ElbowCurve::from_counts(vec![0.1, 0.2], vec![1.0, 1.0]).is_err());
        assert!(ElbowCurve::from_counts(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn delta_grid_default() {
        let g = default_delta_grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert!((g[20] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_se_rule_flat_curve() {
        let (m, s) = one_se_rule(&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]);
        assert_eq!((m, s), (0, 0));
        let (m, s) = one_se_rule(&[3.0, 2.0, 1.5, 1.0, 1.2], &[0.1, 0.1, 0.1, 0.6, 0.1]);
        assert_eq!((m, s), (3, 2));
    }

    #[test]
    fn folds_are_balanced_and_seeded() {
        let a = assign_folds(23, 5, 7);
        assert_eq!(a, assign_folds(23, 5, 7));
        let mut sizes = [0usize; 5];
        for f in &a {
            sizes[*f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 4 || s == 5));
        assert_ne!(a, assign_folds(23, 5, 8));
    }

    #[test]
    fn lambda_grid_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = Array2::from_shape_fn((30, 6), |_| rng.sample::<f64, _>(StandardNormal));
        let (w, _) = crate::data::standardize(w.view()).unwrap();
        let y = Array1::from_shape_fn(30, |i| w[[i, 0]] + rng.sample::<f64, _>(StandardNormal));
        let g = default_lambda_grid(w.view(), y.view(), &GlmFamily::gaussian(), 12, 0.01).unwrap();
        assert_eq!(g.len(), 12);
        let r0 = g[1] / g[0];
        for p in g.windows(2) {
            assert!(p[1] < p[0]);
            assert!((p[1] / p[0] - r0).abs() < 1e-12);
        }
        assert!((g[11] / g[0] - 0.01).abs() < 1e-12);
        let fit = crate::gmul::lasso_fit(w.view(), y.view(), &GlmFamily::gaussian(), g[0], &IrlsConfig::default())
            .unwrap();
        assert_eq!(fit.n_selected(), 0);
    }

    #[test]
    fn logistic_degenerate_fold() {
        let w = array![[1.0], [-1.0], [0.5], [0.2]];
        let y = array![1.0, 1.0, 1.0, 0.0];
        let err = kfold_cv(w.view(), y.view(), &GlmFamily::logistic(), Estimator::Lasso, &[0.1], 4, 3);
        assert!(matches!(err, Err(Error::FoldDegeneracy { .. })));
    }

    #[test]
    fn cv_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = Array2::from_shape_fn((60, 8), |_| rng.sample::<f64, _>(StandardNormal));
        let (w, _) = crate::data::standardize(w.view()).unwrap();
        let y = Array1::from_shape_fn(60, |i| 1.5 * w[[i, 0]] - w[[i, 3]] + rng.sample::<f64, _>(StandardNormal));
        let fam = GlmFamily::gaussian();
        let grid = default_lambda_grid(w.view(), y.view(), &fam, 15, 0.02).unwrap();
        for method in [Estimator::Lasso, Estimator::Gds] {
            let cv = kfold_cv(w.view(), y.view(), &fam, method, &grid, 5, 11).unwrap();
            assert!(cv.lambda_se >= cv.lambda_min);
            let min = cv.mean_deviance.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(cv.mean_deviance[cv.index_min], min);
            assert!(cv.mean_deviance[cv.index_se] <= min + cv.se_deviance[cv.index_min]);
            assert!(cv.mean_deviance[..cv.index_se].iter().all(|&v| v > min + cv.se_deviance[cv.index_min]));
            assert_eq!(cv, kfold_cv(w.view(), y.view(), &fam, method, &grid, 5, 11).unwrap());
        }
        assert!(kfold_cv(w.view(), y.view(), &fam, Estimator::Gmus, &grid, 5, 11).is_err());
    }

    #[test]
    fn elbow_curve_starts_at_base_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = Array2::from_shape_fn((80, 10), |_| rng.sample::<f64, _>(StandardNormal));
        let (w, _) = crate::data::standardize(w.view()).unwrap();
        let y = Array1::from_shape_fn(80, |i| w[[i, 0]] + w[[i, 1]] + rng.sample::<f64, _>(StandardNormal));
        let fam = GlmFamily::gaussian();
        let grid = delta_grid(0.0, 0.3, 0.05).unwrap();
        let c = elbow_curve(w.view(), y.view(), &fam, Estimator::Gmul, 0.05, &grid, &IrlsConfig::default()).unwrap();
        let lasso = crate::gmul::lasso_fit(w.view(), y.view(), &fam, 0.05, &IrlsConfig::default()).unwrap();
        assert_eq!(c.nonzero_counts[0], lasso.n_selected() as f64);
        assert_eq!(c.converged.len(), grid.len());
        let c = elbow_curve(w.view(), y.view(), &fam, Estimator::Gmus, 0.05, &grid, &IrlsConfig::default()).unwrap();
        let gds = crate::gmus::gds_fit(w.view(), y.view(), &fam, 0.05, &IrlsConfig::default()).unwrap();
        assert_eq!(c.nonzero_counts[0], gds.n_selected() as f64);
    }
}
