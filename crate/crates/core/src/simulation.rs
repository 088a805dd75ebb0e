//! Synthetic data, selection metrics, the Monte Carlo harness and the
//! multi-start convergence experiment.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub use crate::data::standardize;
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::family::GlmFamily;
use crate::gmul::GmulStep;
use crate::gmus::{GmusStep, LpForm};
use crate::irls::{run_irls, selected_indices, FitResult, InitialBeta, IrlsConfig, IrlsStep, Problem};
use crate::selection::{
    average_counts, default_delta_grid, elbow_fits, elbow_select, elbow_select_with_tolerance,
    kfold_cv_with, lambda_grid_with_intercept, CvResult, ElbowCurve, DEFAULT_FOLDS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub beta_value: f64,
    pub sigma_u: f64,
    pub family: GlmFamily,
    pub reps: usize,
    pub seed: u64,
}

impl SimulationConfig {
    /// The logistic setting with n = 200, s = 10, unit coefficients.
    pub fn logistic(p: usize, sigma_u: f64) -> Self {
        Self { n: 200, p, s: 10, beta_value: 1.0, sigma_u, family: GlmFamily::logistic(), reps: 20, seed: 1 }
    }

    /// The Poisson setting with n = 200, s = 10, coefficients 0.2.
    pub fn poisson(p: usize, sigma_u: f64) -> Self {
        Self { n: 200, p, s: 10, beta_value: 0.2, sigma_u, family: GlmFamily::poisson(), reps: 20, seed: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.s == 0 || self.reps == 0 {
            return Err(Error::InvalidArgument("n, p, s and reps must be at least 1".into()));
        }
        if self.s > self.p {
            return Err(Error::InvalidArgument(format!("s = {} exceeds p = {}", self.s, self.p)));
        }
        if !(self.sigma_u >= 0.0) || !self.sigma_u.is_finite() {
            return Err(Error::InvalidArgument("sigma_u must be finite and nonnegative".into()));
        }
        if !self.beta_value.is_finite() {
            return Err(Error::InvalidArgument("beta_value must be finite".into()));
        }
        Ok(())
    }

    pub fn true_beta(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.p, |j| if j < self.s { self.beta_value } else { 0.0 })
    }
}

/// RNG for replication `rep`: its own ChaCha stream under the master seed,
/// so adding replications leaves earlier ones untouched.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub x: Array2<f64>,
    pub u: Array2<f64>,
    /// `x + u`, unstandardized.
    pub w: Array2<f64>,
    pub y: Array1<f64>,
    pub true_support: Vec<usize>,
    pub beta0: Array1<f64>,
}

/// Draws X ~ N(0,1), U ~ N(0, σ_u²) and y given Xβ⁰ for replication `rep_index`.
pub fn generate_dataset(config: &SimulationConfig, rep_index: usize) -> Result<GeneratedDataset> {
    config.validate()?;
    let mut rng = rep_rng(config.seed, rep_index as u64);
    let (n, p) = (config.n, config.p);
    let x = Array2::from_shape_simple_fn((n, p), || rng.sample::<f64, _>(StandardNormal));
    let u = Array2::from_shape_simple_fn((n, p), || config.sigma_u * rng.sample::<f64, _>(StandardNormal));
    let w = &x + &u;
    let beta0 = config.true_beta();
    let eta = x.dot(&beta0);
    let y = Array1::from(config.family.sample_response(eta.as_slice().expect("contiguous"), &mut rng)?);
    Ok(GeneratedDataset { x, u, w, y, true_support: (0..config.s).collect(), beta0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMetrics {
    pub tp: usize,
    pub fp: usize,
    /// `tp / (tp + fp)`; `None` when nothing was selected.
    pub precision: Option<f64>,
}

pub fn selection_metrics(beta_hat: ArrayView1<'_, f64>, true_support: &[usize]) -> SelectionMetrics {
    metrics_of_selected(&selected_indices(beta_hat), true_support)
}

fn metrics_of_selected(selected: &[usize], true_support: &[usize]) -> SelectionMetrics {
    let tp = selected.iter().filter(|j| true_support.contains(j)).count();
    let fp = selected.len() - tp;
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    SelectionMetrics { tp, fp, precision }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LambdaRule {
    Min,
    Se,
}

impl LambdaRule {
    pub fn name(self) -> &'static str {
        match self {
            LambdaRule::Min => "min",
            LambdaRule::Se => "se",
        }
    }

    fn pick(self, cv: &CvResult) -> f64 {
        match self {
            LambdaRule::Min => cv.lambda_min,
            LambdaRule::Se => cv.lambda_se,
        }
    }
}

impl FromStr for LambdaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "min" | "lambda_min" => Ok(LambdaRule::Min),
            "se" | "1se" | "lambda_se" => Ok(LambdaRule::Se),
            _ => Err(Error::UnknownName { kind: "lambda rule", value: s.to_string() }),
        }
    }
}

/// How δ is fixed for a corrected estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaChoice {
    Fixed(f64),
    /// Elbow of the replication-averaged count curve; one δ for all replications.
    ElbowAveraged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub estimator: Estimator,
    pub lambda_rule: LambdaRule,
    pub delta: DeltaChoice,
}

impl MethodSpec {
    pub fn label(&self) -> String {
        let lam = match self.lambda_rule {
            LambdaRule::Min => "lambda_min",
            LambdaRule::Se => "lambda_se",
        };
        if !self.estimator.uses_delta() {
            return format!("{}({lam})", self.estimator.label());
        }
        let delta = match (self.delta, self.lambda_rule) {
            (DeltaChoice::Fixed(d), _) => format!("{d}"),
            (DeltaChoice::ElbowAveraged, LambdaRule::Min) => "delta_1".to_string(),
            (DeltaChoice::ElbowAveraged, LambdaRule::Se) => "delta_2".to_string(),
        };
        format!("{}({lam}, {delta})", self.estimator.label())
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The eight rows of the published tables, in their order.
pub fn default_methods() -> Vec<MethodSpec> {
    let mut out = Vec::new();
    for base in [Estimator::Lasso, Estimator::Gds] {
        for rule in [LambdaRule::Min, LambdaRule::Se] {
            out.push(MethodSpec { estimator: base, lambda_rule: rule, delta: DeltaChoice::Fixed(0.0) });
            out.push(MethodSpec { estimator: base.corrected(), lambda_rule: rule, delta: DeltaChoice::ElbowAveraged });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloOptions {
    pub k_folds: usize,
    pub lambda_grid_length: usize,
    pub lambda_grid_ratio: f64,
    pub delta_grid: Vec<f64>,
    /// Plateau tolerance for the averaged elbow curve.
    pub plateau_tol: f64,
    pub irls: IrlsConfig,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self {
            k_folds: DEFAULT_FOLDS,
            lambda_grid_length: 20,
            lambda_grid_ratio: 0.05,
            delta_grid: default_delta_grid(),
            plateau_tol: 0.5,
            irls: IrlsConfig::default(),
        }
    }
}

/// One replication's per-point outcomes of an elbow curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RepCurve {
    pub counts: Vec<f64>,
    pub metrics: Vec<SelectionMetrics>,
    pub converged: Vec<bool>,
}

/// Everything recorded for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: usize,
    /// λ_min and λ_se per cross-validated base estimator.
    pub lambdas: BTreeMap<&'static str, (f64, f64)>,
    /// Metrics per method row, or the error that prevented the fit.
    pub outcomes: Vec<std::result::Result<SelectionMetrics, String>>,
    /// Elbow curves keyed by (estimator name, λ rule).
    pub curves: BTreeMap<(&'static str, LambdaRule), std::result::Result<RepCurve, String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub label: String,
    pub spec: MethodSpec,
    /// δ actually used (for elbow choices, the selected δ).
    pub delta: Option<f64>,
    pub mean_tp: f64,
    pub se_tp: f64,
    pub mean_fp: f64,
    pub se_fp: f64,
    pub precision: Option<f64>,
    /// `None` when `precision_aggregate` is set.
    pub precision_se: Option<f64>,
    /// Precision is `Σtp / Σ(tp + fp)` because some replication selected nothing.
    pub precision_aggregate: bool,
    pub n_reps: usize,
    pub n_failed: usize,
}

/// Replication-averaged elbow curve and its chosen δ.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedCurve {
    pub estimator: Estimator,
    pub lambda_rule: LambdaRule,
    pub curve: ElbowCurve,
    pub n_reps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MethodRow>,
    pub curves: Vec<AveragedCurve>,
    pub records: Vec<RepRecord>,
}

impl MetricsTable {
    pub fn row(&self, label: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

fn mean_se(vals: &[f64]) -> (f64, f64) {
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt() / k.sqrt())
}

fn run_replication(
    config: &SimulationConfig,
    methods: &[MethodSpec],
    options: &MonteCarloOptions,
    rep: usize,
) -> RepRecord {
    let mut record = RepRecord { rep, lambdas: BTreeMap::new(), outcomes: Vec::new(), curves: BTreeMap::new() };
    let prepared = generate_dataset(config, rep).and_then(|d| {
        let (w, _) = standardize(d.w.view())?;
        Ok((w, d))
    });
    let (w, data) = match prepared {
        Ok(v) => v,
        Err(e) => {
            record.outcomes = methods.iter().map(|_| Err(e.to_string())).collect();
            return record;
        }
    };
    let (w, y, family) = (w.view(), data.y.view(), &config.family);
    let support = &data.true_support;
    let irls = &options.irls;

    let mut cvs: BTreeMap<Estimator, std::result::Result<CvResult, String>> = BTreeMap::new();
    for m in methods {
        let base = m.estimator.base();
        cvs.entry(base).or_insert_with(|| {
            cross_validate(config, options, w, y, base, rep).map_err(|e| e.to_string())
        });
    }
    for (est, cv) in &cvs {
        if let Ok(cv) = cv {
            record.lambdas.insert(est.name(), (cv.lambda_min, cv.lambda_se));
        }
    }

    for m in methods {
        if m.delta != DeltaChoice::ElbowAveraged {
            continue;
        }
        let key = (m.estimator.name(), m.lambda_rule);
        if record.curves.contains_key(&key) {
            continue;
        }
        let curve = match &cvs[&m.estimator.base()] {
            Err(e) => Err(e.clone()),
            Ok(cv) => elbow_fits(w, y, family, m.estimator, m.lambda_rule.pick(cv), &options.delta_grid, irls)
                .map(|fits| curve_record(&fits, support))
                .map_err(|e| e.to_string()),
        };
        record.curves.insert(key, curve);
    }

    for m in methods {
        let outcome = match (&cvs[&m.estimator.base()], m.delta) {
            (Err(e), _) => Err(e.clone()),
            // metrics for elbow choices are read off the curve once δ is known
            (Ok(_), DeltaChoice::ElbowAveraged) => Ok(SelectionMetrics { tp: 0, fp: 0, precision: None }),
            (Ok(cv), DeltaChoice::Fixed(delta)) => {
                let mut cfg = irls.clone();
                cfg.initial_beta = InitialBeta::Zero;
                m.estimator
                    .fit(w, y, family, m.lambda_rule.pick(cv), delta, &cfg)
                    .map(|f| selection_metrics(f.beta.view(), support))
                    .map_err(|e| e.to_string())
            }
        };
        record.outcomes.push(outcome);
    }
    record
}

fn cross_validate(
    config: &SimulationConfig,
    options: &MonteCarloOptions,
    w: ndarray::ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    base: Estimator,
    rep: usize,
) -> Result<CvResult> {
    let family = &config.family;
    let grid = lambda_grid_with_intercept(w, y, family, options.lambda_grid_length, options.lambda_grid_ratio, false)?;
    // fold seed drawn from a stream disjoint from the data streams
    let seed = rep_rng(config.seed, u64::MAX - rep as u64).random::<u64>();
    kfold_cv_with(w, y, family, base, &grid, options.k_folds, seed, &options.irls)
}

fn curve_record(fits: &[FitResult], support: &[usize]) -> RepCurve {
    RepCurve {
        counts: fits.iter().map(|f| f.n_selected() as f64).collect(),
        metrics: fits.iter().map(|f| selection_metrics(f.beta.view(), support)).collect(),
        converged: fits.iter().map(|f| f.converged).collect(),
    }
}

/// Runs `config.reps` replications in parallel and aggregates them in
/// replication order.
pub fn run_monte_carlo(
    config: &SimulationConfig,
    methods: &[MethodSpec],
    options: &MonteCarloOptions,
) -> Result<MetricsTable> {
    config.validate()?;
    options.irls.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    let records: Vec<RepRecord> = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_replication(config, methods, options, rep))
        .collect();
    aggregate(methods, options, records)
}

/// Builds the metrics table from finished replications.
pub fn aggregate(methods: &[MethodSpec], options: &MonteCarloOptions, records: Vec<RepRecord>) -> Result<MetricsTable> {
    let mut curves = Vec::new();
    let mut chosen: BTreeMap<(&'static str, LambdaRule), usize> = BTreeMap::new();
    for m in methods {
        let key = (m.estimator.name(), m.lambda_rule);
        if m.delta != DeltaChoice::ElbowAveraged || chosen.contains_key(&key) {
            continue;
        }
        let ok: Vec<Vec<f64>> = records
            .iter()
            .filter_map(|r| r.curves.get(&key).and_then(|c| c.as_ref().ok()))
            .map(|c| c.counts.clone())
            .collect();
        if ok.is_empty() {
            continue;
        }
        let mut curve = ElbowCurve::from_counts(options.delta_grid.clone(), average_counts(&ok)?)?;
        let sel = elbow_select_with_tolerance(&curve, options.plateau_tol)?;
        curve.chosen_delta = Some(sel.delta);
        chosen.insert(key, sel.index);
        curves.push(AveragedCurve { estimator: m.estimator, lambda_rule: m.lambda_rule, curve, n_reps: ok.len() });
    }

    let mut rows = Vec::new();
    for (i, m) in methods.iter().enumerate() {
        let key = (m.estimator.name(), m.lambda_rule);
        let mut metrics = Vec::new();
        let mut failed = 0;
        let delta = match m.delta {
            DeltaChoice::Fixed(d) => m.estimator.uses_delta().then_some(d),
            DeltaChoice::ElbowAveraged => chosen.get(&key).map(|&k| options.delta_grid[k]),
        };
        for r in &records {
            let got = match m.delta {
                DeltaChoice::Fixed(_) => r.outcomes[i].clone().ok(),
                DeltaChoice::ElbowAveraged => match (r.curves.get(&key), chosen.get(&key)) {
                    (Some(Ok(c)), Some(&k)) => Some(c.metrics[k]),
                    _ => None,
                },
            };
            match got {
                Some(v) => metrics.push(v),
                None => failed += 1,
            }
        }
        rows.push(summarize(m, delta, &metrics, failed));
    }
    Ok(MetricsTable { rows, curves, records })
}

fn summarize(spec: &MethodSpec, delta: Option<f64>, metrics: &[SelectionMetrics], failed: usize) -> MethodRow {
    let tp: Vec<f64> = metrics.iter().map(|m| m.tp as f64).collect();
    let fp: Vec<f64> = metrics.iter().map(|m| m.fp as f64).collect();
    let (mean_tp, se_tp) = mean_se(&tp);
    let (mean_fp, se_fp) = mean_se(&fp);
    let precisions: Option<Vec<f64>> = metrics.iter().map(|m| m.precision).collect();
    let (precision, precision_se, precision_aggregate) = match precisions {
        Some(p) if !p.is_empty() => {
            let (m, s) = mean_se(&p);
            (Some(m), Some(s), false)
        }
        _ => {
            let sel: f64 = tp.iter().chain(fp.iter()).sum();
            let hits: f64 = tp.iter().sum();
            ((sel > 0.0).then(|| hits / sel), None, !metrics.is_empty())
        }
    };
    MethodRow {
        label: spec.label(),
        spec: *spec,
        delta,
        mean_tp,
        se_tp,
        mean_fp,
        se_fp,
        precision,
        precision_se,
        precision_aggregate,
        n_reps: metrics.len(),
        n_failed: failed,
    }
}

/// Fraction of replications whose own elbow (exact plateau rule) falls
/// strictly inside the δ grid, per curve key.
pub fn per_rep_elbow_interior_rate(table: &MetricsTable, delta_grid: &[f64]) -> BTreeMap<(&'static str, LambdaRule), f64> {
    let mut out = BTreeMap::new();
    let top = *delta_grid.last().unwrap_or(&0.0);
    let mut keys: Vec<_> = table.records.iter().flat_map(|r| r.curves.keys().copied()).collect();
    keys.sort();
    keys.dedup();
    for key in keys {
        let mut inside = 0usize;
        let mut total = 0usize;
        for r in &table.records {
            if let Some(Ok(c)) = r.curves.get(&key) {
                let Ok(curve) = ElbowCurve::from_counts(delta_grid.to_vec(), c.counts.clone()) else { continue };
                if let Ok(sel) = elbow_select(&curve) {
                    total += 1;
                    if sel.delta > 0.0 && sel.delta < top {
                        inside += 1;
                    }
                }
            }
        }
        if total > 0 {
            out.insert(key, inside as f64 / total as f64);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOptions {
    /// Outer iterations recorded per run.
    pub iterations: usize,
    /// Settings for the run-1 reference fit.
    pub irls: IrlsConfig,
    /// Scale of the N(0, scale²) random starts.
    pub start_scale: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self { iterations: 10, irls: IrlsConfig::default(), start_scale: 1.0 }
    }
}

/// One run of the convergence experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRun {
    pub start: Array1<f64>,
    /// Iterates after steps 1..=iterations.
    pub iterates: Vec<Array1<f64>>,
    /// log10 of the L2 distance to the reference estimate, per iteration.
    pub optimization_error: Vec<f64>,
    /// L2 distance to β⁰, per iteration.
    pub statistical_error: Vec<f64>,
    /// Inner coordinate-descent sweeps per iteration (GMUL only).
    pub inner_sweeps: Vec<usize>,
    pub inner_converged: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Converged estimate of run 1.
    pub reference: FitResult,
    pub runs: Vec<ConvergenceRun>,
    pub beta0: Array1<f64>,
}

impl ConvergenceReport {
    /// Largest pairwise L2 distance between runs after `iteration` steps.
    pub fn max_pairwise_distance(&self, iteration: usize) -> f64 {
        let at: Vec<&Array1<f64>> = self.runs.iter().map(|r| &r.iterates[iteration - 1]).collect();
        let mut worst = 0.0f64;
        for a in 0..at.len() {
            for b in a + 1..at.len() {
                worst = worst.max((at[a] - at[b]).mapv(|d| d * d).sum().sqrt());
            }
        }
        worst
    }
}

/// Runs the estimator from `n_starts` random starting points on one
/// generated dataset (replication 0). Run 1 is continued to convergence and
/// its estimate serves as the reference for every trace.
pub fn convergence_experiment(
    config: &SimulationConfig,
    method: Estimator,
    lambda: f64,
    delta: f64,
    n_starts: usize,
    options: &ConvergenceOptions,
) -> Result<ConvergenceReport> {
    if n_starts < 2 {
        return Err(Error::InvalidArgument("the convergence experiment needs at least 2 starts".into()));
    }
    if options.iterations == 0 {
        return Err(Error::InvalidArgument("record at least one iteration".into()));
    }
    let data = generate_dataset(config, 0)?;
    let (w, _) = standardize(data.w.view())?;
    let family = &config.family;
    let problem = Problem { w: w.view(), y: data.y.view(), family, lambda, delta, intercept: false };
    problem.validate()?;
    let stepper: Box<dyn IrlsStep<'_>> = match method {
        Estimator::Gmus => Box::new(GmusStep { problem, lp_tol: options.irls.lp_tol, form: LpForm::Compact }),
        Estimator::Gmul => Box::new(GmulStep {
            problem,
            inner_tol: options.irls.inner_tol,
            inner_max: options.irls.inner_max,
            active_set: options.irls.active_set,
        }),
        other => {
            return Err(Error::InvalidArgument(format!("convergence experiment runs gmus or gmul, not {other}")))
        }
    };
    let mut start_rng = rep_rng(config.seed ^ 0x5bd1_e995_9e37_79b9, 0);
    let starts: Vec<Array1<f64>> = (0..n_starts)
        .map(|_| Array1::from_shape_simple_fn(config.p, || options.start_scale * start_rng.sample::<f64, _>(StandardNormal)))
        .collect();

    let reference = run_irls(stepper.as_ref(), starts[0].clone(), &options.irls)?;
    let mut runs = Vec::with_capacity(n_starts);
    for start in starts {
        let mut beta = start.clone();
        let mut run = ConvergenceRun {
            start,
            iterates: Vec::new(),
            optimization_error: Vec::new(),
            statistical_error: Vec::new(),
            inner_sweeps: Vec::new(),
            inner_converged: Vec::new(),
        };
        for _ in 0..options.iterations {
            let out = stepper.step(beta.view())?;
            beta = out.beta;
            let opt = (&beta - &reference.beta).mapv(|d| d * d).sum().sqrt();
            let stat = (&beta - &data.beta0).mapv(|d| d * d).sum().sqrt();
            run.optimization_error.push(opt.log10());
            run.statistical_error.push(stat);
            if let Some(s) = out.inner_sweeps {
                run.inner_sweeps.push(s);
            }
            run.inner_converged.push(out.inner_converged);
            run.iterates.push(beta.clone());
        }
        runs.push(run);
    }
    Ok(ConvergenceReport { reference, runs, beta0: data.beta0 })
}
