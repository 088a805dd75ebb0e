use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use gmus_core::selection::{
    elbow_curve, elbow_select, kfold_cv_with, lambda_grid_with_intercept, CvResult, DEFAULT_GRID_LENGTH, DEFAULT_GRID_RATIO,
};
use gmus_core::simulation::{
    convergence_experiment, default_methods, run_monte_carlo, ConvergenceOptions, LambdaRule, MonteCarloOptions,
};
use gmus_core::{standardize, with_intercept_column, GlmFamily, IrlsConfig, SimulationConfig};
use ndarray::{Array1, Array2};

use crate::config::RunConfig;
use crate::io::{float, load_dataset, Output};

/// Standardized design (with a leading intercept column when requested),
/// response and column names.
struct Prepared {
    w: Array2<f64>,
    y: Array1<f64>,
    names: Vec<String>,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    let Some(input) = &config.input else {
        bail!("no input file; pass --input or set input= in the config file");
    };
    let data = load_dataset(input, &config.response)?;
    let (w, _) = standardize(data.w.view()).context("cannot standardize the design")?;
    let mut names = data.column_names;
    let w = if config.intercept {
        names.insert(0, "(intercept)".into());
        with_intercept_column(w.view())
    } else {
        w
    };
    Ok(Prepared { w, y: data.y, names })
}

fn irls(config: &RunConfig) -> IrlsConfig {
    IrlsConfig { intercept: config.intercept, ..IrlsConfig::default() }
}

fn run_cv(config: &RunConfig, data: &Prepared) -> Result<CvResult> {
    let family = GlmFamily::new(config.family);
    let (length, ratio) = (config.lambda_grid_length.unwrap_or(DEFAULT_GRID_LENGTH), config.lambda_grid_ratio.unwrap_or(DEFAULT_GRID_RATIO));
    let grid = lambda_grid_with_intercept(data.w.view(), data.y.view(), &family, length, ratio, config.intercept)?;
    let cv = kfold_cv_with(
        data.w.view(),
        data.y.view(),
        &family,
        config.method.base(),
        &grid,
        config.k_folds,
        config.seed,
        &irls(config),
    )?;
    Ok(cv)
}

/// `--lambda` if given, otherwise the cross-validated value under `--lambda-rule`.
fn resolve_lambda(config: &mut RunConfig, data: &Prepared) -> Result<()> {
    if config.lambda.is_none() {
        let cv = run_cv(config, data)?;
        config.lambda = Some(match config.lambda_rule {
            LambdaRule::Min => cv.lambda_min,
            LambdaRule::Se => cv.lambda_se,
        });
    }
    Ok(())
}

pub fn fit(mut config: RunConfig) -> Result<Vec<PathBuf>> {
    let data = prepare(&config)?;
    config.default_lambda_grid(DEFAULT_GRID_LENGTH, DEFAULT_GRID_RATIO);
    resolve_lambda(&mut config, &data)?;
    let lambda = config.lambda.expect("resolved");
    let family = GlmFamily::new(config.family);
    let fit = config.method.fit(data.w.view(), data.y.view(), &family, lambda, config.delta, &irls(&config))?;
    let echo = config.echo();

    let mut coef = Output::create(&config.output_dir, "coefficients.csv", &echo)?;
    coef.row(["column_name", "coefficient", "selected"])?;
    let selected = fit.selected();
    for (j, name) in data.names.iter().enumerate() {
        coef.row([name.clone(), float(fit.beta[j]), selected.contains(&j).to_string()])?;
    }

    let mut diag = Output::create(&config.output_dir, "diagnostics.csv", &echo)?;
    diag.row(["key", "value"])?;
    let rows = [
        ("method", config.method.to_string()),
        ("lambda", float(lambda)),
        ("delta", float(config.delta)),
        ("iterations", fit.outer_iterations.to_string()),
        ("converged", fit.converged.to_string()),
        ("constraint_slack", float(fit.max_constraint_violation)),
        ("kkt_residual", fit.kkt_residual.map(float).unwrap_or_default()),
        ("l1_norm", float(fit.l1_norm)),
        ("n_selected", fit.n_selected().to_string()),
    ];
    for (k, v) in rows {
        diag.row([k.to_string(), v])?;
    }
    println!(
        "{}: lambda={lambda} delta={} selected={} converged={}",
        config.method,
        config.delta,
        fit.n_selected(),
        fit.converged
    );
    Ok(vec![coef.finish()?, diag.finish()?])
}

pub fn cv(mut config: RunConfig) -> Result<Vec<PathBuf>> {
    let data = prepare(&config)?;
    config.default_lambda_grid(DEFAULT_GRID_LENGTH, DEFAULT_GRID_RATIO);
    let cv = run_cv(&config, &data)?;
    let echo = config.echo();
    let mut table = Output::create(&config.output_dir, "cv.csv", &echo)?;
    table.row(["lambda", "mean_deviance", "se_deviance", "is_lambda_min", "is_lambda_se"])?;
    for k in 0..cv.lambda_grid.len() {
        table.row([
            float(cv.lambda_grid[k]),
            float(cv.mean_deviance[k]),
            float(cv.se_deviance[k]),
            (k == cv.index_min).to_string(),
            (k == cv.index_se).to_string(),
        ])?;
    }
    let mut folds = Output::create(&config.output_dir, "folds.csv", &echo)?;
    folds.row(["row", "fold"])?;
    for (i, f) in cv.fold_assignment.iter().enumerate() {
        folds.row([(i + 1).to_string(), f.to_string()])?;
    }
    println!("{}: lambda_min={} lambda_se={}", config.method.base(), cv.lambda_min, cv.lambda_se);
    Ok(vec![table.finish()?, folds.finish()?])
}

pub fn elbow(mut config: RunConfig) -> Result<Vec<PathBuf>> {
    if !config.method.uses_delta() {
        bail!("elbow needs --method gmus or gmul, not {}", config.method);
    }
    let data = prepare(&config)?;
    config.default_lambda_grid(DEFAULT_GRID_LENGTH, DEFAULT_GRID_RATIO);
    resolve_lambda(&mut config, &data)?;
    let family = GlmFamily::new(config.family);
    let grid = config.delta_grid.values()?;
    let lambda = config.lambda.expect("resolved");
    let curve = elbow_curve(data.w.view(), data.y.view(), &family, config.method, lambda, &grid, &irls(&config))?;
    let chosen = elbow_select(&curve)?;
    let mut out = Output::create(&config.output_dir, "elbow.csv", &config.echo())?;
    out.row(["delta", "nonzero_count", "converged", "chosen"])?;
    for k in 0..grid.len() {
        out.row([
            float(grid[k]),
            curve.nonzero_counts[k].to_string(),
            curve.converged[k].to_string(),
            (k == chosen.index).to_string(),
        ])?;
    }
    println!("{}: lambda={lambda} chosen_delta={}", config.method, chosen.delta);
    Ok(vec![out.finish()?])
}

pub fn simulate(mut config: RunConfig) -> Result<Vec<PathBuf>> {
    let defaults = MonteCarloOptions::default();
    let (length, ratio) = config.default_lambda_grid(defaults.lambda_grid_length, defaults.lambda_grid_ratio);
    let sim = SimulationConfig {
        n: config.n,
        p: config.p,
        s: config.s,
        beta_value: config.beta_value(),
        sigma_u: config.sigma_u,
        family: GlmFamily::new(config.family),
        reps: config.reps,
        seed: config.seed,
    };
    let options = MonteCarloOptions {
        k_folds: config.k_folds,
        lambda_grid_length: length,
        lambda_grid_ratio: ratio,
        delta_grid: config.delta_grid.values()?,
        plateau_tol: config.plateau_tol,
        irls: IrlsConfig::default(),
    };
    let table = run_monte_carlo(&sim, &default_methods(), &options)?;
    let echo = config.echo();

    let mut metrics = Output::create(&config.output_dir, "metrics.csv", &echo)?;
    metrics.row([
        "method",
        "delta",
        "mean_tp",
        "se_tp",
        "mean_fp",
        "se_fp",
        "precision",
        "precision_se",
        "precision_aggregate",
        "reps",
        "failed",
    ])?;
    let opt = |v: Option<f64>| v.map(float).unwrap_or_default();
    for r in &table.rows {
        metrics.row([
            r.label.clone(),
            opt(r.delta),
            float(r.mean_tp),
            float(r.se_tp),
            float(r.mean_fp),
            float(r.se_fp),
            opt(r.precision),
            opt(r.precision_se),
            r.precision_aggregate.to_string(),
            r.n_reps.to_string(),
            r.n_failed.to_string(),
        ])?;
    }

    let mut curves = Output::create(&config.output_dir, "elbow_curves.csv", &echo)?;
    curves.row(["method", "lambda_rule", "delta", "mean_nonzero_count", "chosen"])?;
    for c in &table.curves {
        for (k, &delta) in c.curve.delta_grid.iter().enumerate() {
            curves.row([
                c.estimator.to_string(),
                c.lambda_rule.name().to_string(),
                float(delta),
                float(c.curve.nonzero_counts[k]),
                (Some(delta) == c.curve.chosen_delta).to_string(),
            ])?;
        }
    }
    for r in &table.rows {
        println!("{:28} TP {:6.2}  FP {:6.2}", r.label, r.mean_tp, r.mean_fp);
    }
    Ok(vec![metrics.finish()?, curves.finish()?])
}

pub fn convergence(mut config: RunConfig) -> Result<Vec<PathBuf>> {
    let sim = SimulationConfig {
        n: config.n,
        p: config.p,
        s: config.s,
        beta_value: config.beta_value(),
        sigma_u: config.sigma_u,
        family: GlmFamily::new(config.family),
        reps: 1,
        seed: config.seed,
    };
    let lambda = *config.lambda.get_or_insert(((config.p as f64).ln() / config.n as f64).sqrt() / 3.0);
    let options = ConvergenceOptions { iterations: config.iterations, ..ConvergenceOptions::default() };
    let report = convergence_experiment(&sim, config.method, lambda, config.delta, config.starts, &options)?;
    let mut out = Output::create(&config.output_dir, "convergence.csv", &config.echo())?;
    out.row(["run", "iteration", "optimization_error", "statistical_error", "inner_sweeps"])?;
    for (r, run) in report.runs.iter().enumerate() {
        for k in 0..run.iterates.len() {
            out.row([
                (r + 1).to_string(),
                (k + 1).to_string(),
                float(run.optimization_error[k]),
                float(run.statistical_error[k]),
                run.inner_sweeps.get(k).map(ToString::to_string).unwrap_or_default(),
            ])?;
        }
    }
    println!(
        "{}: lambda={lambda} delta={} largest pairwise distance after {} iterations {:e}",
        config.method,
        config.delta,
        config.iterations,
        report.max_pairwise_distance(config.iterations)
    );
    Ok(vec![out.finish()?])
}
