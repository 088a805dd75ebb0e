use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "gmus", version, about = "Sparse GLM estimation with measurement-error correction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one estimator at (lambda, delta) and write its coefficients.
    Fit(Flags),
    /// Cross-validate lambda for the delta = 0 estimator.
    Cv(Flags),
    /// Sweep delta at fixed lambda and pick the elbow.
    Elbow(Flags),
    /// Monte Carlo covariate-selection experiment on simulated data.
    Simulate(Flags),
    /// Outer-loop traces from random starting points on simulated data.
    Convergence(Flags),
}

/// Flags shared by every command. Each overrides the key of the same name in
/// `--config`.
#[derive(Debug, Args, Default)]
pub struct Flags {
    /// Flat key=value file with defaults for any flag below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// logistic, poisson or gaussian.
    #[arg(long)]
    pub family: Option<String>,
    /// lasso, gds, gmul or gmus.
    #[arg(long)]
    pub method: Option<String>,
    /// Without it, fit and elbow cross-validate lambda first.
    #[arg(long)]
    pub lambda: Option<String>,
    /// min or se: which cross-validated lambda to use.
    #[arg(long)]
    pub lambda_rule: Option<String>,
    #[arg(long)]
    pub delta: Option<String>,
    /// start:stop:step
    #[arg(long)]
    pub delta_grid: Option<String>,
    #[arg(long)]
    pub k_folds: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub reps: Option<String>,
    /// CSV with a header row.
    #[arg(long)]
    pub input: Option<String>,
    /// Name of the response column.
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long)]
    pub output_dir: Option<String>,
    /// Add an unpenalized intercept.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub intercept: Option<String>,
    #[arg(long)]
    pub lambda_grid_length: Option<String>,
    #[arg(long)]
    pub lambda_grid_ratio: Option<String>,
    /// Simulated sample size.
    #[arg(long)]
    pub n: Option<String>,
    /// Simulated number of covariates.
    #[arg(long)]
    pub p: Option<String>,
    /// Simulated support size.
    #[arg(long)]
    pub s: Option<String>,
    /// Measurement-error standard deviation.
    #[arg(long)]
    pub sigma_u: Option<String>,
    /// Common nonzero coefficient of the simulated model.
    #[arg(long)]
    pub beta_value: Option<String>,
    /// Random starts for `convergence`.
    #[arg(long)]
    pub starts: Option<String>,
    /// Outer iterations recorded by `convergence`.
    #[arg(long)]
    pub iterations: Option<String>,
    /// Plateau tolerance for averaged elbow curves in `simulate`.
    #[arg(long)]
    pub plateau_tol: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("family", &self.family),
            ("method", &self.method),
            ("lambda", &self.lambda),
            ("lambda-rule", &self.lambda_rule),
            ("delta", &self.delta),
            ("delta-grid", &self.delta_grid),
            ("k-folds", &self.k_folds),
            ("seed", &self.seed),
            ("reps", &self.reps),
            ("input", &self.input),
            ("response", &self.response),
            ("output-dir", &self.output_dir),
            ("intercept", &self.intercept),
            ("lambda-grid-length", &self.lambda_grid_length),
            ("lambda-grid-ratio", &self.lambda_grid_ratio),
            ("n", &self.n),
            ("p", &self.p),
            ("s", &self.s),
            ("sigma-u", &self.sigma_u),
            ("beta-value", &self.beta_value),
            ("starts", &self.starts),
            ("iterations", &self.iterations),
            ("plateau-tol", &self.plateau_tol),
        ]
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            config.apply_file(path)?;
        }
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                config.set(key, v).map_err(|e| anyhow::anyhow!("--{key}: {e}"))?;
            }
        }
        Ok(config)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let written = match &cli.command {
        Command::Fit(f) => commands::fit(f.resolve()?)?,
        Command::Cv(f) => commands::cv(f.resolve()?)?,
        Command::Elbow(f) => commands::elbow(f.resolve()?)?,
        Command::Simulate(f) => commands::simulate(f.resolve()?)?,
        Command::Convergence(f) => commands::convergence(f.resolve()?)?,
    };
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
