//! Effective run configuration: defaults, then the `--config` file, then flags.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use gmus_core::selection::DEFAULT_FOLDS;
use gmus_core::simulation::LambdaRule;
use gmus_core::{Estimator, FamilyKind};

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaGridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl DeltaGridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        Ok(gmus_core::selection::delta_grid(self.start, self.stop, self.step)?)
    }
}

impl FromStr for DeltaGridSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts[..] else {
            bail!("expected start:stop:step, got `{s}`");
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| anyhow!("`{v}` is not a number in `{s}`"));
        Ok(Self { start: num(start)?, stop: num(stop)?, step: num(step)? })
    }
}

impl Display for DeltaGridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: FamilyKind,
    pub method: Estimator,
    pub lambda: Option<f64>,
    pub lambda_rule: LambdaRule,
    pub delta: f64,
    pub delta_grid: DeltaGridSpec,
    pub k_folds: usize,
    pub seed: u64,
    pub reps: usize,
    pub input: Option<PathBuf>,
    pub response: String,
    pub output_dir: PathBuf,
    pub intercept: bool,
    /// Unset means the command's own default.
    pub lambda_grid_length: Option<usize>,
    pub lambda_grid_ratio: Option<f64>,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub sigma_u: f64,
    /// Defaults to 1 for logistic and Gaussian data, 0.2 for Poisson.
    pub beta_value: Option<f64>,
    pub starts: usize,
    pub iterations: usize,
    pub plateau_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            family: FamilyKind::Logistic,
            method: Estimator::Gmul,
            lambda: None,
            lambda_rule: LambdaRule::Min,
            delta: 0.0,
            delta_grid: DeltaGridSpec { start: 0.0, stop: 0.5, step: 0.025 },
            k_folds: DEFAULT_FOLDS,
            seed: 1,
            reps: 20,
            input: None,
            response: "y".into(),
            output_dir: PathBuf::from("."),
            intercept: false,
            lambda_grid_length: None,
            lambda_grid_ratio: None,
            n: 200,
            p: 500,
            s: 10,
            sigma_u: 0.2,
            beta_value: None,
            starts: 11,
            iterations: 10,
            plateau_tol: 0.5,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.trim().parse::<T>().map_err(|e| anyhow!("bad value `{value}` for {key}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("bad value `{value}` for {key}: expected true or false"),
    }
}

fn optional<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

impl RunConfig {
    /// Sets one key; keys may use `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let k = key.as_str();
        match k {
            "family" => self.family = parse(k, value)?,
            "method" => self.method = parse(k, value)?,
            "lambda" => self.lambda = if value.trim().is_empty() { None } else { Some(parse(k, value)?) },
            "lambda-rule" => self.lambda_rule = parse(k, value)?,
            "delta" => self.delta = parse(k, value)?,
            "delta-grid" => self.delta_grid = parse(k, value)?,
            "k-folds" => self.k_folds = parse(k, value)?,
            "seed" => self.seed = parse(k, value)?,
            "reps" => self.reps = parse(k, value)?,
            "input" => self.input = Some(value.trim()).filter(|v| !v.is_empty()).map(PathBuf::from),
            "response" => self.response = value.trim().to_string(),
            "output-dir" => self.output_dir = PathBuf::from(value.trim()),
            "intercept" => self.intercept = parse_bool(k, value)?,
            "lambda-grid-length" => {
                self.lambda_grid_length = if value.trim().is_empty() { None } else { Some(parse(k, value)?) }
            }
            "lambda-grid-ratio" => {
                self.lambda_grid_ratio = if value.trim().is_empty() { None } else { Some(parse(k, value)?) }
            }
            "n" => self.n = parse(k, value)?,
            "p" => self.p = parse(k, value)?,
            "s" => self.s = parse(k, value)?,
            "sigma-u" => self.sigma_u = parse(k, value)?,
            "beta-value" => self.beta_value = if value.trim().is_empty() { None } else { Some(parse(k, value)?) },
            "starts" => self.starts = parse(k, value)?,
            "iterations" => self.iterations = parse(k, value)?,
            "plateau-tol" => self.plateau_tol = parse(k, value)?,
            _ => bail!("unknown configuration key `{key}`"),
        }
        Ok(())
    }

    /// Applies a flat `key=value` file. Blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), i + 1))?;
            self.set(key, value).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(())
    }

    /// Fills unset λ-grid settings with the given defaults.
    pub fn default_lambda_grid(&mut self, length: usize, ratio: f64) -> (usize, f64) {
        (*self.lambda_grid_length.get_or_insert(length), *self.lambda_grid_ratio.get_or_insert(ratio))
    }

    pub fn beta_value(&self) -> f64 {
        self.beta_value.unwrap_or(match self.family {
            FamilyKind::Poisson => 0.2,
            _ => 1.0,
        })
    }

    /// Every setting in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("family", self.family.to_string()),
            ("method", self.method.to_string()),
            ("lambda", optional(&self.lambda)),
            ("lambda-rule", self.lambda_rule.name().to_string()),
            ("delta", self.delta.to_string()),
            ("delta-grid", self.delta_grid.to_string()),
            ("k-folds", self.k_folds.to_string()),
            ("seed", self.seed.to_string()),
            ("reps", self.reps.to_string()),
            ("input", optional(&self.input.as_ref().map(|p| p.display()))),
            ("response", self.response.clone()),
            ("output-dir", self.output_dir.display().to_string()),
            ("intercept", self.intercept.to_string()),
            ("lambda-grid-length", optional(&self.lambda_grid_length)),
            ("lambda-grid-ratio", optional(&self.lambda_grid_ratio)),
            ("n", self.n.to_string()),
            ("p", self.p.to_string()),
            ("s", self.s.to_string()),
            ("sigma-u", self.sigma_u.to_string()),
            ("beta-value", optional(&self.beta_value)),
            ("starts", self.starts.to_string()),
            ("iterations", self.iterations.to_string()),
            ("plateau-tol", self.plateau_tol.to_string()),
        ]
    }

    /// `# key=value` lines heading every output file.
    pub fn echo(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
    }
}
