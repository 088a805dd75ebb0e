use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::family::GlmFamily;
use crate::gmul::{gmul_fit, lasso_fit};
use crate::gmus::{gds_fit, gmus_fit};
use crate::irls::{FitResult, IrlsConfig};

/// The four sparse estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    Lasso,
    Gds,
    Gmul,
    Gmus,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Lasso, Estimator::Gds, Estimator::Gmul, Estimator::Gmus];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Lasso => "lasso",
            Estimator::Gds => "gds",
            Estimator::Gmul => "gmul",
            Estimator::Gmus => "gmus",
        }
    }

    /// Display label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Estimator::Lasso => "Lasso",
            Estimator::Gds => "GDS",
            Estimator::Gmul => "GMUL",
            Estimator::Gmus => "GMUS",
        }
    }

    /// The δ = 0 estimator whose cross-validated λ this one reuses.
    pub fn base(self) -> Estimator {
        match self {
            Estimator::Lasso | Estimator::Gmul => Estimator::Lasso,
            Estimator::Gds | Estimator::Gmus => Estimator::Gds,
        }
    }

    /// The measurement-error corrected counterpart.
    pub fn corrected(self) -> Estimator {
        match self {
            Estimator::Lasso | Estimator::Gmul => Estimator::Gmul,
            Estimator::Gds | Estimator::Gmus => Estimator::Gmus,
        }
    }

    pub fn uses_delta(self) -> bool {
        matches!(self, Estimator::Gmul | Estimator::Gmus)
    }

    /// Fits at (λ, δ). δ is ignored by the lasso and the GDS.
    pub fn fit(
        self,
        w: ArrayView2<'_, f64>,
        y: ArrayView1<'_, f64>,
        family: &GlmFamily,
        lambda: f64,
        delta: f64,
        config: &IrlsConfig,
    ) -> Result<FitResult> {
        match self {
            Estimator::Lasso => lasso_fit(w, y, family, lambda, config),
            Estimator::Gds => gds_fit(w, y, family, lambda, config),
            Estimator::Gmul => gmul_fit(w, y, family, lambda, delta, config),
            Estimator::Gmus => gmus_fit(w, y, family, lambda, delta, config),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lasso" => Ok(Estimator::Lasso),
            "gds" => Ok(Estimator::Gds),
            "gmul" => Ok(Estimator::Gmul),
            "gmus" => Ok(Estimator::Gmus),
            _ => Err(Error::UnknownName { kind: "method", value: s.to_string() }),
        }
    }
}
