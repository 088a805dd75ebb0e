//! Exponential-family mean functions used by the IRLS solvers.
//!
//! Only canonical links are supported. The linear predictor is clamped to
//! `[-clip_eta, clip_eta]` before evaluating the logistic and Poisson mean
//! functions so that weights and means stay finite for extreme predictors.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};

/// Default clamp applied to the linear predictor.
pub const DEFAULT_CLIP_ETA: f64 = 30.0;

/// Lower bound applied to first-order IRLS weights.
pub const WEIGHT_FLOOR: f64 = 1e-10;

/// Poisson means below this value are sampled by inversion.
const POISSON_INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Logistic,
    Poisson,
    Gaussian,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Logistic => "logistic",
            FamilyKind::Poisson => "poisson",
            FamilyKind::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" | "binomial" => Ok(FamilyKind::Logistic),
            "poisson" => Ok(FamilyKind::Poisson),
            "gaussian" | "linear" => Ok(FamilyKind::Gaussian),
            _ => Err(Error::UnknownName {
                kind: "family",
                value: s.to_string(),
            }),
        }
    }
}

/// A GLM family with canonical link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmFamily {
    pub kind: FamilyKind,
    /// Magnitude at which the linear predictor is clamped (logistic/Poisson).
    pub clip_eta: f64,
}

impl GlmFamily {
    pub fn new(kind: FamilyKind) -> Self {
        Self {
            kind,
            clip_eta: DEFAULT_CLIP_ETA,
        }
    }

    pub fn logistic() -> Self {
        Self::new(FamilyKind::Logistic)
    }

    pub fn poisson() -> Self {
        Self::new(FamilyKind::Poisson)
    }

    pub fn gaussian() -> Self {
        Self::new(FamilyKind::Gaussian)
    }

    pub fn with_clip_eta(mut self, clip_eta: f64) -> Result<Self> {
        if !(clip_eta.is_finite() && clip_eta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "clip_eta must be positive and finite, got {clip_eta}"
            )));
        }
        self.clip_eta = clip_eta;
        Ok(self)
    }

    #[inline]
    fn clamp(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => theta,
            _ => theta.clamp(-self.clip_eta, self.clip_eta),
        }
    }

    /// Mean function `mu(theta)`.
    pub fn mean(&self, theta: f64) -> Result<f64> {
        check_finite(theta)?;
        Ok(self.mean_unchecked(theta))
    }

    #[inline]
    pub(crate) fn mean_unchecked(&self, theta: f64) -> f64 {
        let t = self.clamp(theta);
        match self.kind {
            FamilyKind::Logistic => logistic(t),
            FamilyKind::Poisson => t.exp(),
            FamilyKind::Gaussian => t,
        }
    }

    /// Derivative of order `order` (1 or 2) of the mean function.
    pub fn mean_derivative(&self, theta: f64, order: usize) -> Result<f64> {
        check_finite(theta)?;
        if !(1..=2).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        Ok(self.mean_derivative_unchecked(theta, order))
    }

    #[inline]
    pub(crate) fn mean_derivative_unchecked(&self, theta: f64, order: usize) -> f64 {
        let t = self.clamp(theta);
        match self.kind {
            FamilyKind::Poisson => t.exp(),
            FamilyKind::Logistic => {
                let mu = logistic(t);
                let first = mu * (1.0 - mu);
                if order == 1 {
                    first
                } else {
                    first * (1.0 - 2.0 * mu)
                }
            }
            FamilyKind::Gaussian => {
                if order == 1 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Cumulant function `b(theta)` with `b' = mu`.
    pub fn cumulant(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Logistic => {
                // log(1 + e^t), computed without overflow
                if theta > 0.0 {
                    theta + (-theta).exp().ln_1p()
                } else {
                    theta.exp().ln_1p()
                }
            }
            FamilyKind::Poisson => theta.exp(),
            FamilyKind::Gaussian => 0.5 * theta * theta,
        }
    }

    /// Checks that a response value lies in the family's support.
    pub fn check_response(&self, y: f64) -> Result<()> {
        let ok = match self.kind {
            FamilyKind::Logistic => y == 0.0 || y == 1.0,
            FamilyKind::Poisson => y >= 0.0 && y.fract() == 0.0,
            FamilyKind::Gaussian => y.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "response value {y} is outside the {} support",
                self.kind
            )))
        }
    }

    /// Standard GLM deviance `2 [loglik(saturated) - loglik(fitted)]`.
    ///
    /// For the Gaussian family this is the residual sum of squares.
    pub fn deviance(&self, y: &[f64], mu: &[f64]) -> Result<f64> {
        if y.len() != mu.len() {
            return Err(Error::DimensionMismatch(format!(
                "response has length {} but fitted means have length {}",
                y.len(),
                mu.len()
            )));
        }
        let mut total = 0.0;
        for (&yi, &mi) in y.iter().zip(mu) {
            self.check_response(yi)?;
            total += match self.kind {
                FamilyKind::Logistic => {
                    if !(mi > 0.0 && mi < 1.0) {
                        return Err(Error::InvalidArgument(format!(
                            "logistic mean {mi} is outside (0, 1)"
                        )));
                    }
                    if yi == 1.0 {
                        -2.0 * mi.ln()
                    } else {
                        -2.0 * (-mi).ln_1p()
                    }
                }
                FamilyKind::Poisson => {
                    if !(mi > 0.0 && mi.is_finite()) {
                        return Err(Error::InvalidArgument(format!(
                            "Poisson mean {mi} must be positive and finite"
                        )));
                    }
                    let log_term = if yi > 0.0 { yi * (yi / mi).ln() } else { 0.0 };
                    2.0 * (log_term - (yi - mi))
                }
                FamilyKind::Gaussian => {
                    if !mi.is_finite() {
                        return Err(Error::InvalidArgument(format!(
                            "Gaussian mean {mi} is not finite"
                        )));
                    }
                    (yi - mi) * (yi - mi)
                }
            };
        }
        Ok(total.max(0.0))
    }

    /// Draws one response per linear predictor.
    pub fn sample_response<R: Rng + ?Sized>(&self, eta: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        eta.iter()
            .map(|&e| {
                check_finite(e)?;
                let mu = self.mean_unchecked(e);
                Ok(match self.kind {
                    FamilyKind::Logistic => {
                        if rng.random::<f64>() < mu {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    FamilyKind::Poisson => sample_poisson(mu, rng),
                    FamilyKind::Gaussian => {
                        let noise: f64 = rng.sample(StandardNormal);
                        mu + noise
                    }
                })
            })
            .collect()
    }
}

#[inline]
fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn check_finite(theta: f64) -> Result<()> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "linear predictor must be finite, got {theta}"
        )))
    }
}

fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean < POISSON_INVERSION_LIMIT {
        // sequential search over the CDF
        let u: f64 = rng.random();
        let mut k = 0u32;
        let mut prob = (-mean).exp();
        let mut cdf = prob;
        while u > cdf && k < 1000 {
            k += 1;
            prob *= mean / f64::from(k);
            cdf += prob;
        }
        f64::from(k)
    } else {
        // mean is finite and >= 30 here, so construction cannot fail
        Poisson::new(mean)
            .map(|d| d.sample(rng))
            .unwrap_or(mean.round())
    }
}
