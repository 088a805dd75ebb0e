//! Sparse GLM estimation under covariate measurement error: the generalized
//! matrix uncertainty selector and lasso, their δ = 0 counterparts, tuning
//! by cross-validation and the elbow rule, and a Monte Carlo harness.

pub mod data;
pub mod error;
pub mod estimator;
pub mod family;
pub mod gmul;
pub mod gmus;
pub mod irls;
pub mod lp;
pub mod selection;
pub mod simulation;

pub use data::{standardize, with_intercept_column, Dataset, Standardization};
pub use error::{Error, Result};
pub use estimator::Estimator;
pub use family::{FamilyKind, GlmFamily};
pub use gmul::{gmul_fit, kkt_check, lasso_fit, KktCertificate};
pub use gmus::{gds_fit, gmus_fit};
pub use irls::{constraint_slack, FitResult, InitialBeta, IrlsConfig};
pub use selection::{elbow_curve, elbow_select, kfold_cv, CvResult, ElbowCurve, ElbowSelection};
pub use simulation::{generate_dataset, run_monte_carlo, MetricsTable, SelectionMetrics, SimulationConfig};
