//! Integer-valued autoregressive (INAR) models of order 1 and 2 for count
//! time series.
//!
//! The crate simulates INAR(p) data through binomial thinning, fits models
//! parametrically (Yule–Walker moments, conditional maximum likelihood) and
//! semiparametrically (joint maximum likelihood over the coefficients and a
//! free innovation pmf, optionally roughness-penalized), and runs
//! model-based bootstrap inference.

pub mod bootstrap;
pub mod error;
pub mod likelihood;
pub mod model;
pub mod optimizer;
pub mod parametric;
pub mod sampling;
pub mod semiparametric;

pub use bootstrap::{
    inar_bootstrap, percentile_ci, BootstrapMode, BootstrapResult, BootstrapSpec, ParameterInterval, PointFit,
    ReplicateEstimator,
};
pub use error::{InarError, Result};
pub use likelihood::{conditional_loglik, transition_pmf, TransitionContext, TransitionTally};
pub use model::{
    family_pmf, stationary_mean, validate_model, CountSeries, FamilyKind, InarCoefficients, InarModel,
    Innovations, InnovationPmf, ParametricFamily,
};
pub use optimizer::{logistic_map, maximize, simplex_map, Maximum, OptimizerSettings};
pub use parametric::{estimate_ml_parametric, estimate_moments, parametric_loglik, EstimationMethod, ParametricFit};
pub use sampling::{binomial_thin, draw_innovation, simulate_inar, split_seed, SimulationConfig};
pub use semiparametric::{
    estimate_penalized, estimate_semiparametric, roughness, validate_penalization, Penalty, PenaltyGrid,
    PenaltyScore, PenaltySelection, SemiparametricFit, SemiparametricInit,
};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
