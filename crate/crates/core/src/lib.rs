//! Estimating the number of factors in high-dimensional time series from the
//! singular values of the lag-1 sample autocovariance matrix.
//!
//! - [`spectral`]: the limiting noise spectrum (edges, Stieltjes and T-transforms, density).
//! - [`transition`]: which factors separate from the noise edge, and where.
//! - [`estimator`]: spectra of observed panels, the ratio estimators and threshold calibration.
//! - [`simulation`]: AR(1) factor designs and Monte-Carlo experiments.
//! - [`cli`]: the `lagfactor` command-line front end.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimator;
mod linalg;
pub mod panel;
pub mod rng;
pub mod simulation;
pub mod spectral;
pub mod transition;

pub use error::{Error, Result};
pub use estimator::{
    calibrate_dt, k_hat, k_tilde, k_tilde_multistep, lag1_autocov, mhat_spectrum,
    CalibrationReport, EstimatorConfig, KHat, MultistepStep, Spectrum,
};
pub use panel::Panel;
pub use simulation::{
    generate_panel, run_mc, scenario_preset, stationary_factor_moments, theoretical_limits,
    Loadings, MCResult, Method, Scenario, ScenarioSpec,
};
pub use spectral::{
    lsd_density, lsd_edges, stieltjes_m, t_at_b_plus, t_transform, z_of_t, AspectRatio,
    SpectralLaw, TransformPoint,
};
pub use transition::{
    detectability_boundary, is_significant_region, region_bounds, spike_limit, t1_of,
    BoundaryCurve, BoundaryPoint, FactorParams, RegionBounds, TransitionResult,
};
