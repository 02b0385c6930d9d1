//! Phase transition for factor eigenvalues: which factors produce an
//! outlier above the noise edge, and where that outlier sits.
//!
//! All quantities are computed on the signal-to-noise scale
//! `gamma / sigma^2`; the limits `lambda` are in units of `sigma^4`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{lsd_edges, t_at_b_plus, z_of_t_unchecked, AspectRatio};

/// Population parameters of one factor series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorParams {
    /// Stationary variance (strength) of the factor series.
    pub gamma0: f64,
    /// Lag-1 autocovariance of the factor series.
    pub gamma1: f64,
    /// Noise variance.
    pub sigma2: f64,
}

impl FactorParams {
    pub fn new(gamma0: f64, gamma1: f64, sigma2: f64) -> Result<Self> {
        let params = Self {
            gamma0,
            gamma1,
            sigma2,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0) || !self.gamma0.is_finite() {
            return Err(Error::domain(format!(
                "gamma0 must be > 0, got {}",
                self.gamma0
            )));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::domain(format!(
                "sigma2 must be > 0, got {}",
                self.sigma2
            )));
        }
        if !self.gamma1.is_finite() || self.gamma1.abs() > self.gamma0 {
            return Err(Error::domain(format!(
                "|gamma1| must not exceed gamma0 (got gamma0 = {}, gamma1 = {})",
                self.gamma0, self.gamma1
            )));
        }
        Ok(())
    }

    /// `(gamma0 / sigma^2, gamma1 / sigma^2)`.
    pub fn snr(&self) -> (f64, f64) {
        (self.gamma0 / self.sigma2, self.gamma1 / self.sigma2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionResult {
    pub t1: f64,
    pub t_b_plus: f64,
    pub significant: bool,
    /// Almost-sure limit of `l_i / sigma^4`.
    pub lambda: f64,
    pub b: f64,
}

impl TransitionResult {
    /// The limit on the raw eigenvalue scale, `lambda * sigma^4`.
    pub fn lambda_raw(&self, sigma2: f64) -> f64 {
        self.lambda * sigma2 * sigma2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBounds {
    /// Corner `(tau0, tau0)` of the undetectable quadrilateral.
    pub tau0: f64,
    /// Strength `y / T(b+)` above which every factor is significant.
    pub tau1: f64,
}

/// Smaller positive root `T1` of
/// `(g0^2 - g1^2) T^2 - (g1^2 + 2 y g0) T + y^2 = 0` with `g = gamma / sigma^2`.
///
/// Written as `2C / (B + sqrt(B^2 - 4AC))`, which stays accurate when the
/// leading coefficient vanishes (`|gamma1| = gamma0`) and then reduces to the
/// linear solution `y^2 / (g1^2 + 2 y g0)`.
pub fn t1_of(params: &FactorParams, y: AspectRatio) -> Result<f64> {
    params.validate()?;
    let (g0, g1) = params.snr();
    Ok(t1_snr(g0, g1, y.value()))
}

pub(crate) fn t1_snr(g0: f64, g1: f64, y: f64) -> f64 {
    let a = g0 * g0 - g1 * g1;
    let b = g1 * g1 + 2.0 * y * g0;
    let c = y * y;
    // b^2 - 4ac = g1^4 + 4 y g0 g1^2 + 4 y^2 g1^2 >= 0
    let disc = (b * b - 4.0 * a * c).max(0.0);
    2.0 * c / (b + disc.sqrt())
}

/// Limit of the factor eigenvalue and whether it separates from the noise.
pub fn spike_limit(params: &FactorParams, y: AspectRatio) -> Result<TransitionResult> {
    let t1 = t1_of(params, y)?;
    let t_b_plus = t_at_b_plus(y);
    let (_, b) = lsd_edges(y);
    // T1 = T(b+) counts as not significant.
    let significant = t1 < t_b_plus;
    let lambda = if significant {
        z_of_t_unchecked(t1, y.value()).max(b)
    } else {
        b
    };
    Ok(TransitionResult {
        t1,
        t_b_plus,
        significant,
        lambda,
        b,
    })
}

/// Significance read off the explicit region in the SNR plane rather than
/// through `T1`.
pub fn is_significant_region(params: &FactorParams, y: AspectRatio) -> Result<bool> {
    params.validate()?;
    let (g0, g1) = params.snr();
    Ok(significant_snr(g0, g1, y))
}

pub(crate) fn significant_snr(g0: f64, g1: f64, y: AspectRatio) -> bool {
    let tb = t_at_b_plus(y);
    let s = (tb * tb + tb).sqrt();
    let RegionBounds { tau0, .. } = region_bounds(y);
    let g1 = g1.abs();
    if g1 > tau0 {
        true
    } else {
        g0 > (y.value() - s * g1) / tb
    }
}

pub fn region_bounds(y: AspectRatio) -> RegionBounds {
    let tb = t_at_b_plus(y);
    let yv = y.value();
    RegionBounds {
        tau0: yv / (tb + (tb * tb + tb).sqrt()),
        tau1: yv / tb,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCurve {
    /// Detection frontier `(g0 T(b+) - y)^2 = g1^2 (T(b+)^2 + T(b+))`
    /// between `(tau0, tau0)` and `(tau1, 0)`.
    DetectionUpper,
    /// Mirror image of [`BoundaryCurve::DetectionUpper`] below the axis.
    DetectionLower,
    /// `2y g0 + g1^2 = 2 (g0^2 - g1^2) T(b+)`, where the two algebraic cases
    /// of the transition condition meet. Not a significance boundary.
    CaseSplitUpper,
    CaseSplitLower,
    /// `g1 = g0`.
    CauchySchwarzUpper,
    /// `g1 = -g0`.
    CauchySchwarzLower,
}

impl BoundaryCurve {
    pub fn id(self) -> &'static str {
        match self {
            Self::DetectionUpper => "detection_upper",
            Self::DetectionLower => "detection_lower",
            Self::CaseSplitUpper => "case_split_upper",
            Self::CaseSplitLower => "case_split_lower",
            Self::CauchySchwarzUpper => "cauchy_schwarz_upper",
            Self::CauchySchwarzLower => "cauchy_schwarz_lower",
        }
    }

    pub fn is_detection_frontier(self) -> bool {
        matches!(self, Self::DetectionUpper | Self::DetectionLower)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub curve: BoundaryCurve,
    pub gamma0_snr: f64,
    pub gamma1_snr: f64,
}

/// Curves bounding the undetectable region in the `(gamma0, gamma1) / sigma^2`
/// plane, `n_points` per curve. The plotting window extends to
/// `max(5, 2 tau1)` along the `gamma0` axis.
pub fn detectability_boundary(y: AspectRatio, n_points: usize) -> Result<Vec<BoundaryPoint>> {
    if n_points < 2 {
        return Err(Error::domain("detectability_boundary needs n_points >= 2"));
    }
    let tb = t_at_b_plus(y);
    let s = (tb * tb + tb).sqrt();
    let yv = y.value();
    let RegionBounds { tau0, tau1 } = region_bounds(y);
    let g0_max = (2.0 * tau1).max(5.0);
    let grid = |lo: f64, hi: f64| {
        (0..n_points).map(move |i| lo + (hi - lo) * i as f64 / (n_points - 1) as f64)
    };

    let mut out = Vec::with_capacity(6 * n_points);
    for g0 in grid(tau0, tau1) {
        let g1 = ((yv - g0 * tb) / s).max(0.0);
        out.push(BoundaryPoint {
            curve: BoundaryCurve::DetectionUpper,
            gamma0_snr: g0,
            gamma1_snr: g1,
        });
        out.push(BoundaryPoint {
            curve: BoundaryCurve::DetectionLower,
            gamma0_snr: g0,
            gamma1_snr: -g1,
        });
    }
    for g0 in grid(tau1, g0_max) {
        let g1 = ((2.0 * tb * g0 * g0 - 2.0 * yv * g0) / (1.0 + 2.0 * tb))
            .max(0.0)
            .sqrt();
        out.push(BoundaryPoint {
            curve: BoundaryCurve::CaseSplitUpper,
            gamma0_snr: g0,
            gamma1_snr: g1,
        });
        out.push(BoundaryPoint {
            curve: BoundaryCurve::CaseSplitLower,
            gamma0_snr: g0,
            gamma1_snr: -g1,
        });
    }
    for g0 in grid(0.0, g0_max) {
        out.push(BoundaryPoint {
            curve: BoundaryCurve::CauchySchwarzUpper,
            gamma0_snr: g0,
            gamma1_snr: g0,
        });
        out.push(BoundaryPoint {
            curve: BoundaryCurve::CauchySchwarzLower,
            gamma0_snr: g0,
            gamma1_snr: -g0,
        });
    }
    Ok(out)
}

/// Write boundary points as CSV with columns `curve_id,gamma0_snr,gamma1_snr`.
pub fn write_boundary_csv<W: std::io::Write>(points: &[BoundaryPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["curve_id", "gamma0_snr", "gamma1_snr"])?;
    for p in points {
        w.write_record([
            p.curve.id().to_string(),
            p.gamma0_snr.to_string(),
            p.gamma1_snr.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<boundary csv>", e))?;
    Ok(())
}
