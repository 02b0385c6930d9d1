//! Lag-1 autocovariance spectra and the ratio-based factor-number estimators.
//!
//! For a panel `y_1, ..., y_{T+1}` the lag-1 sample autocovariance is
//! `S = (1/T) sum_{t>=2} y_t y_{t-1}'`. Its squared singular values
//! `l_1 >= l_2 >= ...` are the eigenvalues of `S S'`, and the estimators
//! work on the ratios `theta_j = l_{j+1} / l_j`.

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::panel::Panel;
use crate::rng::{gaussian_matrix, stream_rng};

pub const DEFAULT_CALIBRATION_REPS: usize = 2000;
pub const DEFAULT_QUANTILE_LEVEL: f64 = 0.005;

/// `(1/T) * Y_1 * Y_0'` where `Y_0`, `Y_1` are the first and last `T` columns.
pub fn lag1_autocov(panel: &Panel) -> Mat<f64> {
    autocov_of(panel.data())
}

fn autocov_of(data: MatRef<'_, f64>) -> Mat<f64> {
    let t = data.ncols() - 1;
    let y0 = data.subcols(0, t);
    let y1 = data.subcols(1, t);
    linalg::mul_transpose(y1, y0, 1.0 / t as f64)
}

/// Eigenvalues of `S S'` (descending) and their consecutive ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// `ratios[j - 1] = l_{j+1} / l_j`; a ratio with zero denominator is 1.
    pub ratios: Vec<f64>,
}

impl Spectrum {
    /// Sorts descending and rejects negative or non-finite values.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InsufficientData("empty spectrum".into()));
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::domain(format!("invalid eigenvalue {bad}")));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let ratios = eigenvalues
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 1.0 })
            .collect();
        Ok(Self {
            eigenvalues,
            ratios,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `theta_j` with the 1-based index used throughout.
    pub fn theta(&self, j: usize) -> Option<f64> {
        j.checked_sub(1).and_then(|i| self.ratios.get(i).copied())
    }
}

/// Spectrum of `S S'` from the singular values of `S`, truncated to `min(p, T)`.
pub fn mhat_spectrum(panel: &Panel) -> Result<Spectrum> {
    spectrum_of(panel.data())
}

fn spectrum_of(data: MatRef<'_, f64>) -> Result<Spectrum> {
    let (p, n) = data.shape();
    let s = linalg::singular_values(autocov_of(data).as_ref())?;
    Spectrum::from_eigenvalues(s.iter().take(p.min(n - 1)).map(|v| v * v).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub d_t: f64,
    /// Largest `j` scanned.
    pub search_cap: usize,
    /// Require two consecutive ratios above the threshold.
    pub require_two: bool,
}

impl EstimatorConfig {
    pub fn new(d_t: f64, search_cap: usize, require_two: bool) -> Result<Self> {
        if !(d_t > 0.0 && d_t < 1.0) {
            return Err(Error::domain(format!("d_T must lie in (0, 1), got {d_t}")));
        }
        if search_cap == 0 {
            return Err(Error::domain("search cap must be at least 1"));
        }
        Ok(Self {
            d_t,
            search_cap,
            require_two,
        })
    }

    /// `min(p, T) - 1`.
    pub fn default_cap(p: usize, t: usize) -> usize {
        p.min(t).saturating_sub(1).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KHat {
    pub k: usize,
    /// No ratio crossed the threshold within the search cap; `k` is the cap.
    pub saturated: bool,
}

fn check_cap(spectrum: &Spectrum, cap: usize) -> Result<()> {
    if cap == 0 || cap >= spectrum.len() {
        return Err(Error::domain(format!(
            "search cap {cap} outside [1, {}) for a spectrum of length {}",
            spectrum.len(),
            spectrum.len()
        )));
    }
    Ok(())
}

/// First `j` with `theta_j > 1 - d_T` (and `theta_{j+1}` too when
/// `require_two`), minus one.
pub fn k_hat(spectrum: &Spectrum, config: &EstimatorConfig) -> Result<KHat> {
    EstimatorConfig::new(config.d_t, config.search_cap, config.require_two)?;
    check_cap(spectrum, config.search_cap)?;
    let level = 1.0 - config.d_t;
    let above = |j: usize| spectrum.theta(j).is_some_and(|th| th > level);
    for j in 1..=config.search_cap {
        if above(j) && (!config.require_two || above(j + 1)) {
            return Ok(KHat {
                k: j - 1,
                saturated: false,
            });
        }
    }
    Ok(KHat {
        k: config.search_cap,
        saturated: true,
    })
}

/// `argmin_{1 <= i <= cap} theta_i`, smallest index on ties.
pub fn k_tilde(spectrum: &Spectrum, search_cap: usize) -> Result<usize> {
    check_cap(spectrum, search_cap)?;
    let mut best = 1;
    for i in 2..=search_cap {
        if spectrum.ratios[i - 1] < spectrum.ratios[best - 1] {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultistepStep {
    pub step: usize,
    pub r_hat: usize,
    pub cumulative_k: usize,
}

/// Residuals `(I - U U') y_t` where `U` holds the top `r` left singular
/// vectors of the lag-1 autocovariance.
pub fn remove_top_directions(panel: &Panel, r: usize) -> Result<Panel> {
    let (_, u) = linalg::left_svd(lag1_autocov(panel).as_ref())?;
    Panel::new(project_out(panel.data(), u.as_ref().subcols(0, r)))
}

fn project_out(data: MatRef<'_, f64>, u: MatRef<'_, f64>) -> Mat<f64> {
    let coef = linalg::mul(u.transpose(), data, 1.0);
    let mut resid = data.to_owned();
    faer::linalg::matmul::matmul(
        resid.as_mut(),
        faer::Accum::Add,
        u,
        coef.as_ref(),
        -1.0,
        faer::Par::Seq,
    );
    resid
}

/// Repeated one-step `k_tilde`, projecting out the detected directions after
/// each step. The scan range shrinks with the rank already removed.
pub fn k_tilde_multistep(
    panel: &Panel,
    max_steps: usize,
    search_cap: usize,
) -> Result<Vec<MultistepStep>> {
    if max_steps == 0 {
        return Err(Error::domain("max_steps must be at least 1"));
    }
    let (p, t) = (panel.p(), panel.t());
    let mut data = panel.data().to_owned();
    let mut cumulative = 0;
    let mut trace = Vec::with_capacity(max_steps);
    for step in 1..=max_steps {
        let rank = p.saturating_sub(cumulative).min(t);
        if rank < 2 {
            return Err(Error::RankExhausted {
                step,
                detail: format!("{cumulative} of {p} directions already removed"),
            });
        }
        let (s, u) = linalg::left_svd(autocov_of(data.as_ref()).as_ref())?;
        let spectrum = Spectrum::from_eigenvalues(s.iter().take(rank).map(|v| v * v).collect())?;
        let r_hat = k_tilde(&spectrum, search_cap.min(rank - 1))?;
        if cumulative + r_hat >= p {
            return Err(Error::RankExhausted {
                step,
                detail: format!("r_hat = {r_hat} with {cumulative} of {p} removed"),
            });
        }
        cumulative += r_hat;
        trace.push(MultistepStep {
            step,
            r_hat,
            cumulative_k: cumulative,
        });
        if step < max_steps {
            data = project_out(data.as_ref(), u.as_ref().subcols(0, r_hat));
        }
    }
    Ok(trace)
}

/// `T^{2/3} (nu_2 / nu_1 - 1)` for `reps` pure-noise panels of standard
/// deviation `noise_sd`; replication `r` uses stream `r` of `seed`.
pub fn calibration_statistics(
    p: usize,
    t: usize,
    reps: usize,
    seed: u64,
    noise_sd: f64,
) -> Result<Vec<f64>> {
    if p < 2 || t < 2 {
        return Err(Error::InsufficientData(format!(
            "need p, T >= 2, got p={p}, T={t}"
        )));
    }
    let scale = (t as f64).powf(2.0 / 3.0);
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let noise = gaussian_matrix(p, t + 1, noise_sd, &mut rng);
            let s = linalg::singular_values(autocov_of(noise.as_ref()).as_ref())?;
            let ratio = (s[1] / s[0]).powi(2);
            Ok(scale * (ratio - 1.0))
        })
        .collect()
}

/// Sample quantile by linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and nonempty.
pub fn quantile_type7(sorted: &[f64], level: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub p: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub reps: usize,
    pub quantile_level: f64,
    pub quantile_method: String,
    pub q: f64,
    #[serde(rename = "d_T")]
    pub d_t: f64,
    pub seed: u64,
}

/// Threshold `d_T = |q| / T^{2/3}` from the lower `quantile_level` quantile
/// `q` of the pure-noise statistic.
pub fn calibrate_dt(
    p: usize,
    t: usize,
    reps: usize,
    quantile_level: f64,
    seed: u64,
) -> Result<CalibrationReport> {
    if p < 10 || t < 10 {
        return Err(Error::domain(format!(
            "calibration needs p, T >= 10, got p={p}, T={t}"
        )));
    }
    if reps < 100 {
        return Err(Error::domain(format!(
            "calibration needs at least 100 reps, got {reps}"
        )));
    }
    if !(quantile_level > 0.0 && quantile_level < 0.5) {
        return Err(Error::domain(format!(
            "quantile level must lie in (0, 0.5), got {quantile_level}"
        )));
    }
    let mut stats = calibration_statistics(p, t, reps, seed, 1.0)?;
    stats.sort_by(f64::total_cmp);
    let q = quantile_type7(&stats, quantile_level);
    let d_t = q.abs() / (t as f64).powf(2.0 / 3.0);
    if q >= 0.0 || !(d_t < 1.0) {
        return Err(Error::CalibrationFailure(format!(
            "quantile {q} gives d_T = {d_t}"
        )));
    }
    log::debug!("calibrated p={p} T={t} reps={reps}: q={q:.5} d_T={d_t:.5}");
    Ok(CalibrationReport {
        p,
        t,
        reps,
        quantile_level,
        quantile_method: "type7".into(),
        q,
        d_t,
        seed,
    })
}
