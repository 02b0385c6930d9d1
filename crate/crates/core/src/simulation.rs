//! Synthetic AR(1) factor panels and seeded Monte-Carlo experiments.
//!
//! Factors follow `x_t = Theta x_{t-1} + e_t` with diagonal `Theta`, and the
//! panel is `y_t = A x_t + eps_t`. Factor `i` has innovation variance
//! `Gamma_i * p^{(1 - delta_i) / 2}`, so `delta_i < 1` gives a factor whose
//! strength grows with `p`.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use faer::Mat;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    calibrate_dt, k_hat, k_tilde, k_tilde_multistep, mhat_spectrum, CalibrationReport,
    EstimatorConfig, DEFAULT_CALIBRATION_REPS, DEFAULT_QUANTILE_LEVEL,
};
use crate::linalg;
use crate::panel::Panel;
use crate::rng::{gaussian_matrix, stream_rng};
use crate::spectral::{AspectRatio, SpectralLaw};
use crate::transition::{spike_limit, FactorParams};

/// How the `p x k` loading matrix is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Loadings {
    /// `A = [I_k; 0]`.
    #[default]
    Canonical,
    /// A fresh Haar-distributed orthonormal `A` per panel.
    Haar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub k: usize,
    /// AR(1) coefficients.
    pub theta: Vec<f64>,
    /// Innovation variances before strength scaling.
    pub gamma_diag: Vec<f64>,
    /// Strength exponents in `[0, 1]`.
    pub delta: Vec<f64>,
    pub sigma2: f64,
    pub p: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default)]
    pub loadings: Loadings,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        if self.theta.len() != k || self.gamma_diag.len() != k || self.delta.len() != k {
            return Err(Error::domain(format!(
                "k = {k} but theta/gamma/delta have lengths {}/{}/{}",
                self.theta.len(),
                self.gamma_diag.len(),
                self.delta.len()
            )));
        }
        if let Some(th) = self.theta.iter().find(|th| !(th.abs() < 1.0)) {
            return Err(Error::Nonstationary(th.abs()));
        }
        if self.gamma_diag.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::domain("innovation variances must be positive"));
        }
        if self.delta.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(Error::domain("strength exponents must lie in [0, 1]"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::domain(format!(
                "sigma2 must be positive, got {}",
                self.sigma2
            )));
        }
        if self.p == 0 || self.p < k {
            return Err(Error::domain(format!(
                "need p >= max(k, 1), got p={}, k={k}",
                self.p
            )));
        }
        if self.t < 2 {
            return Err(Error::InsufficientData(format!(
                "need T >= 2, got {}",
                self.t
            )));
        }
        Ok(())
    }

    /// `Gamma_i * p^{(1 - delta_i) / 2}`.
    pub fn effective_innovation_var(&self, i: usize) -> f64 {
        self.gamma_diag[i] * (self.p as f64).powf((1.0 - self.delta[i]) / 2.0)
    }

    pub fn y(&self) -> f64 {
        self.p as f64 / self.t as f64
    }

    pub fn pure_noise(p: usize, t: usize, sigma2: f64) -> Self {
        Self {
            k: 0,
            theta: vec![],
            gamma_diag: vec![],
            delta: vec![],
            sigma2,
            p,
            t,
            loadings: Loadings::Canonical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum Scenario {
    #[value(name = "I")]
    I,
    #[value(name = "II")]
    II,
    #[value(name = "III")]
    III,
    #[value(name = "IV")]
    IV,
}

pub fn scenario_preset(name: Scenario, p: usize, t: usize) -> ScenarioSpec {
    let (theta, gamma_diag, delta): (Vec<f64>, Vec<f64>, Vec<f64>) = match name {
        Scenario::I => (vec![0.6, 0.5], vec![4.0, 4.0], vec![0.5, 0.8]),
        Scenario::II => (
            vec![0.6, -0.5, 0.3, 0.2],
            vec![4.0, 4.0, 4.0, 1.0],
            vec![1.0; 4],
        ),
        Scenario::III => (vec![0.6, -0.5, 0.3], vec![2.0; 3], vec![1.0; 3]),
        Scenario::IV => (
            vec![0.6, 0.5, 0.6, -0.5, 0.3, 0.6, -0.5],
            vec![4.0, 4.0, 4.0, 4.0, 4.0, 2.0, 2.0],
            vec![0.5, 0.8, 1.0, 1.0, 1.0, 1.0, 1.0],
        ),
    };
    ScenarioSpec {
        k: theta.len(),
        theta,
        gamma_diag,
        delta,
        sigma2: 1.0,
        p,
        t,
        loadings: Loadings::Canonical,
    }
}

/// Stationary variance and lag-1 autocovariance of an AR(1) series.
pub fn stationary_factor_moments(theta: f64, innovation_var: f64) -> Result<(f64, f64)> {
    if !(theta.abs() < 1.0) {
        return Err(Error::Nonstationary(theta.abs()));
    }
    if !(innovation_var > 0.0 && innovation_var.is_finite()) {
        return Err(Error::domain(format!(
            "innovation variance must be positive, got {innovation_var}"
        )));
    }
    let gamma0 = innovation_var / (1.0 - theta * theta);
    Ok((gamma0, theta * gamma0))
}

/// Panel from stream 0 of `seed`.
pub fn generate_panel(spec: &ScenarioSpec, seed: u64) -> Result<Panel> {
    generate_panel_rep(spec, seed, 0)
}

/// Panel for replication `rep`, drawn from stream `rep` of `seed`.
pub fn generate_panel_rep(spec: &ScenarioSpec, seed: u64, rep: u64) -> Result<Panel> {
    spec.validate()?;
    let (p, n_obs, k) = (spec.p, spec.t + 1, spec.k);
    let mut rng = stream_rng(seed, rep);

    let mut factors = Mat::<f64>::zeros(k, n_obs);
    for i in 0..k {
        let theta = spec.theta[i];
        let var = spec.effective_innovation_var(i);
        let (gamma0, _) = stationary_factor_moments(theta, var)?;
        let sd = var.sqrt();
        let z: f64 = StandardNormal.sample(&mut rng);
        let mut x = gamma0.sqrt() * z;
        factors[(i, 0)] = x;
        for t in 1..n_obs {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = theta * x + sd * e;
            factors[(i, t)] = x;
        }
    }

    let mut data = gaussian_matrix(p, n_obs, spec.sigma2.sqrt(), &mut rng);
    if k > 0 {
        match spec.loadings {
            Loadings::Canonical => {
                for i in 0..k {
                    for t in 0..n_obs {
                        data[(i, t)] += factors[(i, t)];
                    }
                }
            }
            Loadings::Haar => {
                let g = gaussian_matrix(p, k, 1.0, &mut rng);
                let a = linalg::orthonormal_columns(g.as_ref());
                data += linalg::mul(a.as_ref(), factors.as_ref(), 1.0);
            }
        }
    }
    Panel::new(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    /// 1-based factor index.
    pub factor: usize,
    pub theta: f64,
    pub innovation_var: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    /// Strength grows with `p`; no finite limit.
    pub diverging: bool,
    pub t1: Option<f64>,
    pub t_b_plus: f64,
    /// Limit of `l_i / sigma^4`.
    pub lambda: Option<f64>,
    pub b: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitsTable {
    pub y: f64,
    pub a: f64,
    pub b: f64,
    pub t_b_plus: f64,
    pub k: usize,
    /// Number of significant factors.
    pub k0: usize,
    pub rows: Vec<LimitRow>,
}

pub fn theoretical_limits(spec: &ScenarioSpec) -> Result<LimitsTable> {
    spec.validate()?;
    let y = AspectRatio::from_dims(spec.p, spec.t)?;
    let law = SpectralLaw::new(y);
    let mut rows = Vec::with_capacity(spec.k);
    for i in 0..spec.k {
        let var = spec.effective_innovation_var(i);
        let (gamma0, gamma1) = stationary_factor_moments(spec.theta[i], var)?;
        let diverging = spec.delta[i] < 1.0;
        let (t1, lambda, significant) = if diverging {
            (None, None, true)
        } else {
            let r = spike_limit(&FactorParams::new(gamma0, gamma1, spec.sigma2)?, y)?;
            (Some(r.t1), Some(r.lambda), r.significant)
        };
        rows.push(LimitRow {
            factor: i + 1,
            theta: spec.theta[i],
            innovation_var: var,
            gamma0,
            gamma1,
            diverging,
            t1,
            t_b_plus: law.t_b_plus,
            lambda,
            b: law.b,
            significant,
        });
    }
    Ok(LimitsTable {
        y: y.value(),
        a: law.a,
        b: law.b,
        t_b_plus: law.t_b_plus,
        k: spec.k,
        k0: rows.iter().filter(|r| r.significant).count(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Thresholded ratio estimator.
    Khat,
    /// Thresholded ratio estimator requiring two consecutive crossings.
    Kstar,
    /// One-step ratio argmin.
    Ktilde,
    /// Cumulative count after three argmin-and-project steps.
    Ktilde3,
}

impl Method {
    pub fn needs_threshold(self) -> bool {
        matches!(self, Method::Khat | Method::Kstar)
    }

    /// Scan range used by the Monte-Carlo harness.
    pub fn mc_search_cap(self, p: usize, t: usize) -> usize {
        let m = p.min(t);
        match self {
            Method::Khat | Method::Kstar => m.saturating_sub(2).max(1),
            Method::Ktilde | Method::Ktilde3 => (m / 2).max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    /// Fixed threshold; calibrated (and cached) when absent.
    pub d_t: Option<f64>,
    pub search_cap: Option<usize>,
    pub calibration_reps: usize,
    pub quantile_level: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            d_t: None,
            search_cap: None,
            calibration_reps: DEFAULT_CALIBRATION_REPS,
            quantile_level: DEFAULT_QUANTILE_LEVEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub label: String,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCResult {
    pub scenario: ScenarioSpec,
    pub method: Method,
    pub reps: usize,
    pub seed: u64,
    pub k0: usize,
    #[serde(rename = "d_T")]
    pub d_t: Option<f64>,
    pub calibration: Option<CalibrationReport>,
    pub search_cap: usize,
    /// Replications where the threshold was never crossed.
    pub saturated: usize,
    /// `k = k0`, `|k - k0| = 1`, `|k - k0| > 1`.
    pub partition: Vec<Frequency>,
    /// Rows in the layout of the published tables.
    pub table: Vec<Frequency>,
    /// Every observed value of the estimate.
    pub histogram: Vec<Frequency>,
}

impl MCResult {
    /// Frequency of estimate `k`.
    pub fn freq_of(&self, k: usize) -> f64 {
        let label = k.to_string();
        self.histogram
            .iter()
            .find(|f| f.label == label)
            .map_or(0.0, |f| f.frequency)
    }

    pub fn freq_correct(&self) -> f64 {
        self.partition[0].frequency
    }
}

type CalibrationCache = Mutex<HashMap<(usize, usize, usize, u64, u64), CalibrationReport>>;

fn calibration_cache() -> &'static CalibrationCache {
    static CACHE: OnceLock<CalibrationCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// `calibrate_dt` memoized per `(p, T, reps, level, seed)`.
pub fn cached_calibration(
    p: usize,
    t: usize,
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<CalibrationReport> {
    let key = (p, t, reps, level.to_bits(), seed);
    if let Some(hit) = calibration_cache().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let report = calibrate_dt(p, t, reps, level, seed)?;
    calibration_cache()
        .lock()
        .unwrap()
        .insert(key, report.clone());
    Ok(report)
}

/// Seed of the calibration run attached to a Monte-Carlo seed.
pub fn calibration_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

pub fn run_mc(spec: &ScenarioSpec, reps: usize, method: Method, seed: u64) -> Result<MCResult> {
    run_mc_with(spec, reps, method, seed, &McOptions::default())
}

pub fn run_mc_with(
    spec: &ScenarioSpec,
    reps: usize,
    method: Method,
    seed: u64,
    options: &McOptions,
) -> Result<MCResult> {
    spec.validate()?;
    if reps == 0 {
        return Err(Error::domain("reps must be at least 1"));
    }
    let k0 = theoretical_limits(spec)?.k0;
    let search_cap = options
        .search_cap
        .unwrap_or_else(|| method.mc_search_cap(spec.p, spec.t));

    let (d_t, calibration) = match (method.needs_threshold(), options.d_t) {
        (false, _) => (None, None),
        (true, Some(d)) => (Some(d), None),
        (true, None) => {
            let report = cached_calibration(
                spec.p,
                spec.t,
                options.calibration_reps,
                options.quantile_level,
                calibration_seed(seed),
            )?;
            (Some(report.d_t), Some(report))
        }
    };
    let config = match d_t {
        Some(d) => Some(EstimatorConfig::new(
            d,
            search_cap,
            method == Method::Kstar,
        )?),
        None => None,
    };

    let outcomes: Vec<(usize, bool)> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let panel = generate_panel_rep(spec, seed, rep)?;
            match method {
                Method::Khat | Method::Kstar => {
                    let r = k_hat(&mhat_spectrum(&panel)?, config.as_ref().unwrap())?;
                    Ok((r.k, r.saturated))
                }
                Method::Ktilde => Ok((k_tilde(&mhat_spectrum(&panel)?, search_cap)?, false)),
                Method::Ktilde3 => {
                    let trace = k_tilde_multistep(&panel, 3, search_cap)?;
                    Ok((trace.last().unwrap().cumulative_k, false))
                }
            }
        })
        .collect::<Result<_>>()?;

    let n = reps as f64;
    let mut hist = BTreeMap::<usize, usize>::new();
    for (k, _) in &outcomes {
        *hist.entry(*k).or_default() += 1;
    }
    let freq = |label: String, count: usize| Frequency {
        label,
        count,
        frequency: count as f64 / n,
    };
    let count_where = |pred: &dyn Fn(usize) -> bool| -> usize {
        hist.iter().filter(|(k, _)| pred(**k)).map(|(_, c)| c).sum()
    };

    let partition = vec![
        freq("k=k0".into(), count_where(&|k| k == k0)),
        freq("|k-k0|=1".into(), count_where(&|k| k.abs_diff(k0) == 1)),
        freq("|k-k0|>1".into(), count_where(&|k| k.abs_diff(k0) > 1)),
    ];

    let top = spec.k.max(k0).max(1);
    let mut table = Vec::new();
    let first = if k0 >= 2 {
        table.push(freq("<=1".into(), count_where(&|k| k <= 1)));
        2
    } else {
        0
    };
    for j in first..=top {
        let label = if j == k0 {
            format!("={j} (k0)")
        } else {
            format!("={j}")
        };
        table.push(freq(label, count_where(&|k| k == j)));
    }
    table.push(freq(format!(">={}", top + 1), count_where(&|k| k > top)));

    let histogram = hist.iter().map(|(k, c)| freq(k.to_string(), *c)).collect();

    Ok(MCResult {
        scenario: spec.clone(),
        method,
        reps,
        seed,
        k0,
        d_t,
        calibration,
        search_cap,
        saturated: outcomes.iter().filter(|(_, s)| *s).count(),
        partition,
        table,
        histogram,
    })
}

/// Write the table rows of several results side by side as CSV.
pub fn write_mc_csv<W: std::io::Write>(result: &MCResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "label", "count", "frequency"])?;
    for (group, rows) in [
        ("table", &result.table),
        ("partition", &result.partition),
        ("histogram", &result.histogram),
    ] {
        for f in rows {
            w.write_record([
                group.to_string(),
                f.label.clone(),
                f.count.to_string(),
                f.frequency.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<mc csv>", e))?;
    Ok(())
}
