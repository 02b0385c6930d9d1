//! End-to-end acceptance run. Prints one pass/fail line per criterion and
//! exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use faer::Mat;
use lagfactor_core::estimator::DEFAULT_CALIBRATION_REPS;
use lagfactor_core::rng::{gaussian_matrix, stream_rng};
use lagfactor_core::simulation::{
    cached_calibration, calibration_seed, generate_panel_rep, run_mc,
};
use lagfactor_core::{
    calibrate_dt, is_significant_region, k_hat, k_tilde, k_tilde_multistep, lsd_edges,
    mhat_spectrum, scenario_preset, spike_limit, stationary_factor_moments, stieltjes_m,
    t_at_b_plus, t_transform, z_of_t, AspectRatio, EstimatorConfig, FactorParams, Method, Panel,
    Scenario, ScenarioSpec,
};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

const SEED: u64 = 7;

const EDGE_DECIMALS: f64 = 5e-5;
const T_B_PLUS_TOL: f64 = 1e-3;
const EDGE_RESIDUAL_TOL: f64 = 1e-8;
const LIMIT_REL_TOL: f64 = 0.01;
const LIMITS_MAX_TIME: Duration = Duration::from_secs(1);
const REGION_POINTS: usize = 10_000;
const DT_TARGET: f64 = 0.1713;
const DT_TOL: f64 = 0.02;
const CALIBRATION_MAX_TIME: Duration = Duration::from_secs(300);
const TABLE1_KSTAR_MIN: f64 = 0.94;
const TABLE1_KTILDE_TARGET: f64 = 0.343;
const TABLE1_KTILDE_TOL: f64 = 0.05;
const TABLE1_MAX_TIME: Duration = Duration::from_secs(600);
const TABLE3_KSTAR_MIN: f64 = 0.93;
const TABLE5_KSTAR_MIN: f64 = 0.91;
const TABLES35_MAX_TIME: Duration = Duration::from_secs(1800);
const EDGE_BAND: (f64, f64) = (0.9, 1.15);
const THETA1_MIN: f64 = 0.85;
const NOISE_RUNS_MIN: f64 = 0.95;
const ROTATION_REL_TOL: f64 = 1e-8;
const RATIO_SCALE_TOL: f64 = 1e-12;
const TRANSFORM_TOL: f64 = 1e-8;
const MULTISTEP_MIN: f64 = 0.90;

/// (theta, Gamma, y, T1, lambda) for rows (1)-(7) of the limit tables.
const LIMIT_ROWS: &[(f64, f64, f64, f64, f64)] = &[
    (0.6, 4.0, 0.5, 0.0125, 21.2),
    (-0.5, 4.0, 0.5, 0.021, 13.1),
    (0.3, 4.0, 0.5, 0.047, 6.65),
    (0.2, 1.0, 0.5, 0.3446, 2.7725),
    (0.6, 2.0, 0.5, 0.0391, 7.65),
    (-0.5, 2.0, 0.5, 0.0607, 5.48),
    (0.3, 2.0, 0.5, 0.1183, 3.61),
    (0.6, 4.0, 2.0, 0.1102, 44.8),
    (-0.5, 4.0, 2.0, 0.1596, 33.85),
    (0.3, 4.0, 2.0, 0.2767, 23.92),
    (0.2, 1.0, 2.0, 1.5296, 17.6366),
    (0.6, 2.0, 2.0, 0.2845, 23.79),
    (-0.5, 2.0, 2.0, 0.3852, 20.45),
    (0.3, 2.0, 2.0, 0.6116, 17.95),
];

fn ar(y: f64) -> AspectRatio {
    AspectRatio::new(y).unwrap()
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn log_grid(n: usize, lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
}

fn criterion_1() -> (bool, String) {
    let b_half = lsd_edges(ar(0.5)).1;
    let b_two = lsd_edges(ar(2.0)).1;
    let pass = (b_half - 2.7725).abs() < EDGE_DECIMALS && (b_two - 17.6366).abs() < EDGE_DECIMALS;
    (pass, format!("b(0.5) = {b_half:.6}, b(2) = {b_two:.6}"))
}

fn criterion_2() -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (y, want) in [(0.5, 0.3076), (2.0, 0.7775)] {
        let t = t_at_b_plus(ar(y));
        let resid = (z_of_t(t, ar(y)).unwrap() - lsd_edges(ar(y)).1).abs();
        pass &= (t - want).abs() < T_B_PLUS_TOL && resid < EDGE_RESIDUAL_TOL;
        parts.push(format!(
            "T(b+; {y}) = {t:.6} (table {want}, |z(T)-b| = {resid:.1e})"
        ));
    }
    (pass, parts.join(", "))
}

fn criterion_3() -> (bool, String) {
    let start = Instant::now();
    let mut misses = Vec::new();
    let mut checked = 0;
    for (i, &(theta, gamma, y, t1, lam)) in LIMIT_ROWS.iter().enumerate() {
        let (g0, g1) = stationary_factor_moments(theta, gamma).unwrap();
        let r = spike_limit(&FactorParams::new(g0, g1, 1.0).unwrap(), ar(y)).unwrap();
        let row = i % 7 + 1;
        checked += 2;
        if rel(r.t1, t1) >= LIMIT_REL_TOL {
            misses.push(format!("row {row} y={y} T1 {:.4} vs {t1}", r.t1));
        }
        if rel(r.lambda, lam) >= LIMIT_REL_TOL {
            misses.push(format!("row {row} y={y} lambda {:.4} vs {lam}", r.lambda));
        }
        if !r.significant && r.lambda != r.b {
            misses.push(format!("row {row} y={y} insignificant but lambda != b"));
        }
    }
    let elapsed = start.elapsed();
    let pass = misses.is_empty() && elapsed < LIMITS_MAX_TIME;
    let detail = if misses.is_empty() {
        "none".to_string()
    } else {
        misses.join("; ")
    };
    (
        pass,
        format!(
            "{} of {checked} entries within 1%, misses: {detail}, {elapsed:.2?}",
            checked - misses.len()
        ),
    )
}

fn criterion_4() -> (bool, String) {
    let mut total = 0;
    for (idx, y) in [0.25, 0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
        let mut rng = stream_rng(SEED, idx as u64);
        for _ in 0..REGION_POINTS {
            let g0: f64 = rng.random_range(1e-3..5.0);
            let g1 = g0 * rng.random_range(-1.0..=1.0);
            let p = FactorParams::new(g0, g1, 1.0).unwrap();
            if spike_limit(&p, ar(y)).unwrap().significant
                != is_significant_region(&p, ar(y)).unwrap()
            {
                total += 1;
            }
        }
    }
    (
        total == 0,
        format!("{total} disagreements over 5 x {REGION_POINTS} points"),
    )
}

fn criterion_5() -> (bool, String) {
    let start = Instant::now();
    let r = calibrate_dt(100, 1689, DEFAULT_CALIBRATION_REPS, 0.005, SEED).unwrap();
    let elapsed = start.elapsed();
    let pass = (r.d_t - DT_TARGET).abs() < DT_TOL && elapsed < CALIBRATION_MAX_TIME;
    (
        pass,
        format!("d_T = {:.4} (q = {:.3}), {elapsed:.1?}", r.d_t, r.q),
    )
}

fn criterion_6() -> (bool, String) {
    let start = Instant::now();
    let spec = scenario_preset(Scenario::I, 100, 200);
    let kstar = run_mc(&spec, 1000, Method::Kstar, SEED).unwrap().freq_of(2);
    let ktilde = run_mc(&spec, 1000, Method::Ktilde, SEED)
        .unwrap()
        .freq_of(1);
    let elapsed = start.elapsed();
    let pass = kstar >= TABLE1_KSTAR_MIN
        && (ktilde - TABLE1_KTILDE_TARGET).abs() <= TABLE1_KTILDE_TOL
        && elapsed < TABLE1_MAX_TIME;
    (
        pass,
        format!("freq(k* = 2) = {kstar:.3}, freq(k~ = 1) = {ktilde:.3}, {elapsed:.1?}"),
    )
}

fn criterion_7() -> (bool, String) {
    let start = Instant::now();
    let two = run_mc(
        &scenario_preset(Scenario::II, 300, 600),
        1000,
        Method::Kstar,
        SEED,
    )
    .unwrap()
    .freq_of(3);
    let three = run_mc(
        &scenario_preset(Scenario::III, 300, 600),
        1000,
        Method::Kstar,
        SEED,
    )
    .unwrap()
    .freq_of(3);
    let elapsed = start.elapsed();
    let pass = two >= TABLE3_KSTAR_MIN && three >= TABLE5_KSTAR_MIN && elapsed < TABLES35_MAX_TIME;
    (pass, format!("scenario II freq(k* = 3) = {two:.3}, scenario III freq(k* = 3) = {three:.3}, {elapsed:.1?}"))
}

fn criterion_8() -> (bool, String) {
    let (p, t, runs) = (400, 800, 200u64);
    let sigma2: f64 = 1.0;
    let spec = ScenarioSpec::pure_noise(p, t, sigma2);
    let b = lsd_edges(AspectRatio::from_dims(p, t).unwrap()).1;
    let hits: Vec<(bool, bool)> = (0..runs)
        .into_par_iter()
        .map(|rep| {
            let s = mhat_spectrum(&generate_panel_rep(&spec, SEED, rep).unwrap()).unwrap();
            let l1 = s.eigenvalues[0] / sigma2.powi(2);
            (
                (EDGE_BAND.0 * b..=EDGE_BAND.1 * b).contains(&l1),
                s.ratios[0] >= THETA1_MIN,
            )
        })
        .collect();
    let edge = hits.iter().filter(|h| h.0).count() as f64 / runs as f64;
    let ratio = hits.iter().filter(|h| h.1).count() as f64 / runs as f64;
    let pass = edge >= NOISE_RUNS_MIN && ratio >= NOISE_RUNS_MIN;
    (
        pass,
        format!("l1 in [0.9b, 1.15b] in {edge:.3}, theta1 >= 0.85 in {ratio:.3} of {runs} runs"),
    )
}

fn estimates(panel: &Panel) -> (usize, usize, usize, usize) {
    let s = mhat_spectrum(panel).unwrap();
    let cap = s.len() / 2;
    let plain = k_hat(&s, &EstimatorConfig::new(0.2, cap, false).unwrap())
        .unwrap()
        .k;
    let two = k_hat(&s, &EstimatorConfig::new(0.2, cap, true).unwrap())
        .unwrap()
        .k;
    let tilde = k_tilde(&s, cap).unwrap();
    let multi = k_tilde_multistep(panel, 3, cap)
        .unwrap()
        .last()
        .unwrap()
        .cumulative_k;
    (plain, two, tilde, multi)
}

fn criterion_9() -> (bool, String) {
    let spec = scenario_preset(Scenario::II, 100, 200);
    let panel = generate_panel_rep(&spec, SEED, 0).unwrap();
    let base = mhat_spectrum(&panel).unwrap();
    let base_est = estimates(&panel);
    let mut worst_ratio: f64 = 0.0;
    let mut same = true;
    for c in [1e-3, 0.37, 2.0, 55.0, 1e3] {
        let scaled = panel.scaled(c);
        let s = mhat_spectrum(&scaled).unwrap();
        for (a, b) in base.ratios.iter().zip(&s.ratios) {
            worst_ratio = worst_ratio.max((a - b).abs());
        }
        same &= estimates(&scaled) == base_est;
    }
    let q: Mat<f64> = gaussian_matrix(100, 100, 1.0, &mut stream_rng(SEED, 1))
        .qr()
        .compute_Q();
    let rotated = Panel::new(&q * panel.data()).unwrap();
    let rot = mhat_spectrum(&rotated).unwrap();
    let worst_rot = base
        .eigenvalues
        .iter()
        .zip(&rot.eigenvalues)
        .map(|(a, b)| (a - b).abs() / a.abs())
        .fold(0.0, f64::max);
    same &= estimates(&rotated) == base_est;
    let pass = worst_ratio <= RATIO_SCALE_TOL && same && worst_rot <= ROTATION_REL_TOL;
    (
        pass,
        format!(
            "max ratio change under scaling {worst_ratio:.1e}, estimates unchanged: {same}, \
             max relative eigenvalue change under rotation {worst_rot:.1e}"
        ),
    )
}

fn criterion_10() -> (bool, String) {
    let mut worst_trip: f64 = 0.0;
    let mut worst_m: f64 = 0.0;
    for y in log_grid(20, 0.05, 10.0) {
        let b = lsd_edges(ar(y)).1;
        for z in log_grid(100, 1.001 * b, 100.0 * b) {
            let t = t_transform(z, ar(y)).unwrap();
            worst_trip = worst_trip.max((z_of_t(t, ar(y)).unwrap() - z).abs() / z);
            let m = stieltjes_m(Complex64::new(z, 0.0), ar(y)).unwrap();
            worst_m = worst_m.max((-1.0 - z * m.re - t).abs());
        }
    }
    let pass = worst_trip <= TRANSFORM_TOL && worst_m <= TRANSFORM_TOL;
    (
        pass,
        format!("max relative round-trip error {worst_trip:.1e}, max |t + 1 + z m| {worst_m:.1e}"),
    )
}

fn criterion_11() -> (bool, String) {
    let (p, t, runs) = (500, 1000, 200u64);
    let spec = scenario_preset(Scenario::IV, p, t);
    let report = cached_calibration(
        p,
        t,
        DEFAULT_CALIBRATION_REPS,
        0.005,
        calibration_seed(SEED),
    )
    .unwrap();
    let kstar_cfg =
        EstimatorConfig::new(report.d_t, Method::Kstar.mc_search_cap(p, t), true).unwrap();
    let tilde_cap = Method::Ktilde.mc_search_cap(p, t);
    let outcomes: Vec<(usize, usize, usize)> = (0..runs)
        .into_par_iter()
        .map(|rep| {
            let panel = generate_panel_rep(&spec, SEED, rep).unwrap();
            let s = mhat_spectrum(&panel).unwrap();
            let one = k_tilde(&s, tilde_cap).unwrap();
            let three = k_tilde_multistep(&panel, 3, tilde_cap)
                .unwrap()
                .last()
                .unwrap()
                .cumulative_k;
            let star = k_hat(&s, &kstar_cfg).unwrap().k;
            (one, three, star)
        })
        .collect();
    let frac = |f: &dyn Fn(&(usize, usize, usize)) -> bool| {
        outcomes.iter().filter(|o| f(o)).count() as f64 / runs as f64
    };
    let one = frac(&|o| o.0 == 1);
    let three = frac(&|o| o.1 == 3);
    let star = frac(&|o| o.2 == 7);
    let pass = one >= MULTISTEP_MIN && three >= MULTISTEP_MIN && star >= MULTISTEP_MIN;
    (
        pass,
        format!(
            "freq(k~ = 1) = {one:.3}, freq(three-step = 3) = {three:.3}, freq(k* = 7) = {star:.3}"
        ),
    )
}

type Criterion = (&'static str, fn() -> (bool, String));

fn main() {
    let criteria: [Criterion; 11] = [
        ("noise edges b", criterion_1),
        ("T(b+) values", criterion_2),
        ("theoretical limit tables", criterion_3),
        ("region test equals direct test", criterion_4),
        ("d_T calibration", criterion_5),
        ("Monte-Carlo scenario I", criterion_6),
        ("Monte-Carlo scenarios II and III", criterion_7),
        ("pure-noise edge and first ratio", criterion_8),
        ("scaling and rotation invariance", criterion_9),
        ("transform consistency", criterion_10),
        ("multistep on scenario IV", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = check();
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
