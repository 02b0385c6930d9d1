//! `lagfactor` command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{
    calibrate_dt, k_hat, k_tilde, k_tilde_multistep, mhat_spectrum, CalibrationReport,
    EstimatorConfig, MultistepStep, DEFAULT_CALIBRATION_REPS, DEFAULT_QUANTILE_LEVEL,
};
use crate::panel::Panel;
use crate::simulation::{
    calibration_seed, run_mc_with, scenario_preset, theoretical_limits, write_mc_csv, LimitsTable,
    Loadings, MCResult, McOptions, Method, Scenario,
};
use crate::spectral::{AspectRatio, SpectralLaw};
use crate::transition::{
    detectability_boundary, is_significant_region, region_bounds, spike_limit, write_boundary_csv,
    FactorParams, RegionBounds, TransitionResult,
};

pub const THREADS_ENV: &str = "LAGFACTOR_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "lagfactor",
    version,
    about = "Factor-number estimation from lag-1 autocovariance spectra"
)]
struct Cli {
    /// Worker threads for replications (default: $LAGFACTOR_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
enum Command {
    /// Estimate the number of factors of a CSV panel.
    Estimate(EstimateArgs),
    /// Calibrate the threshold d_T by pure-noise simulation.
    Calibrate(CalibrateArgs),
    /// Phase-transition diagnostics for one factor.
    Transition(TransitionArgs),
    /// Boundary curves of the detectability region as CSV.
    Region(RegionArgs),
    /// Spectral edges, and optionally the limits of a preset scenario.
    Limits(LimitsArgs),
    /// Monte-Carlo experiment on a preset scenario.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum EstimateMethod {
    Khat,
    Kstar,
    Ktilde,
    Multistep,
}

#[derive(Debug, Args, Serialize)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Rows of the CSV are series rather than time points.
    #[arg(long)]
    transpose: bool,
    #[arg(long = "d-t", conflicts_with = "calibrate")]
    d_t: Option<f64>,
    /// Calibrate d_T for the panel's (p, T); the default when --d-t is absent.
    #[arg(long)]
    calibrate: bool,
    #[arg(long, value_enum, default_value = "kstar")]
    method: EstimateMethod,
    #[arg(long, overrides_with = "no_demean")]
    demean: bool,
    #[arg(long = "no-demean")]
    no_demean: bool,
    /// Largest index scanned (default min(p, T) - 1).
    #[arg(long)]
    cap: Option<usize>,
    /// Steps of the multistep method.
    #[arg(long, default_value_t = 3)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_REPS)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_QUANTILE_LEVEL)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct CalibrateArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    t: usize,
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_REPS)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_QUANTILE_LEVEL)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct TransitionArgs {
    #[arg(long, allow_hyphen_values = true)]
    gamma0: f64,
    #[arg(long, allow_hyphen_values = true)]
    gamma1: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct RegionArgs {
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    #[arg(long, default_value_t = 200)]
    n_points: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct LimitsArgs {
    /// Aspect ratio; taken from --p/--t when omitted.
    #[arg(long, required_unless_present = "scenario", allow_hyphen_values = true)]
    y: Option<f64>,
    #[arg(long, value_enum, requires_all = ["p", "t"])]
    scenario: Option<Scenario>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scenario: Scenario,
    #[arg(long)]
    p: usize,
    /// T = t_mult * p.
    #[arg(long, default_value_t = 2.0)]
    t_mult: f64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, value_enum, default_value = "kstar")]
    method: Method,
    #[arg(long, value_enum, default_value = "canonical")]
    loadings: Loadings,
    /// Fixed threshold instead of calibration.
    #[arg(long = "d-t")]
    d_t: Option<f64>,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_REPS)]
    calibration_reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `.csv` writes the frequency tables; anything else writes JSON.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub argv: Vec<String>,
    pub threads: Option<usize>,
    pub log_level: String,
    pub command: serde_json::Value,
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    p: usize,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "d_T")]
    d_t: Option<f64>,
    method: EstimateMethod,
    k: usize,
    eigenvalues: Vec<f64>,
    ratios: Vec<f64>,
    saturated: bool,
    search_cap: usize,
    demeaned: bool,
    calibration: Option<CalibrationReport>,
    multistep_trace: Option<Vec<MultistepStep>>,
    run_config: RunConfig,
}

#[derive(Debug, Serialize)]
struct LimitsReport {
    y: f64,
    a: f64,
    b: f64,
    t_b_plus: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<LimitsTable>,
    run_config: RunConfig,
}

#[derive(Debug, Serialize)]
struct TransitionReport {
    params: FactorParams,
    y: f64,
    transition: TransitionResult,
    lambda_raw: f64,
    region: RegionBounds,
    significant_region: bool,
    run_config: RunConfig,
}

#[derive(Debug, Serialize)]
struct WithConfig<T: Serialize> {
    #[serde(flatten)]
    report: T,
    run_config: RunConfig,
}

/// Parse `argv` (including the program name), run, and return the exit code:
/// 0 on success, 1 on runtime or domain errors, 2 on usage errors.
pub fn parse_and_dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .try_init();
    configure_threads(cli.threads);

    let config = RunConfig {
        argv: argv.clone(),
        threads: cli.threads,
        log_level: cli.log_level.to_string(),
        command: serde_json::to_value(&cli.command).unwrap_or(serde_json::Value::Null),
    };
    match dispatch(&cli.command, config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn configure_threads(flag: Option<usize>) {
    let n = flag.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    if let Some(n) = n {
        // the global pool can only be set once per process
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            log::debug!("thread pool already initialized; ignoring --threads {n}");
        }
    }
}

fn dispatch(command: &Command, config: RunConfig) -> Result<()> {
    match command {
        Command::Estimate(a) => estimate(a, config),
        Command::Calibrate(a) => {
            check_output(a.output.as_deref())?;
            let report = calibrate_dt(a.p, a.t, a.reps, a.level, a.seed)?;
            write_json(
                &WithConfig {
                    report,
                    run_config: config,
                },
                a.output.as_deref(),
            )
        }
        Command::Transition(a) => {
            check_output(a.output.as_deref())?;
            let y = AspectRatio::new(a.y)?;
            let params = FactorParams::new(a.gamma0, a.gamma1, a.sigma2)?;
            let transition = spike_limit(&params, y)?;
            let report = TransitionReport {
                params,
                y: a.y,
                lambda_raw: transition.lambda_raw(params.sigma2),
                transition,
                region: region_bounds(y),
                significant_region: is_significant_region(&params, y)?,
                run_config: config,
            };
            write_json(&report, a.output.as_deref())
        }
        Command::Region(a) => {
            check_output(a.output.as_deref())?;
            let points = detectability_boundary(AspectRatio::new(a.y)?, a.n_points)?;
            with_writer(a.output.as_deref(), |w| write_boundary_csv(&points, w))
        }
        Command::Limits(a) => {
            check_output(a.output.as_deref())?;
            let scenario = match (a.scenario, a.p, a.t) {
                (Some(s), Some(p), Some(t)) => Some(theoretical_limits(&scenario_preset(s, p, t))?),
                _ => None,
            };
            let y = match (a.y, &scenario) {
                (Some(y), _) => y,
                (None, Some(table)) => table.y,
                (None, None) => return Err(Error::domain("--y or --scenario is required")),
            };
            let law = SpectralLaw::new(AspectRatio::new(y)?);
            let report = LimitsReport {
                y,
                a: law.a,
                b: law.b,
                t_b_plus: law.t_b_plus,
                scenario,
                run_config: config,
            };
            write_json(&report, a.output.as_deref())
        }
        Command::Simulate(a) => simulate(a, config),
    }
}

fn estimate(a: &EstimateArgs, config: RunConfig) -> Result<()> {
    if !a.input.is_file() {
        return Err(Error::io(
            &a.input,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        ));
    }
    check_output(a.output.as_deref())?;
    let demean = !a.no_demean || a.demean;
    let mut panel = Panel::read_csv_path(&a.input, a.transpose)?;
    if demean {
        panel = panel.demeaned();
    }
    let (p, t) = (panel.p(), panel.t());
    let spectrum = mhat_spectrum(&panel)?;
    let cap = a.cap.unwrap_or_else(|| EstimatorConfig::default_cap(p, t));

    let mut calibration = None;
    let mut d_t = None;
    let mut trace = None;
    let (k, saturated) = match a.method {
        EstimateMethod::Khat | EstimateMethod::Kstar => {
            let d = match a.d_t {
                Some(d) => d,
                None => {
                    let report = calibrate_dt(p, t, a.reps, a.level, calibration_seed(a.seed))?;
                    let d = report.d_t;
                    calibration = Some(report);
                    d
                }
            };
            d_t = Some(d);
            let cfg = EstimatorConfig::new(d, cap, a.method == EstimateMethod::Kstar)?;
            let r = k_hat(&spectrum, &cfg)?;
            if r.saturated {
                log::warn!("no ratio exceeded 1 - d_T within the first {cap}; reporting the cap");
            }
            (r.k, r.saturated)
        }
        EstimateMethod::Ktilde => (k_tilde(&spectrum, cap)?, false),
        EstimateMethod::Multistep => {
            let steps = k_tilde_multistep(&panel, a.steps, cap)?;
            let k = steps.last().map_or(0, |s| s.cumulative_k);
            trace = Some(steps);
            (k, false)
        }
    };
    let report = EstimateReport {
        p,
        t,
        d_t,
        method: a.method,
        k,
        eigenvalues: spectrum.eigenvalues.iter().take(30).copied().collect(),
        ratios: spectrum.ratios.iter().take(30).copied().collect(),
        saturated,
        search_cap: cap,
        demeaned: demean,
        calibration,
        multistep_trace: trace,
        run_config: config,
    };
    write_json(&report, a.output.as_deref())
}

fn simulate(a: &SimulateArgs, config: RunConfig) -> Result<()> {
    check_output(a.output.as_deref())?;
    if !(a.t_mult > 0.0) {
        return Err(Error::domain(format!(
            "--t-mult must be positive, got {}",
            a.t_mult
        )));
    }
    let t = (a.t_mult * a.p as f64).round() as usize;
    let mut spec = scenario_preset(a.scenario, a.p, t);
    spec.loadings = a.loadings;
    let options = McOptions {
        d_t: a.d_t,
        search_cap: a.cap,
        calibration_reps: a.calibration_reps,
        ..Default::default()
    };
    let result: MCResult = run_mc_with(&spec, a.reps, a.method, a.seed, &options)?;
    let is_csv = a
        .output
        .as_deref()
        .and_then(Path::extension)
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        with_writer(a.output.as_deref(), |w| write_mc_csv(&result, w))
    } else {
        write_json(
            &WithConfig {
                report: result,
                run_config: config,
            },
            a.output.as_deref(),
        )
    }
}

/// Fail before any computation if the output cannot be created.
fn check_output(path: Option<&Path>) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(Error::io(
            path,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "output directory does not exist",
            ),
        ));
    }
    if path.is_dir() {
        return Err(Error::io(
            path,
            std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                "output path is a directory",
            ),
        ));
    }
    Ok(())
}

fn with_writer(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = std::io::BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| Error::io(path, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush().map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    with_writer(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w).map_err(|e| Error::io("<output>", e))
    })
}
