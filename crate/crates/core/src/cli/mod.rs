//! Command-line surface: `simulate`, `bridge`, `precession` and `sweep`.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analytic::{binet_parameters, precession_schwarzschild_leading};
use crate::dynamics::central_force_field_from;
use crate::error::{Error, ErrorCategory, LastState, Result};
use crate::integrate::{integrate_until, PrecessionEstimate, RunReport, StopCondition};
use crate::model::{
    coefficients_for, relativistic_energy, Coefficients, EnergyLevel, Family, PhaseState,
    PhysicalParams,
};
use crate::reparam::{
    check_level, matched_transformed_state, sigma_branch_check, verify_equivalence,
    verify_equivalence_backward, BridgeOptions, Direction, EquivalenceReport,
};
use crate::vector::Vector;

use config::{orbit_time_bound, start_from_invariants, ModelSpec, PrecessionPoint, RunConfig};
use output::{fmt_f64, to_json, write_json, write_plot, write_trajectory_csv};

#[derive(Debug, Parser)]
#[command(
    name = "relkepler",
    version,
    about = "Relativistic Kepler dynamics and the energy-dependent clock change"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub rtol: Option<f64>,
    #[arg(long, global = true)]
    pub atol: Option<f64>,
    /// Reserved; every run is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Treat failed verdicts and failed sweep runs as errors.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write CSV, report and plot data.
    Simulate,
    /// Check the clock change between the relativistic and transformed systems.
    Bridge {
        #[arg(long, value_enum, default_value_t = DirectionArg::Forward)]
        direction: DirectionArg,
        /// Transformed-system start in the region V + h + 2mc² ≤ 0.
        #[arg(long)]
        sigma_branch: bool,
    },
    /// Measured against analytic perihelion advance per family.
    Precession,
    /// Run a grid over (h, L) with one directory per run.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Forward,
    Backward,
}

/// Machine-readable error printed on stderr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorOutput {
    pub error: String,
    pub category: ErrorCategory,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_state: Option<LastState>,
}

impl From<&Error> for ErrorOutput {
    fn from(e: &Error) -> Self {
        ErrorOutput {
            error: e.kind().to_string(),
            category: e.category(),
            exit_code: e.category().exit_code(),
            message: e.to_string(),
            last_state: e.last_state().cloned(),
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

/// Integrates the configured model; files are written even when the run stops early.
pub fn cmd_simulate(config: &RunConfig, out: &Path) -> Result<RunReport> {
    let (field, y0) = config.build()?;
    let (span, stop) = config.span()?;
    let run = integrate_until(&field, &y0, span, &config.integrator, stop)?;
    create_dir(out)?;
    let every = config.output.every;
    write_trajectory_csv(&out.join(&config.output.trajectory), &run.trajectory, every)?;
    for pair in &config.output.plots {
        write_plot(out, &run.trajectory, *pair, every)?;
    }
    write_json(&out.join(&config.output.report), &run.report)?;
    match run.error {
        Some(e) => Err(e),
        None => Ok(run.report),
    }
}

/// Runs one equivalence check and writes `bridge_report.json`.
pub fn cmd_bridge(
    config: &RunConfig,
    out: &Path,
    direction: Direction,
) -> Result<EquivalenceReport> {
    let params = config.params;
    let state = config.initial()?;
    let potential = config.kepler();
    let options = BridgeOptions {
        orbits: config.bridge.orbits,
        span_max: config.bridge.span_max,
        grid: config.bridge.grid,
        tolerances: config.bridge.tolerances,
    };
    let report = match direction {
        Direction::Forward | Direction::Backward => {
            if config.model != ModelSpec::RelativisticKepler {
                return Err(Error::invalid(
                    "model",
                    "bridge needs a relativistic_kepler initial condition",
                ));
            }
            let h = relativistic_energy(&state, &params, potential.as_ref())?;
            let h = match config.bridge.h {
                Some(asserted) => {
                    check_level(EnergyLevel(asserted), h)?;
                    asserted
                }
                None => h,
            };
            let h = EnergyLevel(h);
            if direction == Direction::Forward {
                verify_equivalence(params, potential, h, &state, &options, &config.integrator)?
            } else {
                let z0 = matched_transformed_state(&params, potential.as_ref(), h, &state)?;
                verify_equivalence_backward(
                    params,
                    potential,
                    h,
                    &z0,
                    &options,
                    &config.integrator,
                )?
            }
        }
        Direction::Sigma => {
            let h = match (config.bridge.h, config.model) {
                (Some(h), _) | (None, ModelSpec::TransformedZh { h }) => h,
                (None, ModelSpec::RelativisticKepler) => {
                    relativistic_energy(&state, &params, potential.as_ref())?
                }
                (None, _) => {
                    return Err(Error::invalid(
                        "bridge.h",
                        "the Σ_h branch needs an energy level",
                    ))
                }
            };
            let z0 = PhaseState::with_velocity(0.0, state.x, state.velocity(&params));
            sigma_branch_check(
                params,
                potential,
                EnergyLevel(h),
                &z0,
                config.bridge.sigma_span,
                &options,
                &config.integrator,
            )?
        }
    };
    create_dir(out)?;
    write_json(&out.join("bridge_report.json"), &report)?;
    Ok(report)
}

/// One row of the precession table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecessionRow {
    pub family: String,
    pub h: f64,
    #[serde(rename = "L")]
    pub angular_momentum: f64,
    pub c: f64,
    pub measured: Option<f64>,
    pub analytic: Option<f64>,
    /// `measured / analytic`.
    pub ratio: Option<f64>,
    /// `measured` over that of the special-relativity row with the same `(h, L, c)`.
    pub ratio_to_special_relativity: Option<f64>,
    pub status: String,
}

/// Pericenter start of the osculating orbit with eccentricity `e`.
pub fn pericenter_start(
    coefficients: &Coefficients,
    angular_momentum: f64,
    m: f64,
    e: f64,
) -> Result<(Vector, Vector)> {
    let p = if coefficients.ell == 4 {
        binet_parameters(coefficients, angular_momentum, m)?.p
    } else {
        angular_momentum * angular_momentum / (m * coefficients.alpha_hat)
    };
    let r = p / (1.0 + e);
    Ok((
        Vector::new2(r, 0.0),
        Vector::new2(0.0, angular_momentum / (m * r)),
    ))
}

/// Integrates `orbits` radial periods of a central-force law and averages the perihelion advance.
pub fn measure_precession(
    coefficients: Coefficients,
    params: PhysicalParams,
    angular_momentum: f64,
    e: f64,
    orbits: usize,
    cfg: &crate::integrate::IntegratorConfig,
) -> Result<PrecessionEstimate> {
    let (x, v) = pericenter_start(&coefficients, angular_momentum, params.m, e)?;
    let field = central_force_field_from(coefficients, params, 2)?;
    let y0 = field.flat_state(&x, &v, 0.0)?;
    let t_max = orbit_time_bound(
        coefficients.alpha_hat / params.m,
        x.norm(),
        v.norm(),
        orbits as f64 + 1.0,
    )?;
    let run = integrate_until(
        &field,
        &y0,
        (0.0, t_max),
        cfg,
        StopCondition::Perihelia(orbits + 1),
    )?;
    let (traj, _) = run.into_result()?;
    let perihelia = crate::integrate::detect_perihelion(&traj);
    crate::integrate::precession_estimate(&perihelia)
}

fn precession_row(config: &RunConfig, point: &PrecessionPoint, orbits: usize) -> PrecessionRow {
    let params = PhysicalParams {
        c: point.c.unwrap_or(config.params.c),
        ..config.params
    };
    let l = point.angular_momentum;
    let mut row = PrecessionRow {
        family: point
            .family
            .map_or("central_force".into(), |f| f.as_str().to_string()),
        h: point.h,
        angular_momentum: l,
        c: params.c,
        measured: None,
        analytic: None,
        ratio: None,
        ratio_to_special_relativity: None,
        status: "ok".into(),
    };
    let coefficients = match (point.family, point.coefficients) {
        (Some(f), None) => coefficients_for(f, EnergyLevel(point.h), Some(l), &params),
        (None, Some(c)) => Coefficients::new(c.ell, c.alpha_hat, c.beta_hat),
        _ => Err(Error::invalid(
            "precession.points",
            "give exactly one of family or coefficients",
        )),
    };
    let coefficients = match coefficients.and_then(|c| params.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            row.status = e.kind().to_string();
            return row;
        }
    };
    row.analytic = if coefficients.ell == 4 {
        binet_parameters(&coefficients, l, params.m)
            .ok()
            .map(|b| b.precession())
    } else if point.family == Some(Family::Schwarzschild) {
        Some(precession_schwarzschild_leading(&params, l))
    } else {
        None
    };
    match measure_precession(coefficients, params, l, point.e, orbits, &config.integrator) {
        Ok(est) => {
            row.measured = Some(est.mean);
            row.ratio = row.analytic.filter(|a| *a != 0.0).map(|a| est.mean / a);
        }
        Err(e) => row.status = e.kind().to_string(),
    }
    row
}

/// Measures every configured point and writes `precession.csv`.
pub fn cmd_precession(config: &RunConfig, out: &Path) -> Result<Vec<PrecessionRow>> {
    let spec = config
        .precession
        .as_ref()
        .ok_or_else(|| Error::invalid("precession", "missing section"))?;
    if !(spec.orbits >= 2.0) {
        return Err(Error::invalid(
            "precession.orbits",
            "need at least 2 orbits",
        ));
    }
    let orbits = spec.orbits.round() as usize;
    let mut rows: Vec<PrecessionRow> = spec
        .points
        .iter()
        .map(|p| precession_row(config, p, orbits))
        .collect();
    let reference: Vec<Option<f64>> = rows
        .iter()
        .map(|r| {
            rows.iter()
                .find(|s| {
                    s.family == Family::SpecialRelativity.as_str()
                        && s.h == r.h
                        && s.angular_momentum == r.angular_momentum
                        && s.c == r.c
                })
                .and_then(|s| s.measured)
        })
        .collect();
    for (row, sr) in rows.iter_mut().zip(reference) {
        row.ratio_to_special_relativity = row
            .measured
            .zip(sr)
            .filter(|(_, s)| *s != 0.0)
            .map(|(m, s)| m / s);
    }
    create_dir(out)?;
    let path = out.join("precession.csv");
    let mut w =
        csv::Writer::from_path(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let header = [
        "family",
        "h",
        "L",
        "c",
        "measured",
        "analytic",
        "ratio",
        "ratio_to_special_relativity",
        "status",
    ];
    let mut write = || -> std::result::Result<(), csv::Error> {
        w.write_record(header)?;
        for r in &rows {
            w.write_record([
                r.family.clone(),
                fmt_f64(r.h),
                fmt_f64(r.angular_momentum),
                fmt_f64(r.c),
                opt(r.measured),
                opt(r.analytic),
                opt(r.ratio),
                opt(r.ratio_to_special_relativity),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub index: usize,
    pub h: f64,
    #[serde(rename = "L")]
    pub angular_momentum: f64,
    pub dir: String,
    pub ok: bool,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_drift_rel: Option<f64>,
    #[serde(rename = "L_drift_rel", skip_serializing_if = "Option::is_none")]
    pub angular_momentum_drift_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precession_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub runs: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub max_energy_drift_rel: Option<f64>,
    #[serde(rename = "max_L_drift_rel")]
    pub max_angular_momentum_drift_rel: Option<f64>,
    pub records: Vec<SweepRecord>,
}

/// Worker count: `RELKEPLER_THREADS` when set, else the available parallelism.
pub fn thread_count(jobs: usize) -> usize {
    let cap = std::env::var("RELKEPLER_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.min(jobs).max(1)
}

fn sweep_one(config: &RunConfig, out: &Path, index: usize, h: f64, l: f64, r0: f64) -> SweepRecord {
    let dir_name = format!("run_{index:03}");
    let dir = out.join(&dir_name);
    let mut record = SweepRecord {
        index,
        h,
        angular_momentum: l,
        dir: dir_name,
        ok: false,
        exit_code: 0,
        error: None,
        energy_drift_rel: None,
        angular_momentum_drift_rel: None,
        precession_mean: None,
    };
    let result = start_from_invariants(config, h, l, r0).and_then(|initial| {
        let point = RunConfig {
            model: config.model.with_level(h),
            initial: Some(initial),
            sweep: None,
            ..config.clone()
        };
        create_dir(&dir)?;
        write_json(&dir.join("config.json"), &point)?;
        cmd_simulate(&point, &dir)
    });
    match result {
        Ok(report) => {
            record.ok = true;
            record.energy_drift_rel = Some(report.energy_drift_rel);
            record.angular_momentum_drift_rel = Some(report.angular_momentum_drift_rel);
            record.precession_mean = report.precession_estimate.map(|p| p.mean);
        }
        Err(e) => {
            record.exit_code = e.category().exit_code();
            record.error = Some(ErrorOutput::from(&e));
        }
    }
    record
}

/// Runs the `(h, L)` grid concurrently and writes `summary.json`.
pub fn cmd_sweep(config: &RunConfig, out: &Path) -> Result<SweepSummary> {
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::invalid("sweep", "missing section"))?;
    let points: Vec<(f64, f64)> = spec
        .h
        .iter()
        .flat_map(|h| spec.angular_momentum.iter().map(move |l| (*h, *l)))
        .collect();
    create_dir(out)?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<SweepRecord>>> = Mutex::new(vec![None; points.len()]);
    std::thread::scope(|scope| {
        for _ in 0..thread_count(points.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(h, l)) = points.get(i) else { break };
                let record = sweep_one(config, out, i, h, l, spec.r0);
                slots.lock().unwrap()[i] = Some(record);
            });
        }
    });
    let records: Vec<SweepRecord> = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(Option::unwrap)
        .collect();
    let max = |f: fn(&SweepRecord) -> Option<f64>| records.iter().filter_map(f).reduce(f64::max);
    let summary = SweepSummary {
        runs: records.len(),
        succeeded: records.iter().filter(|r| r.ok).count(),
        failed: records.iter().filter(|r| !r.ok).count(),
        max_energy_drift_rel: max(|r| r.energy_drift_rel),
        max_angular_momentum_drift_rel: max(|r| r.angular_momentum_drift_rel),
        records,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn fail(e: &Error) -> i32 {
    eprintln!(
        "{}",
        serde_json::to_string(&ErrorOutput::from(e)).expect("error output serializes")
    );
    e.category().exit_code()
}

/// Executes a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let Some(path) = cli.config.as_deref() else {
        return fail(&Error::Config("--config is required".into()));
    };
    let mut config = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(rtol) = cli.rtol {
        config.integrator.rtol = rtol;
    }
    if let Some(atol) = cli.atol {
        config.integrator.atol = atol;
    }
    if let Err(e) = config.integrator.validate() {
        return fail(&e);
    }
    let out = cli.out.as_path();
    match cli.command {
        Command::Simulate => match cmd_simulate(&config, out) {
            Ok(report) => {
                println!("{}", to_json(&report));
                0
            }
            Err(e) => fail(&e),
        },
        Command::Bridge {
            direction,
            sigma_branch,
        } => {
            let direction = match (sigma_branch, direction) {
                (true, _) => Direction::Sigma,
                (false, DirectionArg::Forward) => Direction::Forward,
                (false, DirectionArg::Backward) => Direction::Backward,
            };
            match cmd_bridge(&config, out, direction) {
                Ok(report) => {
                    println!("{}", to_json(&report));
                    if cli.strict && !report.pass {
                        eprintln!("verdict: fail ({})", report.failures.join("; "));
                        return ErrorCategory::Integration.exit_code();
                    }
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Command::Precession => match cmd_precession(&config, out) {
            Ok(rows) => {
                println!("{}", to_json(&rows));
                0
            }
            Err(e) => fail(&e),
        },
        Command::Sweep => match cmd_sweep(&config, out) {
            Ok(summary) => {
                println!("{}", to_json(&summary));
                let first_failure = summary.records.iter().find(|r| !r.ok).map(|r| r.exit_code);
                match first_failure {
                    Some(code) if cli.strict || summary.succeeded == 0 => code,
                    _ => 0,
                }
            }
            Err(e) => fail(&e),
        },
    }
}
