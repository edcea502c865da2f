//! Fixed-step RK4 and adaptive Dormand–Prince 5(4) integration, trajectories,
//! perihelion events and drift reports.

pub mod dense;
mod events;

use serde::{Deserialize, Serialize};

use crate::dynamics::{FlowField, SampleDiagnostics, VectorField};
use crate::error::{Error, LastState, Result};
use crate::model::{EnergyLevel, PhaseState};
use crate::vector::Vector;

pub use events::{
    detect_perihelion, precession_estimate, Perihelion, PerihelionTracker, PrecessionEstimate,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "rk4", alias = "RK4Fixed")]
    Rk4Fixed,
    #[serde(rename = "dp45", alias = "DP45Adaptive")]
    Dp45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Step of the fixed-step method.
    pub dt: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Origin guard.
    pub r_min: f64,
    /// Optional cap on the adaptive step.
    pub max_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Dp45Adaptive,
            dt: 1e-3,
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 10_000_000,
            r_min: crate::model::DEFAULT_R_MIN,
            max_step: None,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(dt: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4Fixed,
            dt,
            ..Default::default()
        }
    }

    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        IntegratorConfig {
            rtol,
            atol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("integrator.dt", "must be positive"));
        }
        if !(self.rtol > 0.0 && self.rtol <= 1e-3) {
            return Err(Error::invalid(
                "integrator.rtol",
                format!("must lie in (0, 1e-3], got {}", self.rtol),
            ));
        }
        if !(self.atol > 0.0 && self.atol.is_finite()) {
            return Err(Error::invalid("integrator.atol", "must be positive"));
        }
        if self.max_steps < 1 {
            return Err(Error::invalid("integrator.max_steps", "must be at least 1"));
        }
        if !(self.r_min > 0.0 && self.r_min.is_finite()) {
            return Err(Error::invalid("integrator.r_min", "must be positive"));
        }
        if let Some(m) = self.max_step {
            if !(m > 0.0) {
                return Err(Error::invalid("integrator.max_step", "must be positive"));
            }
        }
        Ok(())
    }
}

/// One accepted point: time, state and the field evaluated there.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

/// Classical 4-stage Runge–Kutta step.
pub fn rk4_step<F: VectorField + ?Sized>(
    field: &F,
    t: f64,
    y: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let mut k1 = vec![0.0; y.len()];
    field.eval(t, y, &mut k1)?;
    rk4_step_with(field, t, y, &k1, dt)
}

fn rk4_step_with<F: VectorField + ?Sized>(
    field: &F,
    t: f64,
    y: &[f64],
    k1: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let n = y.len();
    let mut tmp = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    field.eval(t + 0.5 * dt, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    field.eval(t + 0.5 * dt, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    field.eval(t + dt, &tmp, &mut k4)?;
    Ok((0..n)
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the 5th and the embedded 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const UNDERFLOW: f64 = 1e-14;
const DOMAIN_RETRIES: usize = 12;

/// Low-level solver output before physics diagnostics are attached.
#[derive(Debug, Clone, Default)]
pub struct RawSolution {
    pub samples: Vec<Sample>,
    pub steps_taken: usize,
    pub steps_rejected: usize,
}

/// Lets the caller stop after an accepted step; may also replace the last sample.
pub trait StepObserver {
    /// Called with all samples so far (the newest last). Returning `true` stops the run.
    fn accepted(&mut self, samples: &mut Vec<Sample>) -> bool;
}

impl StepObserver for () {
    fn accepted(&mut self, _samples: &mut Vec<Sample>) -> bool {
        false
    }
}

fn outside_domain<F: VectorField + ?Sized>(field: &F, y: &[f64], r_min: f64) -> bool {
    field.radius(y).is_some_and(|r| !(r >= r_min))
}

fn eval_checked<F: VectorField + ?Sized>(
    field: &F,
    t: f64,
    y: &[f64],
    dy: &mut [f64],
    r_min: f64,
) -> Result<()> {
    if outside_domain(field, y, r_min) {
        return Err(Error::Domain {
            radius: field.radius(y).unwrap_or(0.0),
            r_min,
        });
    }
    field.eval(t, y, dy)?;
    if dy.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain {
            radius: field.radius(y).unwrap_or(f64::NAN),
            r_min,
        })
    }
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], rtol: f64, atol: f64) -> f64 {
    let sum: f64 = (0..y.len())
        .map(|i| {
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / y.len() as f64).sqrt()
}

fn last_state(samples: &[Sample]) -> LastState {
    let s = samples
        .last()
        .expect("solver always stores the initial sample");
    LastState {
        t: s.t,
        y: s.y.clone(),
    }
}

/// Integrates `field` from `(t0, y0)` towards `t1`.
///
/// On a runtime failure the samples gathered so far are returned together with the error.
pub fn solve<F: VectorField + ?Sized, O: StepObserver>(
    field: &F,
    y0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    observer: &mut O,
) -> (RawSolution, Option<Error>) {
    let mut sol = RawSolution::default();
    let (t0, t1) = t_span;
    let mut dy0 = vec![0.0; y0.len()];
    if let Err(e) = eval_checked(field, t0, y0, &mut dy0, cfg.r_min) {
        return (sol, Some(e));
    }
    sol.samples.push(Sample {
        t: t0,
        y: y0.to_vec(),
        dy: dy0,
    });
    let err = match cfg.method {
        Method::Rk4Fixed => run_rk4(field, t_span, cfg, observer, &mut sol),
        Method::Dp45Adaptive => run_dp45(field, t_span, cfg, observer, &mut sol),
    };
    debug_assert!(t1 > t0);
    (sol, err.err())
}

fn run_rk4<F: VectorField + ?Sized, O: StepObserver>(
    field: &F,
    (t0, t1): (f64, f64),
    cfg: &IntegratorConfig,
    observer: &mut O,
    sol: &mut RawSolution,
) -> Result<()> {
    let n_steps = ((t1 - t0) / cfg.dt - 1e-9).ceil().max(1.0) as usize;
    for k in 0..n_steps {
        if sol.steps_taken >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded {
                max_steps: cfg.max_steps,
                last: last_state(&sol.samples),
            });
        }
        let prev = sol.samples.last().unwrap();
        let t = prev.t;
        let t_next = if k + 1 == n_steps {
            t1
        } else {
            t0 + (k + 1) as f64 * cfg.dt
        };
        let y = rk4_step_with(field, t, &prev.y, &prev.dy, t_next - t)
            .map_err(|e| domain_exit(e, cfg, sol))?;
        let mut dy = vec![0.0; y.len()];
        eval_checked(field, t_next, &y, &mut dy, cfg.r_min)
            .map_err(|e| domain_exit(e, cfg, sol))?;
        sol.samples.push(Sample { t: t_next, y, dy });
        sol.steps_taken += 1;
        if observer.accepted(&mut sol.samples) {
            break;
        }
    }
    Ok(())
}

fn domain_exit(e: Error, cfg: &IntegratorConfig, sol: &RawSolution) -> Error {
    match e {
        Error::Domain { .. } => Error::DomainExit {
            r_min: cfg.r_min,
            last: last_state(&sol.samples),
        },
        other => other,
    }
}

fn initial_step<F: VectorField + ?Sized>(
    field: &F,
    s: &Sample,
    cfg: &IntegratorConfig,
    span: f64,
) -> f64 {
    let n = s.y.len() as f64;
    let scale = |i: usize| cfg.atol + cfg.rtol * s.y[i].abs();
    let d0 = ((0..s.y.len())
        .map(|i| (s.y[i] / scale(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let d1 = ((0..s.y.len())
        .map(|i| (s.dy[i] / scale(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1: Vec<f64> = (0..s.y.len()).map(|i| s.y[i] + h0 * s.dy[i]).collect();
    let mut f1 = vec![0.0; s.y.len()];
    if eval_checked(field, s.t + h0, &y1, &mut f1, cfg.r_min).is_err() {
        return h0 * 1e-3;
    }
    let d2 = ((0..s.y.len())
        .map(|i| ((f1[i] - s.dy[i]) / scale(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

fn run_dp45<F: VectorField + ?Sized, O: StepObserver>(
    field: &F,
    (t0, t1): (f64, f64),
    cfg: &IntegratorConfig,
    observer: &mut O,
    sol: &mut RawSolution,
) -> Result<()> {
    let span = t1 - t0;
    let dim = sol.samples[0].y.len();
    let max_step = cfg.max_step.unwrap_or(span).min(span);
    let mut h = initial_step(field, &sol.samples[0], cfg, span).min(max_step);
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut last_rejected = false;
    let mut domain_failures = 0usize;

    loop {
        let prev = sol.samples.last().unwrap();
        let t = prev.t;
        if t >= t1 {
            return Ok(());
        }
        if sol.steps_taken + sol.steps_rejected >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded {
                max_steps: cfg.max_steps,
                last: last_state(&sol.samples),
            });
        }
        if h < UNDERFLOW * span {
            // steps collapsing against the origin guard mean the orbit reached it
            if domain_failures > 0 {
                return Err(Error::DomainExit {
                    r_min: cfg.r_min,
                    last: last_state(&sol.samples),
                });
            }
            return Err(Error::StepUnderflow {
                dt: h,
                last: last_state(&sol.samples),
            });
        }
        let last_step = t + h >= t1;
        if last_step {
            h = t1 - t;
        }
        k[0].copy_from_slice(&prev.dy);
        let mut stage_error = None;
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                tmp[i] = prev.y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            if let Err(e) = eval_checked(field, t + C[s] * h, &tmp, &mut tail[0], cfg.r_min) {
                stage_error = Some(e);
                break;
            }
        }
        if let Some(e) = stage_error {
            match e {
                Error::Domain { .. } => {
                    domain_failures += 1;
                    if domain_failures > DOMAIN_RETRIES {
                        return Err(Error::DomainExit {
                            r_min: cfg.r_min,
                            last: last_state(&sol.samples),
                        });
                    }
                    sol.steps_rejected += 1;
                    h *= 0.25;
                    last_rejected = true;
                    continue;
                }
                other => return Err(other),
            }
        }
        // stage 7 was evaluated at the 5th order solution (FSAL)
        for i in 0..dim {
            err[i] = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
        }
        let norm = error_norm(&prev.y, &tmp, &err, cfg.rtol, cfg.atol);
        if norm <= 1.0 {
            domain_failures = 0;
            let t_new = if last_step { t1 } else { t + h };
            sol.samples.push(Sample {
                t: t_new,
                y: tmp.clone(),
                dy: k[6].clone(),
            });
            sol.steps_taken += 1;
            if observer.accepted(&mut sol.samples) {
                return Ok(());
            }
            let mut factor = if norm == 0.0 {
                MAX_FACTOR
            } else {
                SAFETY * norm.powf(-0.2)
            };
            factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
            if last_rejected {
                factor = factor.min(1.0);
            }
            last_rejected = false;
            h = (h * factor).min(max_step);
        } else {
            sol.steps_rejected += 1;
            last_rejected = true;
            h *= (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
        }
    }
}

/// Kind of recorded event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Perihelion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub t: f64,
    pub y: Vec<f64>,
}

/// Samples of one run with per-sample diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub field: FlowField,
    pub samples: Vec<Sample>,
    pub diagnostics: Vec<SampleDiagnostics>,
    /// Continuous polar angle in the orbital plane.
    pub angles: Vec<f64>,
    pub events: Vec<Event>,
    /// Energy level used for region labels.
    pub level: Option<EnergyLevel>,
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a % two_pi;
    if w > std::f64::consts::PI {
        w -= two_pi;
    } else if w <= -std::f64::consts::PI {
        w += two_pi;
    }
    w
}

/// Orthonormal basis of the orbital plane, fixed from the first state.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PlaneBasis {
    e1: Vector,
    e2: Vector,
}

impl PlaneBasis {
    pub(crate) fn new(field: &FlowField, y0: &[f64]) -> Self {
        let x = field.position(y0);
        if x.dim() == 2 {
            return PlaneBasis {
                e1: Vector::new2(1.0, 0.0),
                e2: Vector::new2(0.0, 1.0),
            };
        }
        let k = field.conjugate(y0);
        let l = match x.wedge(&k) {
            crate::vector::Wedge::Vector(l) => Vector::new3(l[0], l[1], l[2]),
            crate::vector::Wedge::Scalar(_) => unreachable!(),
        };
        if l.norm() == 0.0 || x.norm() == 0.0 {
            return PlaneBasis {
                e1: Vector::new3(1.0, 0.0, 0.0),
                e2: Vector::new3(0.0, 1.0, 0.0),
            };
        }
        let e1 = x * (1.0 / x.norm());
        let n = l * (1.0 / l.norm());
        let [a1, a2, a3] = [n.as_slice()[0], n.as_slice()[1], n.as_slice()[2]];
        let [b1, b2, b3] = [e1.as_slice()[0], e1.as_slice()[1], e1.as_slice()[2]];
        let e2 = Vector::new3(a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1);
        PlaneBasis { e1, e2 }
    }

    pub(crate) fn angle(&self, x: &Vector) -> f64 {
        x.dot(&self.e2).atan2(x.dot(&self.e1))
    }
}

impl Trajectory {
    /// Attaches diagnostics to raw samples. `level` labels regions on relativistic runs;
    /// when absent the initial energy is used.
    pub fn from_samples(
        field: FlowField,
        samples: Vec<Sample>,
        level: Option<EnergyLevel>,
    ) -> Result<Self> {
        let level = match (level, field.energy_level(), samples.first()) {
            (Some(h), _, _) => Some(h),
            (None, Some(h), _) => Some(h),
            (None, None, Some(s)) if field.is_relativistic() => {
                Some(EnergyLevel(field.diagnostics(&s.y, None)?.energy))
            }
            _ => None,
        };
        let diagnostics = samples
            .iter()
            .map(|s| field.diagnostics(&s.y, level))
            .collect::<Result<Vec<_>>>()?;
        let mut angles = Vec::with_capacity(samples.len());
        if let Some(first) = samples.first() {
            let basis = PlaneBasis::new(&field, &first.y);
            let mut acc = basis.angle(&field.position(&first.y));
            let mut raw_prev = acc;
            angles.push(acc);
            for s in &samples[1..] {
                let raw = basis.angle(&field.position(&s.y));
                acc += wrap_angle(raw - raw_prev);
                raw_prev = raw;
                angles.push(acc);
            }
        }
        Ok(Trajectory {
            field,
            samples,
            diagnostics,
            angles,
            events: Vec::new(),
            level,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn t_start(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.t)
    }

    pub fn t_end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn phase_state(&self, i: usize) -> PhaseState {
        self.field
            .phase_state(self.samples[i].t, &self.samples[i].y)
    }

    /// Dense state at `t` by cubic Hermite interpolation (clamped to the sampled range).
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.samples[0].y.len()];
        self.state_into(t, &mut out);
        out
    }

    pub fn state_into(&self, t: f64, out: &mut [f64]) {
        if self.samples.len() == 1 {
            out.copy_from_slice(&self.samples[0].y);
            return;
        }
        let i = self.segment(t);
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        dense::hermite(a.t, &a.y, &a.dy, b.t, &b.y, &b.dy, t.clamp(a.t, b.t), out);
    }

    /// Index of the sample interval containing `t`.
    pub(crate) fn segment(&self, t: f64) -> usize {
        let (mut lo, mut hi) = (0usize, self.samples.len() - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.samples[mid].t <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Maximum relative drift of energy and angular momentum.
    pub fn drifts(&self) -> (f64, f64) {
        let Some(d0) = self.diagnostics.first() else {
            return (0.0, 0.0);
        };
        let e_scale = d0.energy.abs().max(1.0);
        let l_scale = d0.angular_momentum.magnitude().abs().max(1.0);
        self.diagnostics.iter().fold((0.0f64, 0.0f64), |(e, l), d| {
            (
                e.max((d.energy - d0.energy).abs() / e_scale),
                l.max(d.angular_momentum.distance(&d0.angular_momentum) / l_scale),
            )
        })
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Stopped {
        kind: String,
        category: crate::error::ErrorCategory,
        message: String,
        last_state: Option<LastState>,
    },
}

impl RunStatus {
    pub fn from_error(e: &Error) -> Self {
        RunStatus::Stopped {
            kind: e.kind().to_string(),
            category: e.category(),
            message: e.to_string(),
            last_state: e.last_state().cloned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerihelionRecord {
    pub t: f64,
    pub angle: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub perihelion_count: usize,
    pub perihelia: Vec<PerihelionRecord>,
}

/// Summary of one integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: crate::model::ForceModel,
    pub status: RunStatus,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub steps_taken: usize,
    pub steps_rejected: usize,
    pub energy_initial: f64,
    pub energy_drift_rel: f64,
    #[serde(rename = "L_drift_rel")]
    pub angular_momentum_drift_rel: f64,
    pub events: EventSummary,
    pub precession_estimate: Option<PrecessionEstimate>,
}

/// When to end a run besides reaching `t1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StopCondition {
    #[default]
    AtEnd,
    /// Stop exactly when the swept polar angle reaches `2π · n`.
    Revolutions(f64),
    /// Stop after the given number of perihelion passages.
    Perihelia(usize),
}

/// A finished (or interrupted) run.
#[derive(Debug, Clone)]
pub struct Run {
    pub trajectory: Trajectory,
    pub report: RunReport,
    pub error: Option<Error>,
}

impl Run {
    pub fn into_result(self) -> Result<(Trajectory, RunReport)> {
        match self.error {
            Some(e) => Err(e),
            None => Ok((self.trajectory, self.report)),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }
}

struct FieldObserver<'a> {
    field: &'a FlowField,
    stop: StopCondition,
    basis: PlaneBasis,
    swept: f64,
    raw_prev: f64,
    tracker: PerihelionTracker,
    span: f64,
}

impl StepObserver for FieldObserver<'_> {
    fn accepted(&mut self, samples: &mut Vec<Sample>) -> bool {
        match self.stop {
            StopCondition::AtEnd => false,
            StopCondition::Perihelia(n) => {
                self.tracker.push(self.field, samples, self.span);
                self.tracker.events().len() >= n
            }
            StopCondition::Revolutions(n) => {
                let last = samples.last().unwrap();
                let raw = self.basis.angle(&self.field.position(&last.y));
                let step = wrap_angle(raw - self.raw_prev);
                let target = std::f64::consts::TAU * n;
                if (self.swept + step).abs() < target {
                    self.swept += step;
                    self.raw_prev = raw;
                    return false;
                }
                // bisect the last interval for the exact crossing of the target angle
                let len = samples.len();
                let (a, b) = (&samples[len - 2], &samples[len - 1]);
                let (mut lo, mut hi) = (a.t, b.t);
                let mut y = vec![0.0; a.y.len()];
                let base = self.swept;
                let raw_a = self.raw_prev;
                let swept_at = |t: f64, y: &mut [f64]| {
                    dense::hermite(a.t, &a.y, &a.dy, b.t, &b.y, &b.dy, t, y);
                    (base + wrap_angle(self.basis.angle(&self.field.position(y)) - raw_a)).abs()
                };
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if swept_at(mid, &mut y) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if hi < b.t {
                    dense::hermite(a.t, &a.y, &a.dy, b.t, &b.y, &b.dy, hi, &mut y);
                    let mut dy = vec![0.0; y.len()];
                    if self.field.eval(hi, &y, &mut dy).is_ok() {
                        let last = samples.last_mut().unwrap();
                        *last = Sample { t: hi, y, dy };
                    }
                }
                true
            }
        }
    }
}

/// Integrates a physical flow over `t_span` and attaches diagnostics, events and drifts.
pub fn integrate(
    field: &FlowField,
    y0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Run> {
    integrate_until(field, y0, t_span, cfg, StopCondition::AtEnd)
}

/// As [`integrate`], with an additional stopping rule.
pub fn integrate_until(
    field: &FlowField,
    y0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    stop: StopCondition,
) -> Result<Run> {
    cfg.validate()?;
    if !(t_span.1 > t_span.0) || !t_span.0.is_finite() || !t_span.1.is_finite() {
        return Err(Error::invalid("t_span", "t1 must exceed t0"));
    }
    if y0.len() != field.dim() {
        return Err(Error::invalid(
            "initial",
            format!(
                "state length {} != field dimension {}",
                y0.len(),
                field.dim()
            ),
        ));
    }
    if let Some(r) = field.radius(y0) {
        if !(r >= cfg.r_min) {
            return Err(Error::Domain {
                radius: r,
                r_min: cfg.r_min,
            });
        }
    }
    field.eval(t_span.0, y0, &mut vec![0.0; y0.len()])?;
    let basis = PlaneBasis::new(field, y0);
    let raw0 = basis.angle(&field.position(y0));
    let mut observer = FieldObserver {
        field,
        stop,
        basis,
        swept: 0.0,
        raw_prev: raw0,
        tracker: PerihelionTracker::default(),
        span: t_span.1 - t_span.0,
    };
    let (raw, error) = solve(field, y0, t_span, cfg, &mut observer);
    let mut trajectory = Trajectory::from_samples(field.clone(), raw.samples, None)?;
    let perihelia = detect_perihelion(&trajectory);
    trajectory.events = perihelia
        .iter()
        .map(|p| Event {
            kind: EventKind::Perihelion,
            t: p.t,
            y: p.y.clone(),
        })
        .collect();
    let (energy_drift_rel, angular_momentum_drift_rel) = trajectory.drifts();
    let precession = precession_estimate(&perihelia).ok();
    let report = RunReport {
        model: field.model(),
        status: error
            .as_ref()
            .map_or(RunStatus::Completed, RunStatus::from_error),
        t_start: trajectory.t_start(),
        t_end: trajectory.t_end(),
        samples: trajectory.len(),
        steps_taken: raw.steps_taken,
        steps_rejected: raw.steps_rejected,
        energy_initial: trajectory.diagnostics.first().map_or(0.0, |d| d.energy),
        energy_drift_rel,
        angular_momentum_drift_rel,
        events: EventSummary {
            perihelion_count: perihelia.len(),
            perihelia: perihelia
                .iter()
                .map(|p| PerihelionRecord {
                    t: p.t,
                    angle: p.angle,
                    radius: p.radius,
                })
                .collect(),
        },
        precession_estimate: precession,
    };
    Ok(Run {
        trajectory,
        report,
        error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::classical_kepler_field;
    use crate::model::PhysicalParams;

    #[test]
    fn rk4_trivial_fields() {
        let zero = (2usize, |_t: f64, _y: &[f64], dy: &mut [f64]| dy.fill(0.0));
        assert_eq!(
            rk4_step(&zero, 0.0, &[1.5, -2.0], 0.3).unwrap(),
            vec![1.5, -2.0]
        );
        let one = (1usize, |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 1.0);
        assert!((rk4_step(&one, 0.0, &[0.0], 0.1).unwrap()[0] - 0.1).abs() < 1e-16);
    }

    #[test]
    fn rk4_exponential_step() {
        // oracle: exp(0.1) to machine precision, RK4 gives the degree-4 Taylor polynomial
        let exact = 0.1f64.exp();
        let taylor = 1.0 + 0.1 + 0.01 / 2.0 + 0.001 / 6.0 + 0.0001 / 24.0;
        let grow = (1usize, |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0]);
        let y = rk4_step(&grow, 0.0, &[1.0], 0.1).unwrap()[0];
        assert!((y - taylor).abs() < 1e-15);
        assert!((y - exact).abs() < 1e-7);
        assert!((y - 1.105_170_833_333_333).abs() < 1e-15);
    }

    #[test]
    fn dp45_exponential() {
        let grow = (1usize, |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0]);
        let cfg = IntegratorConfig::adaptive(1e-10, 1e-12);
        let (sol, err) = solve(&grow, &[1.0], (0.0, 2.0), &cfg, &mut ());
        assert!(err.is_none());
        let last = sol.samples.last().unwrap();
        assert_eq!(last.t, 2.0);
        assert!((last.y[0] - 2f64.exp()).abs() < 1e-8 * 2f64.exp());
        for w in sol.samples.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        assert!(IntegratorConfig {
            rtol: 1e-2,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(IntegratorConfig {
            atol: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(IntegratorConfig {
            max_steps: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(IntegratorConfig::rk4(-1.0).validate().is_err());
    }

    #[test]
    fn max_steps_carries_last_state() {
        let f = classical_kepler_field(PhysicalParams::default(), 2).unwrap();
        let cfg = IntegratorConfig {
            max_steps: 5,
            ..Default::default()
        };
        let run = integrate(&f, &[1.0, 0.0, 0.0, 1.0], (0.0, 100.0), &cfg).unwrap();
        match run.error {
            Some(Error::MaxStepsExceeded { last, .. }) => {
                assert_eq!(last.t, run.trajectory.t_end());
                assert_eq!(last.y, run.trajectory.samples.last().unwrap().y);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_span_and_initial_state() {
        let f = classical_kepler_field(PhysicalParams::default(), 2).unwrap();
        let cfg = IntegratorConfig::default();
        assert!(integrate(&f, &[1.0, 0.0, 0.0, 1.0], (1.0, 0.0), &cfg).is_err());
        assert!(integrate(&f, &[0.0, 0.0, 0.0, 1.0], (0.0, 1.0), &cfg).is_err());
        assert!(integrate(&f, &[1.0, 0.0, 0.0], (0.0, 1.0), &cfg).is_err());
    }

    #[test]
    fn stored_derivative_matches_field() {
        let f = classical_kepler_field(PhysicalParams::default(), 2).unwrap();
        let run = integrate(
            &f,
            &[1.0, 0.0, 0.0, 1.2],
            (0.0, 10.0),
            &IntegratorConfig::default(),
        )
        .unwrap();
        let mut dy = vec![0.0; 4];
        for s in &run.trajectory.samples {
            f.eval(s.t, &s.y, &mut dy).unwrap();
            assert_eq!(dy, s.dy);
        }
    }

    #[test]
    fn revolutions_stop_exactly() {
        let f = classical_kepler_field(PhysicalParams::default(), 2).unwrap();
        let run = integrate_until(
            &f,
            &[1.0, 0.0, 0.0, 1.0],
            (0.0, 1e3),
            &IntegratorConfig::default(),
            StopCondition::Revolutions(2.0),
        )
        .unwrap();
        assert!(run.is_complete());
        // circular orbit with unit angular speed
        assert!((run.trajectory.t_end() - 4.0 * std::f64::consts::PI).abs() < 1e-8);
        assert!((run.trajectory.angles.last().unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-9);
    }
}
