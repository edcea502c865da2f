//! Energy-dependent clock change between the relativistic system and the
//! transformed Newtonian system `m z″ = ∇Z_h(z)`.
//!
//! Along a relativistic solution of energy `h` the bridge parameter is
//! `ζ(t) = mc² ∫ dt / (V(x) + h + mc²)`; reparametrizing by its inverse gives a
//! solution of the transformed system with classical energy `h`, and the
//! converse holds with the inverse clock. On `Ω_h` the rate `dζ/dt` lies in `(0, 1]`.
//!
//! Solutions of the transformed system that live in `Σ_h` map, with the rate
//! `mc²/|V + h + mc²|`, to relativistic motion of mass `−m`, i.e.
//! `d/dt(m γ ẋ) = −∇V`, whose energy `−mc²(γ − 1) − V` equals `h + 2mc²`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{relativistic_field, transformed_field, Clock, FlowField, VectorField};
use crate::error::{Error, Result};
use crate::integrate::dense::MonotoneCubic;
use crate::integrate::{
    integrate_until, solve, IntegratorConfig, Sample, StopCondition, Trajectory,
};
use crate::model::{
    classical_energy, classify_region, gamma_of_velocity, relativistic_energy, EnergyLevel,
    NegatedPotential, PhaseState, PhysicalParams, Potential, Region, TransformedPotential,
};
use crate::vector::Vector;

/// Relative tolerance of the energy preconditions.
pub const ENERGY_MATCH_TOL: f64 = 1e-10;
/// Target `ω·Δ` of the uniform transport grid; keeps the finite-difference
/// truncation of the residual checks near `1e-6` of the force scale.
const GRID_OMEGA_STEP: f64 = 2.4e-3;
const MAX_GRID_POINTS: usize = 4_000_000;

/// Which companion clock a trajectory carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockKind {
    /// `ζ(t)` along a relativistic run.
    Forward,
    /// Physical time `t(s)` along a transformed run on `Ω_h`.
    Inverse,
    /// Physical time along a transformed run on `Σ_h` (rate magnitude).
    InverseMagnitude,
}

/// A trajectory whose clock slot holds the companion time variable.
#[derive(Debug, Clone)]
pub struct ClockedTrajectory {
    pub base: Trajectory,
    pub kind: ClockKind,
    pub h: EnergyLevel,
    /// Settings used to re-evaluate states between stored samples.
    pub cfg: IntegratorConfig,
}

impl ClockedTrajectory {
    fn clock_index(&self) -> usize {
        2 * self.base.field.space_dim()
    }

    /// Companion clock value at every sample.
    pub fn clock(&self) -> Vec<f64> {
        let i = self.clock_index();
        self.base.samples.iter().map(|s| s.y[i]).collect()
    }

    /// Derivative of the clock with respect to the run parameter at every sample.
    pub fn clock_rate(&self) -> Vec<f64> {
        let i = self.clock_index();
        self.base.samples.iter().map(|s| s.dy[i]).collect()
    }

    /// Clock value at an arbitrary run parameter.
    pub fn clock_at(&self, param: f64) -> Result<f64> {
        Ok(self.state_at(param)?[self.clock_index()])
    }

    /// Inverse of the clock as a monotone cubic with exact knot slopes.
    pub fn inverse_clock(&self) -> Result<MonotoneCubic> {
        let clock = self.clock();
        let rate = self.clock_rate();
        for (i, w) in clock.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::NonMonotoneClock { index: i + 1 });
            }
        }
        if let Some(i) = rate.iter().position(|r| !(*r > 0.0)) {
            return Err(Error::NonMonotoneClock { index: i });
        }
        let times: Vec<f64> = self.base.times().collect();
        MonotoneCubic::new(clock, times, Some(rate.iter().map(|r| 1.0 / r).collect()))
    }

    /// State at `param`, integrated from the nearest earlier sample.
    pub fn state_at(&self, param: f64) -> Result<Vec<f64>> {
        exact_state(&self.base, &self.cfg, param)
    }

    /// State where the clock reads `tau`, starting from the guess `param`.
    fn state_at_clock(&self, tau: f64, mut param: f64) -> Result<(f64, Vec<f64>)> {
        let ci = self.clock_index();
        let mut dy = vec![0.0; self.base.samples[0].y.len()];
        let mut y = self.state_at(param)?;
        for _ in 0..4 {
            let miss = y[ci] - tau;
            if miss.abs() <= 4.0 * f64::EPSILON * tau.abs().max(1.0) {
                break;
            }
            self.base.field.eval(param, &y, &mut dy)?;
            param -= miss / dy[ci];
            y = self.state_at(param)?;
        }
        Ok((param, y))
    }

    /// Total companion-clock duration.
    pub fn clock_span(&self) -> f64 {
        self.clock().last().copied().unwrap_or(0.0)
    }
}

/// State of `traj` at `param`, integrated from the nearest earlier sample.
pub fn exact_state(traj: &Trajectory, cfg: &IntegratorConfig, param: f64) -> Result<Vec<f64>> {
    let a = &traj.samples[traj.segment(param)];
    if param <= a.t {
        return Ok(a.y.clone());
    }
    let (sol, err) = solve(&traj.field, &a.y, (a.t, param), cfg, &mut ());
    match err {
        Some(e) => Err(e),
        None => Ok(sol
            .samples
            .last()
            .map(|s| s.y.clone())
            .unwrap_or_else(|| a.y.clone())),
    }
}

/// `EnergyMismatch` unless `actual` is within `ENERGY_MATCH_TOL` (relative) of `expected`.
pub fn check_level(expected: EnergyLevel, actual: f64) -> Result<()> {
    if (actual - expected.0).abs() > ENERGY_MATCH_TOL * expected.0.abs().max(1.0)
        || !actual.is_finite()
    {
        return Err(Error::EnergyMismatch {
            expected: expected.0,
            actual,
        });
    }
    Ok(())
}

fn check_region(found: Region, expected: Region) -> Result<()> {
    if found != expected {
        return Err(Error::Region {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

fn stopped_early(
    run: &crate::integrate::Run,
    stop: StopCondition,
    t_span: (f64, f64),
) -> Result<()> {
    if let StopCondition::Revolutions(n) = stop {
        let swept = run.trajectory.angles.last().copied().unwrap_or(0.0) - run.trajectory.angles[0];
        if swept.abs() < std::f64::consts::TAU * n * (1.0 - 1e-12)
            && run.trajectory.t_end() >= t_span.1
        {
            return Err(Error::invalid(
                "orbits",
                format!(
                    "span end {} reached after {:.3} revolutions",
                    t_span.1,
                    swept.abs() / std::f64::consts::TAU
                ),
            ));
        }
    }
    Ok(())
}

/// Relativistic run co-integrating `ζ̇ = mc² / (V + h + mc²)`, `ζ(t0) = 0`.
pub fn integrate_with_forward_clock(
    params: PhysicalParams,
    potential: Arc<dyn Potential>,
    h: EnergyLevel,
    y0: &PhaseState,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    stop: StopCondition,
) -> Result<ClockedTrajectory> {
    check_level(h, relativistic_energy(y0, &params, potential.as_ref())?)?;
    check_region(
        classify_region(&y0.x, h, &params, potential.as_ref())?,
        Region::OmegaH,
    )?;
    let field = relativistic_field(params, potential, y0.x.dim())?.with_clock(Clock::Forward(h));
    let y = field.flat_state(&y0.x, &y0.momentum(&params)?, 0.0)?;
    let run = integrate_until(&field, &y, t_span, cfg, stop)?;
    stopped_early(&run, stop, t_span)?;
    let (base, _) = run.into_result()?;
    Ok(ClockedTrajectory {
        base,
        kind: ClockKind::Forward,
        h,
        cfg: *cfg,
    })
}

/// Transformed run co-integrating the physical time `dt/ds = (V + h + mc²) / mc²`, `t(s0) = 0`.
pub fn integrate_with_inverse_clock(
    params: PhysicalParams,
    potential: Arc<dyn Potential>,
    h: EnergyLevel,
    z0: &PhaseState,
    s_span: (f64, f64),
    cfg: &IntegratorConfig,
    stop: StopCondition,
) -> Result<ClockedTrajectory> {
    let z_potential = TransformedPotential::new(potential.clone(), h, params);
    check_level(h, classical_energy(z0, &params, &z_potential)?)?;
    check_region(
        classify_region(&z0.x, h, &params, potential.as_ref())?,
        Region::OmegaH,
    )?;
    clocked_transformed(
        params,
        potential,
        h,
        z0,
        s_span,
        cfg,
        stop,
        Clock::PhysicalTime(h),
        ClockKind::Inverse,
    )
}

fn clocked_transformed(
    params: PhysicalParams,
    potential: Arc<dyn Potential>,
    h: EnergyLevel,
    z0: &PhaseState,
    s_span: (f64, f64),
    cfg: &IntegratorConfig,
    stop: StopCondition,
    clock: Clock,
    kind: ClockKind,
) -> Result<ClockedTrajectory> {
    let field = transformed_field(params, h, potential, z0.x.dim())?.with_clock(clock);
    let y = field.flat_state(&z0.x, &z0.velocity(&params), 0.0)?;
    let run = integrate_until(&field, &y, s_span, cfg, stop)?;
    stopped_early(&run, stop, s_span)?;
    let (base, _) = run.into_result()?;
    Ok(ClockedTrajectory {
        base,
        kind,
        h,
        cfg: *cfg,
    })
}

/// Spacing of the uniform grid a transport resamples onto.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    /// Spacing chosen from the fastest time scale of the orbit.
    #[default]
    Auto,
    Points(usize),
    Spacing(f64),
}

fn grid_points(span: f64, grid: Grid, omega_max: f64) -> Result<usize> {
    let n = match grid {
        Grid::Points(n) => n,
        Grid::Spacing(d) if d > 0.0 => (span / d).ceil() as usize,
        Grid::Spacing(_) => return Err(Error::invalid("grid", "spacing must be positive")),
        Grid::Auto => (span * omega_max / GRID_OMEGA_STEP).ceil() as usize,
    };
    Ok(n.clamp(2, MAX_GRID_POINTS))
}

/// Largest `max(|v|/r, √(|a|/r))` over the states a transport will produce.
fn fastest_rate(clocked: &ClockedTrajectory) -> f64 {
    let field = &clocked.base.field;
    let params = field.params();
    let mc2 = params.rest_energy();
    let v_pot = field.base_potential();
    clocked
        .base
        .samples
        .iter()
        .filter_map(|s| {
            let x = field.position(&s.y);
            let (v, grad) = v_pot.eval(&x).ok()?;
            let r = x.norm();
            let w = (v + clocked.h.0 + mc2).abs() / mc2;
            let (speed, acc) = match clocked.kind {
                ClockKind::Forward => (field.velocity(&s.y).norm() * w, grad.norm() * w / params.m),
                ClockKind::Inverse | ClockKind::InverseMagnitude => {
                    (field.velocity(&s.y).norm() / w, grad.norm() / params.m)
                }
            };
            Some((speed / r).max((acc / r).sqrt()))
        })
        .fold(0.0, f64::max)
}

fn resample<F>(
    clocked: &ClockedTrajectory,
    grid: Grid,
    target: &FlowField,
    mut map: F,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let chi = clocked.inverse_clock()?;
    let (_, span) = chi.domain();
    let n = grid_points(span, grid, fastest_rate(clocked))?;
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let tau = if k == n {
            span
        } else {
            span * k as f64 / n as f64
        };
        let (param, y) = if k == 0 {
            (clocked.base.t_start(), clocked.base.samples[0].y.clone())
        } else {
            clocked.state_at_clock(tau, chi.eval(tau))?
        };
        let out = map(param, &y)?;
        let mut dy = vec![0.0; out.len()];
        target.eval(tau, &out, &mut dy)?;
        samples.push(Sample { t: tau, y: out, dy });
    }
    Trajectory::from_samples(target.clone(), samples, Some(clocked.h))
}

/// Reparametrizes a relativistic run by `χ = ζ⁻¹` onto a uniform grid of the bridge parameter `s`.
///
/// The result is a trajectory of the transformed system whose clock slot holds the physical time.
pub fn transport_forward(clocked: &ClockedTrajectory, grid: Grid) -> Result<Trajectory> {
    if clocked.kind != ClockKind::Forward {
        return Err(Error::invalid(
            "clock",
            "forward transport needs a relativistic run with the forward clock",
        ));
    }
    let field = &clocked.base.field;
    let params = *field.params();
    let mc2 = params.rest_energy();
    let h = clocked.h;
    let potential = field.base_potential().clone();
    let target = transformed_field(params, h, potential.clone(), field.space_dim())?
        .with_clock(Clock::PhysicalTime(h));
    resample(clocked, grid, &target, |t, y| {
        let x = field.position(y);
        let v = field.velocity(y);
        let z_dot = v * ((potential.value(&x)? + h.0 + mc2) / mc2);
        target.flat_state(&x, &z_dot, t)
    })
}

/// Reparametrizes a transformed run by the inverse clock onto a uniform grid of physical time.
///
/// On `Ω_h` the result is a relativistic trajectory (momentum form) whose clock slot holds `s`.
/// On `Σ_h` (magnitude clock) the result is relativistic motion in `−V`, without a clock.
pub fn transport_backward(clocked: &ClockedTrajectory, grid: Grid) -> Result<Trajectory> {
    let field = &clocked.base.field;
    let params = *field.params();
    let mc2 = params.rest_energy();
    let h = clocked.h;
    let potential = field.base_potential().clone();
    let n = field.space_dim();
    let (target, magnitude) = match clocked.kind {
        ClockKind::Forward => {
            return Err(Error::invalid(
                "clock",
                "backward transport needs a transformed run with the inverse clock",
            ))
        }
        ClockKind::Inverse => (
            relativistic_field(params, potential.clone(), n)?.with_clock(Clock::Forward(h)),
            false,
        ),
        ClockKind::InverseMagnitude => (
            relativistic_field(params, Arc::new(NegatedPotential(potential.clone())), n)?,
            true,
        ),
    };
    resample(clocked, grid, &target, |s, y| {
        let z = field.position(y);
        let z_dot = field.velocity(y);
        let w = potential.value(&z)? + h.0 + mc2;
        let w = if magnitude { w.abs() } else { w };
        let x_dot = z_dot * (mc2 / w);
        let p = x_dot * (params.m * gamma_of_velocity(&x_dot, &params)?);
        target.flat_state(&z, &p, s)
    })
}

/// Transformed initial data matched to a relativistic state: `z0 = x0`, `z′0 = ẋ0 (V + h + mc²)/mc²`.
pub fn matched_transformed_state(
    params: &PhysicalParams,
    potential: &dyn Potential,
    h: EnergyLevel,
    y0: &PhaseState,
) -> Result<PhaseState> {
    let mc2 = params.rest_energy();
    let w = potential.value(&y0.x)? + h.0 + mc2;
    Ok(PhaseState::with_velocity(
        0.0,
        y0.x,
        y0.velocity(params) * (w / mc2),
    ))
}

/// Relativistic initial data matched to a transformed state: `x0 = z0`, `ẋ0 = z′0 mc² / |V + h + mc²|`.
pub fn matched_relativistic_state(
    params: &PhysicalParams,
    potential: &dyn Potential,
    h: EnergyLevel,
    z0: &PhaseState,
) -> Result<PhaseState> {
    let mc2 = params.rest_energy();
    let w = (potential.value(&z0.x)? + h.0 + mc2).abs();
    let v = z0.velocity(params) * (mc2 / w);
    Ok(PhaseState::with_velocity(0.0, z0.x, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Relativistic run transported to the transformed system.
    Forward,
    /// Transformed run transported to the relativistic system.
    Backward,
    /// Transformed run on `Σ_h` transported to relativistic motion of energy `h + 2mc²`.
    Sigma,
}

/// Pass thresholds of an equivalence check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeTolerances {
    /// Sup-norm gap between transported and independently integrated positions.
    pub position: f64,
    /// Energy gap of the transported curve from its target level.
    pub energy: f64,
    /// ODE residual relative to the force scale.
    pub residual_rel: f64,
    /// Clock round-trip gap relative to the physical duration.
    pub clock_rel: f64,
    /// Gap in the speed identity `1 − |ẋ|²/c² = (mc²/(V + h + mc²))²`.
    pub speed_identity: f64,
}

impl Default for BridgeTolerances {
    fn default() -> Self {
        BridgeTolerances {
            position: 1e-5,
            energy: 1e-8,
            residual_rel: 1e-4,
            clock_rel: 1e-8,
            speed_identity: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeOptions {
    /// Revolutions of the source run (ignored on `Σ_h`).
    pub orbits: f64,
    /// Upper bound on the source run parameter; estimated for Kepler potentials when absent.
    pub span_max: Option<f64>,
    pub grid: Grid,
    pub tolerances: BridgeTolerances,
}

impl Default for BridgeOptions {
    fn default() -> Self {
        BridgeOptions {
            orbits: 5.0,
            span_max: None,
            grid: Grid::Auto,
            tolerances: BridgeTolerances::default(),
        }
    }
}

/// Gaps between the two sides of the clock change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub direction: Direction,
    pub h: f64,
    /// Energy the transported curve should carry.
    pub target_energy: f64,
    pub duration_t: f64,
    pub duration_s: f64,
    pub grid_points: usize,
    pub sup_position_gap: f64,
    pub energy_gap: f64,
    pub residual_norm: f64,
    pub residual_scale: f64,
    pub clock_roundtrip_gap: Option<f64>,
    pub speed_identity_gap: f64,
    /// Range of the forward clock rate `dζ/dt` over the relativistic samples.
    pub clock_rate_min: f64,
    pub clock_rate_max: f64,
    pub tolerances: BridgeTolerances,
    pub pass: bool,
    pub failures: Vec<String>,
}

impl EquivalenceReport {
    fn judge(mut self) -> Self {
        let tol = self.tolerances;
        let mut failures = Vec::new();
        let mut check = |name: &str, value: f64, limit: f64| {
            if !(value <= limit) {
                failures.push(format!("{name} {value:e} > {limit:e}"));
            }
        };
        check("sup_position_gap", self.sup_position_gap, tol.position);
        check("energy_gap", self.energy_gap, tol.energy);
        check(
            "residual_norm",
            self.residual_norm,
            tol.residual_rel * self.residual_scale,
        );
        if let Some(c) = self.clock_roundtrip_gap {
            check("clock_roundtrip_gap", c, tol.clock_rel * self.duration_t);
        }
        check(
            "speed_identity_gap",
            self.speed_identity_gap,
            tol.speed_identity,
        );
        self.pass = failures.is_empty();
        self.failures = failures;
        self
    }
}

/// Centered second differences of positions against the stored acceleration.
fn newtonian_residual(traj: &Trajectory) -> (f64, f64) {
    let n = traj.field.space_dim();
    let s = &traj.samples;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 1..s.len().saturating_sub(1) {
        let d = 0.5 * (s[k + 1].t - s[k - 1].t);
        let z = |i: usize| Vector::read(&s[i].y, 0, n);
        let fd = (z(k + 1) - z(k) * 2.0 + z(k - 1)) * (1.0 / (d * d));
        let acc = Vector::read(&s[k].dy, n, n);
        worst = worst.max((fd - acc).norm());
        scale = scale.max(acc.norm());
    }
    (worst, scale)
}

/// Centered first differences of momentum against `ṗ`, in acceleration units.
fn momentum_residual(traj: &Trajectory) -> (f64, f64) {
    let n = traj.field.space_dim();
    let m = traj.field.params().m;
    let s = &traj.samples;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 1..s.len().saturating_sub(1) {
        let d = s[k + 1].t - s[k - 1].t;
        let p = |i: usize| Vector::read(&s[i].y, n, n);
        let fd = (p(k + 1) - p(k - 1)) * (1.0 / d);
        let force = Vector::read(&s[k].dy, n, n);
        worst = worst.max((fd - force).norm() / m);
        scale = scale.max(force.norm() / m);
    }
    (worst, scale)
}

/// Max over samples of `|1 − |ẋ|²/c² − (mc²/(V + h + mc²))²|`.
pub fn speed_identity_gap(
    traj: &Trajectory,
    h: EnergyLevel,
    potential: &dyn Potential,
) -> Result<f64> {
    let field = &traj.field;
    let params = field.params();
    let mc2 = params.rest_energy();
    let c2 = params.c * params.c;
    traj.samples.iter().try_fold(0.0f64, |acc, s| {
        let x = field.position(&s.y);
        let v = field.velocity(&s.y);
        let w = mc2 / (potential.value(&x)? + h.0 + mc2);
        Ok(acc.max((1.0 - v.norm_squared() / c2 - w * w).abs()))
    })
}

/// Max over samples of the relative gap in `|ẋ|² = 2mc⁴(Z_h + h)/(V + h + mc²)²`.
pub fn speed_squared_gap(
    traj: &Trajectory,
    h: EnergyLevel,
    potential: Arc<dyn Potential>,
) -> Result<f64> {
    let field = &traj.field;
    let params = *field.params();
    let mc2 = params.rest_energy();
    let z = TransformedPotential::new(potential.clone(), h, params);
    traj.samples.iter().try_fold(0.0f64, |acc, s| {
        let x = field.position(&s.y);
        let v2 = field.velocity(&s.y).norm_squared();
        let w = potential.value(&x)? + h.0 + mc2;
        let predicted = 2.0 * params.m * params.c * params.c * mc2 * (z.value(&x)? + h.0) / (w * w);
        Ok(acc.max((v2 - predicted).abs() / predicted.abs().max(v2).max(f64::MIN_POSITIVE)))
    })
}

fn sup_gap(a: &Trajectory, b: &Trajectory, cfg: &IntegratorConfig) -> Result<f64> {
    let n = a.field.space_dim();
    a.samples.iter().try_fold(0.0f64, |acc, s| {
        let y = exact_state(b, cfg, s.t)?;
        Ok(acc.max((Vector::read(&s.y, 0, n) - Vector::read(&y, 0, n)).norm()))
    })
}

fn energy_gap(traj: &Trajectory, target: f64) -> f64 {
    traj.diagnostics
        .iter()
        .fold(0.0, |acc, d| acc.max((d.energy - target).abs()))
}

fn rate_range(rates: &[f64]) -> (f64, f64) {
    rates
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(*r), hi.max(*r))
        })
}

/// Rough upper bound of the run parameter for `orbits` revolutions of a bounded Kepler orbit.
fn kepler_span(
    params: &PhysicalParams,
    alpha: f64,
    h: EnergyLevel,
    orbits: f64,
    physical: bool,
    v_max: f64,
) -> Result<f64> {
    let mc2 = params.rest_energy();
    let e_eff = h.0 + h.0 * h.0 / (2.0 * mc2);
    if !(e_eff < 0.0) {
        return Err(Error::invalid(
            "h",
            format!("energy {} gives an unbounded orbit", h.0),
        ));
    }
    let alpha_hat = alpha * (1.0 + h.0 / mc2);
    let a = alpha_hat / (2.0 * -e_eff);
    let period = std::f64::consts::TAU * (params.m * a * a * a / alpha_hat).sqrt();
    let stretch = if physical {
        (v_max + h.0 + mc2).abs() / mc2
    } else {
        1.0
    };
    Ok(20.0 * (orbits + 1.0) * period * stretch.max(1.0))
}

fn check_spiral(params: &PhysicalParams, alpha: f64, x: &Vector, p: &Vector) -> Result<()> {
    let l2 = x.wedge(p).magnitude().powi(2);
    let m_beta = (alpha / params.c).powi(2);
    if l2 <= m_beta {
        return Err(Error::SpiralRegime {
            l_squared: l2,
            m_beta,
        });
    }
    Ok(())
}

/// Runs the relativistic system with its forward clock, transports it to the
/// bridge parameter and compares it with an independent transformed run.
pub fn verify_equivalence(
    params: PhysicalParams,
    potential: Arc<dyn Potential>,
    h: EnergyLevel,
    y0: &PhaseState,
    options: &BridgeOptions,
    cfg: &IntegratorConfig,
) -> Result<EquivalenceReport> {
    check_level(h, relativistic_energy(y0, &params, potential.as_ref())?)?;
    let t_max = match (options.span_max, potential.kepler_strength()) {
        (Some(t), _) => t,
        (None, Some(alpha)) => {
            check_spiral(&params, alpha, &y0.x, &y0.momentum(&params)?)?;
            kepler_span(
                &params,
                alpha,
                h,
                options.orbits,
                true,
                potential.value(&y0.x)?.max(alpha / y0.x.norm()),
            )?
        }
        (None, None) => {
            return Err(Error::invalid(
                "span_max",
                "required for non-Kepler potentials",
            ))
        }
    };
    let relativistic = integrate_with_forward_clock(
        params,
        potential.clone(),
        h,
        y0,
        (0.0, t_max),
        cfg,
        StopCondition::Revolutions(options.orbits),
    )?;
    let transported = transport_forward(&relativistic, options.grid)?;
    let big_s = relativistic.clock_span();
    let big_t = relativistic.base.t_end();

    let z0 = matched_transformed_state(&params, potential.as_ref(), h, y0)?;
    let independent = integrate_with_inverse_clock(
        params,
        potential.clone(),
        h,
        &z0,
        (0.0, big_s),
        cfg,
        StopCondition::AtEnd,
    )?;

    let (residual_norm, residual_scale) = newtonian_residual(&transported);
    let clock_gap = relativistic
        .base
        .samples
        .iter()
        .zip(relativistic.clock())
        .try_fold(0.0f64, |acc, (s, zeta)| -> Result<f64> {
            Ok(acc.max((independent.clock_at(zeta)? - s.t).abs()))
        })?;
    let (rate_min, rate_max) = rate_range(&relativistic.clock_rate());
    let report = EquivalenceReport {
        direction: Direction::Forward,
        h: h.0,
        target_energy: h.0,
        duration_t: big_t,
        duration_s: big_s,
        grid_points: transported.len(),
        sup_position_gap: sup_gap(&transported, &independent.base, cfg)?,
        energy_gap: energy_gap(&transported, h.0),
        residual_norm,
        residual_scale,
        clock_roundtrip_gap: Some(clock_gap),
        speed_identity_gap: speed_identity_gap(&relativistic.base, h, potential.as_ref())?,
        clock_rate_min: rate_min,
        clock_rate_max: rate_max,
        tolerances: options.tolerances,
        pass: false,
        failures: Vec::new(),
    };
    Ok(report.judge())
}

/// Converse check: transformed run with the inverse clock, transported to physical
/// time and compared with an independent relativistic run.
pub fn verify_equivalence_backward(
    params: PhysicalParams,
    potential: Arc<dyn Potential>,
    h: EnergyLevel,
    z0: &PhaseState,
    options: &BridgeOptions,
    cfg: &IntegratorConfig,
) -> Result<EquivalenceReport> {
    let x0 = matched_relativistic_state(&params, potential.as_ref(), h, z0)?;
    let s_max = match (options.span_max, potential.kepler_strength()) {
        (Some(s), _) => s,
        (None, Some(alpha)) => {
            check_spiral(&params, alpha, &x0.x, &x0.momentum(&params)?)?;
            kepler_span(&params, alpha, h, options.orbits, false, 0.0)?
        }
        (None, None) => {
            return Err(Error::invalid(
                "span_max",
                "required for non-Kepler potentials",
            ))
        }
    };
    let transformed = integrate_with_inverse_clock(
        params,
        potential.clone(),
        h,
        z0,
        (0.0, s_max),
        cfg,
        StopCondition::Revolutions(options.orbits),
    )?;
    let transported = transport_backward(&transformed, options.grid)?;
    let big_t = transformed.clock_span();
    let big_s = transformed.base.t_end();
    let independent = integrate_with_forward_clock(
        params,
        potential.clone(),
        h,
        &x0,
        (0.0, big_t),
        cfg,
        StopCondition::AtEnd,
    )?;
    let (residual_norm, residual_scale) = momentum_residual(&transported);
    // t(s) from the transformed run composed with ζ(t) from the relativistic run
    let clock_gap = transformed
        .base
        .samples
        .iter()
        .zip(transformed.clock())
        .try_fold(0.0f64, |acc, (s, t)| -> Result<f64> {
            Ok(acc.max((independent.clock_at(t)? - s.t).abs()))
        })?;
    let (rate_min, rate_max) = rate_range(&independent.clock_rate());
    let report = EquivalenceReport {
        direction: Direction::Backward,
        h: h.0,
        target_energy: h.0,
        duration_t: big_t,
        duration_s: big_s,
        grid_points: transported.len(),
        sup_position_gap: sup_gap(&transported, &independent.base, cfg)?,
        energy_gap: energy_gap(&transported, h.0),
        residual_norm,
        residual_scale,
        clock_roundtrip_gap: Some(clock_gap * big_t / big_s.max(f64::MIN_POSITIVE)),
        speed_identity_gap: speed_identity_gap(&transported, h, potential.as_ref())?,
        clock_rate_min: rate_min,
        clock_rate_max: rate_max,
        tolerances: options.tolerances,
        pass: false,
        failures: Vec::new(),
    };
    Ok(report.judge())
}

/// Transformed solution on `Σ_h` transported with the rate `mc²/|V + h + mc²|`;
/// reports its energy `−mc²(γ − 1) − V` against `h + 2mc²`.
pub fn sigma_branch_check(
    params: PhysicalParams,
    potential: Arc<dyn Potential>,
    h: EnergyLevel,
    z0: &PhaseState,
    s_span: f64,
    options: &BridgeOptions,
    cfg: &IntegratorConfig,
) -> Result<EquivalenceReport> {
    check_region(
        classify_region(&z0.x, h, &params, potential.as_ref())?,
        Region::SigmaH,
    )?;
    let z_potential = TransformedPotential::new(potential.clone(), h, params);
    check_level(h, classical_energy(z0, &params, &z_potential)?)?;
    let transformed = clocked_transformed(
        params,
        potential.clone(),
        h,
        z0,
        (0.0, s_span),
        cfg,
        StopCondition::AtEnd,
        Clock::PhysicalTimeMagnitude(h),
        ClockKind::InverseMagnitude,
    )?;
    let transported = transport_backward(&transformed, options.grid)?;
    let big_t = transformed.clock_span();
    let mc2 = params.rest_energy();
    let target = h.0 + 2.0 * mc2;

    // the transported field is relativistic motion in −V, whose own energy is mc²(γ−1) + V
    let energy_gap = transported
        .diagnostics
        .iter()
        .fold(0.0f64, |acc, d| acc.max((-d.energy - target).abs()));

    let x0 = matched_relativistic_state(&params, potential.as_ref(), h, z0)?;
    let negated: Arc<dyn Potential> = Arc::new(NegatedPotential(potential.clone()));
    let field = relativistic_field(params, negated, z0.x.dim())?;
    let y0 = field.flat_state(&x0.x, &x0.momentum(&params)?, 0.0)?;
    let (independent, _) =
        integrate_until(&field, &y0, (0.0, big_t), cfg, StopCondition::AtEnd)?.into_result()?;

    let (residual_norm, residual_scale) = momentum_residual(&transported);
    let c2 = params.c * params.c;
    let speed_gap = transported
        .samples
        .iter()
        .try_fold(0.0f64, |acc, s| -> Result<f64> {
            let x = transported.field.position(&s.y);
            let v = transported.field.velocity(&s.y);
            let w = mc2 / (potential.value(&x)? + h.0 + mc2);
            Ok(acc.max((1.0 - v.norm_squared() / c2 - w * w).abs()))
        })?;
    let (rate_min, rate_max) = rate_range(
        &transformed
            .clock_rate()
            .iter()
            .map(|r| 1.0 / r)
            .collect::<Vec<_>>(),
    );
    let report = EquivalenceReport {
        direction: Direction::Sigma,
        h: h.0,
        target_energy: target,
        duration_t: big_t,
        duration_s: transformed.base.t_end(),
        grid_points: transported.len(),
        sup_position_gap: sup_gap(&transported, &independent, cfg)?,
        energy_gap,
        residual_norm,
        residual_scale,
        clock_roundtrip_gap: None,
        speed_identity_gap: speed_gap,
        clock_rate_min: rate_min,
        clock_rate_max: rate_max,
        tolerances: BridgeTolerances {
            energy: options.tolerances.energy.max(1e-6),
            ..options.tolerances
        },
        pass: false,
        failures: Vec::new(),
    };
    Ok(report.judge())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KeplerPotential;

    #[derive(Debug)]
    struct Flat(f64);

    impl Potential for Flat {
        fn eval(&self, x: &Vector) -> Result<(f64, Vector)> {
            Ok((self.0, Vector::zeros(x.dim())))
        }
    }

    fn unit() -> PhysicalParams {
        PhysicalParams::default()
    }

    fn kepler() -> Arc<dyn Potential> {
        Arc::new(KeplerPotential::new(&unit()))
    }

    /// Energy-h state at radius r with angular momentum l (m = c = α = 1).
    fn kepler_state(h: f64, r: f64, l: f64) -> PhaseState {
        let gamma = 1.0 + h + 1.0 / r;
        let p2 = gamma * gamma - 1.0;
        let pt = l / r;
        PhaseState::with_momentum(
            0.0,
            Vector::new2(r, 0.0),
            Vector::new2((p2 - pt * pt).sqrt(), pt),
        )
    }

    fn flat_run(h: f64, speed: f64, t: f64) -> ClockedTrajectory {
        let y0 = PhaseState::with_velocity(0.0, Vector::new2(1.0, 0.0), Vector::new2(0.0, speed));
        let cfg = IntegratorConfig::default();
        integrate_with_forward_clock(
            unit(),
            Arc::new(Flat(0.5)),
            EnergyLevel(h),
            &y0,
            (0.0, t),
            &cfg,
            StopCondition::AtEnd,
        )
        .unwrap()
    }

    #[test]
    fn constant_integrand_forward_clock() {
        let run = flat_run(0.0, (5.0f64).sqrt() / 3.0, 3.0);
        assert!((run.clock_span() - 2.0).abs() < 1e-12);
        assert!((run.clock_at(1.5).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(run.clock()[0], 0.0);
    }

    #[test]
    fn rest_on_zero_level_has_unit_rate() {
        let run = flat_run(-0.5, 0.0, 1.0);
        assert!((run.clock_rate()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_integrand_inverse_clock() {
        let z0 = PhaseState::with_velocity(0.0, Vector::new2(1.0, 0.0), Vector::new2(0.0, 0.5));
        // Z_h + h = 0.5 + 0.125 = 0.625 → |z′|² = 1.25
        let z0 = PhaseState::with_velocity(0.0, z0.x, Vector::new2(0.0, 1.25f64.sqrt()));
        let cfg = IntegratorConfig::default();
        let run = integrate_with_inverse_clock(
            unit(),
            Arc::new(Flat(0.5)),
            EnergyLevel(0.0),
            &z0,
            (0.0, 2.0),
            &cfg,
            StopCondition::AtEnd,
        )
        .unwrap();
        assert!((run.clock_span() - 3.0).abs() < 1e-12);
        assert!(run.clock_rate().iter().all(|r| (r - 1.5).abs() < 1e-14));
    }

    #[test]
    fn inverse_clock_rest_on_zero_level() {
        let z0 = PhaseState::with_velocity(0.0, Vector::new2(2.0, 0.0), Vector::new2(0.0, 0.0));
        let cfg = IntegratorConfig::default();
        let run = integrate_with_inverse_clock(
            unit(),
            kepler(),
            EnergyLevel(-0.5),
            &z0,
            (0.0, 0.5),
            &cfg,
            StopCondition::AtEnd,
        )
        .unwrap();
        assert!((run.clock_rate()[0] - 1.0).abs() < 1e-15);
        assert!(run.clock().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn constant_rate_transport_both_ways() {
        let speed = (5.0f64).sqrt() / 3.0;
        let run = flat_run(0.0, speed, 3.0);
        let z = transport_forward(&run, Grid::Points(60)).unwrap();
        for s in &z.samples {
            let x = z.field.position(&s.y);
            assert!((x.as_slice()[1] - speed * 1.5 * s.t).abs() < 1e-12);
            assert!((z.field.velocity(&s.y).norm() - 1.5 * speed).abs() < 1e-12);
            assert!((s.y[4] - 1.5 * s.t).abs() < 1e-12);
        }
        let h = EnergyLevel(0.0);
        let inverse = integrate_with_inverse_clock(
            unit(),
            Arc::new(Flat(0.5)),
            h,
            &z.phase_state(0),
            (0.0, 2.0),
            &IntegratorConfig::default(),
            StopCondition::AtEnd,
        )
        .unwrap();
        let x = transport_backward(&inverse, Grid::Points(30)).unwrap();
        for s in &x.samples {
            assert!((x.field.position(&s.y).as_slice()[1] - speed * s.t).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_clock_on_kepler_orbit() {
        let y0 = kepler_state(-0.3, 2.0, 1.2);
        let run = integrate_with_forward_clock(
            unit(),
            kepler(),
            EnergyLevel(-0.3),
            &y0,
            (0.0, 500.0),
            &IntegratorConfig::default(),
            StopCondition::Revolutions(2.0),
        )
        .unwrap();
        assert!(run.clock().windows(2).all(|w| w[1] > w[0]));
        assert!(run.clock_rate().iter().all(|r| *r > 0.0 && *r <= 1.0));
    }

    #[test]
    fn round_trip_transport_returns_positions() {
        let h = EnergyLevel(-0.3);
        let y0 = kepler_state(h.0, 2.0, 1.2);
        let cfg = IntegratorConfig::default();
        let run = integrate_with_forward_clock(
            unit(),
            kepler(),
            h,
            &y0,
            (0.0, 500.0),
            &cfg,
            StopCondition::Revolutions(1.0),
        )
        .unwrap();
        let z = transport_forward(&run, Grid::Auto).unwrap();
        let zc = ClockedTrajectory {
            base: z,
            kind: ClockKind::Inverse,
            h,
            cfg,
        };
        let back = transport_backward(&zc, Grid::Auto).unwrap();
        let gap = sup_gap(&back, &run.base, &cfg).unwrap();
        assert!(gap < 1e-8, "{gap}");
        let e = energy_gap(&back, h.0);
        assert!(e < 1e-8, "{e}");
    }

    #[test]
    fn mismatched_energy_is_rejected() {
        let y0 = kepler_state(-0.3, 2.0, 1.2);
        let err = verify_equivalence(
            unit(),
            kepler(),
            EnergyLevel(-0.2),
            &y0,
            &BridgeOptions::default(),
            &IntegratorConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err.kind(), "EnergyMismatch");
    }

    #[test]
    fn circular_orbit_equivalence() {
        // γv² = α/(mr) at r = 1 with m = c = α = 1: v² = (√5 − 1)/2
        let v2 = (5.0f64.sqrt() - 1.0) / 2.0;
        let gamma = 1.0 / (1.0 - v2).sqrt();
        let y0 =
            PhaseState::with_velocity(0.0, Vector::new2(1.0, 0.0), Vector::new2(0.0, v2.sqrt()));
        let report = verify_equivalence(
            unit(),
            kepler(),
            EnergyLevel(gamma - 2.0),
            &y0,
            &BridgeOptions::default(),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(report.sup_position_gap < 1e-6, "{report:?}");
        assert!(report.energy_gap < 1e-8, "{report:?}");
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn eccentric_orbit_equivalence_both_directions() {
        let h = EnergyLevel(-0.3);
        let y0 = kepler_state(h.0, 2.0, 1.2);
        let cfg = IntegratorConfig::default();
        let report =
            verify_equivalence(unit(), kepler(), h, &y0, &BridgeOptions::default(), &cfg).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.clock_rate_max <= 1.0 && report.clock_rate_min > 0.0);
        let z0 = matched_transformed_state(&unit(), kepler().as_ref(), h, &y0).unwrap();
        let report =
            verify_equivalence_backward(unit(), kepler(), h, &z0, &BridgeOptions::default(), &cfg)
                .unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn plunging_orbit_is_spiral_regime() {
        let h = EnergyLevel(-0.3);
        let y0 = kepler_state(h.0, 2.0, 0.9);
        let err = verify_equivalence(
            unit(),
            kepler(),
            h,
            &y0,
            &BridgeOptions::default(),
            &IntegratorConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err.kind(), "SpiralRegime");
    }

    #[test]
    fn sigma_branch_energy() {
        let h = EnergyLevel(-3.0);
        let z0 = PhaseState::with_velocity(
            0.0,
            Vector::new2(2.0, 0.0),
            Vector::new2(0.3, 1.25f64.sqrt()),
        );
        let z0 = PhaseState::with_velocity(
            0.0,
            z0.x,
            z0.velocity(&unit()) * (1.25f64.sqrt() / z0.velocity(&unit()).norm()),
        );
        let report = sigma_branch_check(
            unit(),
            kepler(),
            h,
            &z0,
            3.0,
            &BridgeOptions::default(),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(report.target_energy, -1.0);
        assert!(report.energy_gap < 1e-6, "{report:?}");
    }

    #[test]
    fn sigma_branch_rejects_omega_state() {
        let z0 = PhaseState::with_velocity(0.0, Vector::new2(2.0, 0.0), Vector::new2(0.0, 0.0));
        let err = sigma_branch_check(
            unit(),
            kepler(),
            EnergyLevel(-0.5),
            &z0,
            1.0,
            &BridgeOptions::default(),
            &IntegratorConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err.kind(), "RegionError");
    }
}
