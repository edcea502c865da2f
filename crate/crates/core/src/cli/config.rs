//! JSON run configuration.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    central_force_field_from, classical_kepler_field, relativistic_field, transformed_field, Clock,
    FlowField,
};
use crate::error::{Error, Result};
use crate::integrate::{IntegratorConfig, StopCondition};
use crate::model::{
    coefficients_for, region_of_value, relativistic_energy, CentralForcePotential, Coefficients,
    EnergyLevel, Family, KeplerPotential, PhaseState, PhysicalParams, Potential, Region,
    DEFAULT_R_MIN,
};
use crate::reparam::{BridgeTolerances, Grid};
use crate::vector::Vector;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub params: PhysicalParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_span: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbits: Option<f64>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub bridge: BridgeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precession: Option<PrecessionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    ClassicalKepler,
    RelativisticKepler,
    TransformedZh {
        h: f64,
    },
    CentralForce {
        ell: u8,
        alpha_hat: f64,
        beta_hat: f64,
    },
    /// Generalized Kepler law with coefficients from a relativistic family.
    Family {
        family: Family,
        h: f64,
        /// Frozen angular momentum; taken from the initial state when absent.
        #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
        angular_momentum: Option<f64>,
    },
}

impl ModelSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::ClassicalKepler => "classical_kepler",
            ModelSpec::RelativisticKepler => "relativistic_kepler",
            ModelSpec::TransformedZh { .. } => "transformed_zh",
            ModelSpec::CentralForce { .. } => "central_force",
            ModelSpec::Family { .. } => "family",
        }
    }

    /// Energy level carried by the model itself.
    pub fn level(&self) -> Option<f64> {
        match self {
            ModelSpec::TransformedZh { h } | ModelSpec::Family { h, .. } => Some(*h),
            _ => None,
        }
    }

    pub fn with_level(self, level: f64) -> Self {
        match self {
            ModelSpec::TransformedZh { .. } => ModelSpec::TransformedZh { h: level },
            ModelSpec::Family {
                family,
                angular_momentum,
                ..
            } => ModelSpec::Family {
                family,
                h: level,
                angular_momentum,
            },
            other => other,
        }
    }
}

/// Position plus exactly one of velocity or momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotPair {
    /// Unwrapped polar angle against radius.
    ThetaR,
    /// Time against relative energy drift.
    TEnergyDrift,
    XY,
}

impl PlotPair {
    pub fn file_name(self) -> &'static str {
        match self {
            PlotPair::ThetaR => "theta_r.dat",
            PlotPair::TEnergyDrift => "t_energy_drift.dat",
            PlotPair::XY => "x_y.dat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub trajectory: String,
    pub report: String,
    pub plots: Vec<PlotPair>,
    /// Keep every n-th sample in the CSV and plot files (the last sample is always kept).
    pub every: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            trajectory: "trajectory.csv".into(),
            report: "report.json".into(),
            plots: vec![PlotPair::ThetaR, PlotPair::TEnergyDrift],
            every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeSpec {
    /// Asserted energy level, checked against the initial state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub orbits: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span_max: Option<f64>,
    /// Duration in `s` of the transformed run on the Σ_h branch.
    pub sigma_span: f64,
    pub grid: Grid,
    pub tolerances: BridgeTolerances,
}

impl Default for BridgeSpec {
    fn default() -> Self {
        BridgeSpec {
            h: None,
            orbits: 5.0,
            span_max: None,
            sigma_span: 3.0,
            grid: Grid::Auto,
            tolerances: BridgeTolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecessionSpec {
    #[serde(default = "default_precession_orbits")]
    pub orbits: f64,
    pub points: Vec<PrecessionPoint>,
}

fn default_precession_orbits() -> f64 {
    10.0
}

/// One row of a precession table: a family, or explicit coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecessionPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Coefficients>,
    #[serde(default)]
    pub h: f64,
    #[serde(rename = "L")]
    pub angular_momentum: f64,
    /// Overrides `params.c` for this row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Eccentricity of the osculating start at pericenter.
    #[serde(default = "default_eccentricity")]
    pub e: f64,
}

fn default_eccentricity() -> f64 {
    0.5
}

/// Grid over energy and angular momentum; starts at `(r0, 0)` moving outward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub h: Vec<f64>,
    #[serde(rename = "L")]
    pub angular_momentum: Vec<f64>,
    pub r0: f64,
}

fn vector_from(name: &str, c: &[f64]) -> Result<Vector> {
    if !(c.len() == 2 || c.len() == 3) {
        return Err(Error::invalid(
            name,
            format!("expected 2 or 3 components, got {}", c.len()),
        ));
    }
    let v = Vector::from_slice(c)?;
    if !v.is_finite() {
        return Err(Error::invalid(name, "components must be finite"));
    }
    Ok(v)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        self.params.validate()?;
        self.integrator.validate()?;
        match self.model {
            ModelSpec::CentralForce {
                ell,
                alpha_hat,
                beta_hat,
            } => {
                Coefficients::new(ell, alpha_hat, beta_hat)?;
            }
            ModelSpec::TransformedZh { h } | ModelSpec::Family { h, .. } if !h.is_finite() => {
                return Err(Error::invalid("model.h", "must be finite"));
            }
            _ => {}
        }
        if let Some(init) = &self.initial {
            let x = vector_from("initial.x", &init.x)?;
            match (&init.v, &init.p) {
                (Some(v), None) | (None, Some(v)) => {
                    let name = if init.v.is_some() {
                        "initial.v"
                    } else {
                        "initial.p"
                    };
                    if vector_from(name, v)?.dim() != x.dim() {
                        return Err(Error::invalid(name, "dimension differs from initial.x"));
                    }
                }
                _ => return Err(Error::invalid("initial", "give exactly one of v or p")),
            }
        }
        if let Some([t0, t1]) = self.t_span {
            if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
                return Err(Error::invalid("t_span", "t1 must exceed t0"));
            }
        }
        if let Some(n) = self.orbits {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::invalid("orbits", "must be positive"));
            }
        }
        if self.output.every == 0 {
            return Err(Error::invalid("output.every", "must be at least 1"));
        }
        if let Some(s) = &self.sweep {
            if s.h.is_empty() || s.angular_momentum.is_empty() {
                return Err(Error::invalid("sweep", "grid axes must be non-empty"));
            }
            if !(s.r0 > 0.0) {
                return Err(Error::invalid("sweep.r0", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn initial(&self) -> Result<PhaseState> {
        let init = self
            .initial
            .as_ref()
            .ok_or_else(|| Error::invalid("initial", "missing initial state"))?;
        let x = vector_from("initial.x", &init.x)?;
        Ok(match (&init.v, &init.p) {
            (Some(v), _) => PhaseState::with_velocity(0.0, x, vector_from("initial.v", v)?),
            (None, Some(p)) => PhaseState::with_momentum(0.0, x, vector_from("initial.p", p)?),
            (None, None) => return Err(Error::invalid("initial", "give exactly one of v or p")),
        })
    }

    pub fn kepler(&self) -> Arc<dyn Potential> {
        Arc::new(KeplerPotential::new(&self.params).with_r_min(self.integrator.r_min))
    }

    /// Coefficients of a central-force or family model.
    pub fn coefficients(&self, state: Option<&PhaseState>) -> Result<Option<Coefficients>> {
        Ok(match self.model {
            ModelSpec::CentralForce {
                ell,
                alpha_hat,
                beta_hat,
            } => Some(Coefficients::new(ell, alpha_hat, beta_hat)?),
            ModelSpec::Family {
                family,
                h,
                angular_momentum,
            } => {
                let l = match (angular_momentum, state) {
                    (Some(l), _) => Some(l),
                    (None, Some(s)) => {
                        Some(self.params.m * s.x.wedge(&s.velocity(&self.params)).magnitude().abs())
                    }
                    (None, None) => None,
                };
                Some(coefficients_for(family, EnergyLevel(h), l, &self.params)?)
            }
            _ => None,
        })
    }

    /// Flow field of the selected model together with its initial flat state.
    pub fn build(&self) -> Result<(FlowField, Vec<f64>)> {
        let state = self.initial()?;
        let n = state.x.dim();
        let params = self.params;
        let field = match self.model {
            ModelSpec::ClassicalKepler => classical_kepler_field(params, n)?,
            ModelSpec::RelativisticKepler => {
                let potential = self.kepler();
                let h = relativistic_energy(&state, &params, potential.as_ref())?;
                relativistic_field(params, potential, n)?.with_clock(Clock::Forward(EnergyLevel(h)))
            }
            ModelSpec::TransformedZh { h } => {
                transformed_field(params, EnergyLevel(h), self.kepler(), n)?
            }
            ModelSpec::CentralForce { .. } | ModelSpec::Family { .. } => {
                central_force_field_from(self.coefficients(Some(&state))?.unwrap(), params, n)?
            }
        };
        let conjugate = if field.is_relativistic() {
            state.momentum(&params)?
        } else {
            state.velocity(&params)
        };
        let y0 = field.flat_state(&state.x, &conjugate, 0.0)?;
        Ok((field, y0))
    }

    /// Leading attraction strength of the model, for period estimates.
    fn strength(&self) -> Result<f64> {
        let mc2 = self.params.rest_energy();
        Ok(match self.model {
            ModelSpec::ClassicalKepler | ModelSpec::RelativisticKepler => self.params.alpha(),
            ModelSpec::TransformedZh { h } => self.params.alpha() * (1.0 + h / mc2),
            _ => {
                self.coefficients(self.initial().ok().as_ref())?
                    .unwrap()
                    .alpha_hat
            }
        })
    }

    /// Integration span and stop rule: `t_span`, or `orbits` with an estimated upper bound.
    pub fn span(&self) -> Result<((f64, f64), StopCondition)> {
        match (self.t_span, self.orbits) {
            (Some([t0, t1]), None) => Ok(((t0, t1), StopCondition::AtEnd)),
            (Some([t0, t1]), Some(n)) => Ok(((t0, t1), StopCondition::Revolutions(n))),
            (None, Some(n)) => {
                let state = self.initial()?;
                let v = state.velocity(&self.params);
                let t = orbit_time_bound(
                    self.strength()? / self.params.m,
                    state.x.norm(),
                    v.norm(),
                    n,
                )?;
                Ok(((0.0, t), StopCondition::Revolutions(n)))
            }
            (None, None) => Err(Error::invalid("t_span", "give t_span or orbits")),
        }
    }
}

/// Generous bound on the time of `orbits` revolutions of the osculating Kepler ellipse.
pub fn orbit_time_bound(mu: f64, r: f64, speed: f64, orbits: f64) -> Result<f64> {
    let eps = 0.5 * speed * speed - mu / r;
    if !(eps < 0.0) || !(mu > 0.0) {
        return Err(Error::invalid(
            "orbits",
            "initial state is not on a bounded orbit; give t_span",
        ));
    }
    let a = mu / (2.0 * -eps);
    Ok(50.0 * (orbits + 1.0) * std::f64::consts::TAU * (a * a * a / mu).sqrt())
}

/// Planar start at `(r0, 0)` with energy `h`, angular momentum `L` and outward radial motion.
pub fn start_from_invariants(
    config: &RunConfig,
    h: f64,
    angular_momentum: f64,
    r0: f64,
) -> Result<InitialState> {
    let params = config.params;
    let m = params.m;
    let model = config.model.with_level(h);
    let alpha = params.alpha();
    let v = alpha / r0;
    let pt = angular_momentum / r0;
    let (p2, as_momentum) = match model {
        ModelSpec::RelativisticKepler => {
            let region = region_of_value(v, EnergyLevel(h), &params);
            if region != Region::OmegaH {
                return Err(Error::Region {
                    expected: Region::OmegaH.to_string(),
                    found: region.to_string(),
                });
            }
            let gamma = 1.0 + (v + h) / params.rest_energy();
            (m * m * params.c * params.c * (gamma * gamma - 1.0), true)
        }
        ModelSpec::ClassicalKepler => (2.0 * m * (h + v), false),
        ModelSpec::TransformedZh { .. } => {
            let region = region_of_value(v, EnergyLevel(h), &params);
            if region == Region::Forbidden {
                return Err(Error::Region {
                    expected: Region::OmegaH.to_string(),
                    found: region.to_string(),
                });
            }
            let z = v + (v + h).powi(2) / (2.0 * params.rest_energy());
            (2.0 * m * (h + z), false)
        }
        ModelSpec::CentralForce {
            ell,
            alpha_hat,
            beta_hat,
        } => (
            2.0 * m * (h + central_value(Coefficients::new(ell, alpha_hat, beta_hat)?, r0)?),
            false,
        ),
        ModelSpec::Family {
            family,
            h,
            angular_momentum: frozen,
        } => {
            let l = frozen.unwrap_or(angular_momentum);
            (
                2.0 * m
                    * (h + central_value(
                        coefficients_for(family, EnergyLevel(h), Some(l), &params)?,
                        r0,
                    )?),
                false,
            )
        }
    };
    let pr2 = p2 - pt * pt;
    if !(pr2 >= 0.0) {
        return Err(Error::invalid(
            "L",
            format!("angular momentum {angular_momentum} exceeds r0·|p| at r0 = {r0}"),
        ));
    }
    let p = [pr2.sqrt(), pt];
    if as_momentum {
        // keep |v| < c exactly by passing momentum
        Ok(InitialState {
            x: vec![r0, 0.0],
            v: None,
            p: Some(p.to_vec()),
        })
    } else {
        Ok(InitialState {
            x: vec![r0, 0.0],
            v: Some(vec![p[0] / m, p[1] / m]),
            p: None,
        })
    }
}

fn central_value(coefficients: Coefficients, r: f64) -> Result<f64> {
    CentralForcePotential {
        coefficients,
        r_min: DEFAULT_R_MIN,
    }
    .value(&Vector::new2(r, 0.0))
}
