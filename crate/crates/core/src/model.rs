//! Physical parameters, potentials, force-law coefficient families and the
//! conserved quantities of the relativistic and transformed systems.
//!
//! Sign convention throughout: a potential `V` enters the equations of motion
//! as `+∇V` and the energies as `kinetic − V`, so the attractive Kepler
//! potential is `V = α/|x|` with `α = G·M·m`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{Vector, Wedge};

/// Default origin guard.
pub const DEFAULT_R_MIN: f64 = 1e-8;

/// Masses, gravitational constant and speed of light. Defaults to scaled units `G = M = m = c = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "M")]
    pub central_mass: f64,
    pub m: f64,
    pub c: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            g: 1.0,
            central_mass: 1.0,
            m: 1.0,
            c: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn new(g: f64, central_mass: f64, m: f64, c: f64) -> Result<Self> {
        let p = PhysicalParams {
            g,
            central_mass,
            m,
            c,
        };
        p.validate()?;
        Ok(p)
    }

    /// Scaled units with a different speed of light.
    pub fn with_c(c: f64) -> Result<Self> {
        PhysicalParams::new(1.0, 1.0, 1.0, c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("G", self.g),
            ("M", self.central_mass),
            ("m", self.m),
            ("c", self.c),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    format!("params.{name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// `α = G·M·m`, always recomputed.
    pub fn alpha(&self) -> f64 {
        self.g * self.central_mass * self.m
    }

    /// Rest energy `m c²`.
    pub fn rest_energy(&self) -> f64 {
        self.m * self.c * self.c
    }
}

/// A fixed energy level `h`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnergyLevel(pub f64);

impl EnergyLevel {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for EnergyLevel {
    fn from(h: f64) -> Self {
        EnergyLevel(h)
    }
}

/// A C¹ potential on `R^n \ {0}`.
pub trait Potential: Send + Sync + fmt::Debug {
    /// Value and gradient at `x`.
    fn eval(&self, x: &Vector) -> Result<(f64, Vector)>;

    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(self.eval(x)?.0)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(self.eval(x)?.1)
    }

    /// `Some(α)` when the potential is exactly `α/|x|`.
    fn kepler_strength(&self) -> Option<f64> {
        None
    }

    /// Radius below which evaluation is refused.
    fn r_min(&self) -> f64 {
        DEFAULT_R_MIN
    }
}

fn guarded_radius(x: &Vector, r_min: f64) -> Result<f64> {
    let r = x.norm();
    if !(r >= r_min) || r == 0.0 {
        return Err(Error::Domain { radius: r, r_min });
    }
    Ok(r)
}

/// `V(x) = α/|x|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeplerPotential {
    pub alpha: f64,
    pub r_min: f64,
}

impl KeplerPotential {
    pub fn new(params: &PhysicalParams) -> Self {
        KeplerPotential {
            alpha: params.alpha(),
            r_min: DEFAULT_R_MIN,
        }
    }

    pub fn with_r_min(mut self, r_min: f64) -> Self {
        self.r_min = r_min;
        self
    }
}

impl Potential for KeplerPotential {
    fn eval(&self, x: &Vector) -> Result<(f64, Vector)> {
        let r = guarded_radius(x, self.r_min)?;
        let value = self.alpha / r;
        Ok((value, *x * (-self.alpha / (r * r * r))))
    }

    fn kepler_strength(&self) -> Option<f64> {
        Some(self.alpha)
    }

    fn r_min(&self) -> f64 {
        self.r_min
    }
}

/// Kepler potential and gradient for the given parameters.
pub fn kepler_potential(x: &Vector, params: &PhysicalParams) -> Result<(f64, Vector)> {
    KeplerPotential::new(params).eval(x)
}

/// `Z_h(x) = V(x) + (V(x) + h)² / (2 m c²)`, the potential of the transformed
/// system. The additive constant `h²/(2mc²)` hidden in the square is kept.
#[derive(Debug, Clone)]
pub struct TransformedPotential {
    pub base: Arc<dyn Potential>,
    pub h: EnergyLevel,
    pub params: PhysicalParams,
}

impl TransformedPotential {
    pub fn new(base: Arc<dyn Potential>, h: EnergyLevel, params: PhysicalParams) -> Self {
        TransformedPotential { base, h, params }
    }
}

impl Potential for TransformedPotential {
    fn eval(&self, x: &Vector) -> Result<(f64, Vector)> {
        let (v, grad) = self.base.eval(x)?;
        let mc2 = self.params.rest_energy();
        let shifted = v + self.h.0;
        let value = v + shifted * shifted / (2.0 * mc2);
        Ok((value, grad * (1.0 + shifted / mc2)))
    }

    fn r_min(&self) -> f64 {
        self.base.r_min()
    }
}

/// Value and gradient of `Z_h` built on `V`.
pub fn transformed_potential(
    x: &Vector,
    h: EnergyLevel,
    params: &PhysicalParams,
    base: Arc<dyn Potential>,
) -> Result<(f64, Vector)> {
    TransformedPotential::new(base, h, *params).eval(x)
}

/// Potential of the generalized Kepler force `−α̂x/|x|³ − β̂x/|x|^ℓ`:
/// `U(x) = α̂/|x| + β̂ / ((ℓ−2)|x|^(ℓ−2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralForcePotential {
    pub coefficients: Coefficients,
    pub r_min: f64,
}

impl Potential for CentralForcePotential {
    fn eval(&self, x: &Vector) -> Result<(f64, Vector)> {
        let r = guarded_radius(x, self.r_min)?;
        let Coefficients {
            ell,
            alpha_hat,
            beta_hat,
        } = self.coefficients;
        let tail = r.powi(ell as i32 - 2);
        let value = alpha_hat / r + beta_hat / (f64::from(ell - 2) * tail);
        let grad = *x * (-alpha_hat / (r * r * r) - beta_hat / (tail * r * r));
        Ok((value, grad))
    }

    fn kepler_strength(&self) -> Option<f64> {
        (self.coefficients.beta_hat == 0.0).then_some(self.coefficients.alpha_hat)
    }

    fn r_min(&self) -> f64 {
        self.r_min
    }
}

/// `−V`. The transformed system on `Σ_h` corresponds to relativistic motion in this potential.
#[derive(Debug, Clone)]
pub struct NegatedPotential(pub Arc<dyn Potential>);

impl Potential for NegatedPotential {
    fn eval(&self, x: &Vector) -> Result<(f64, Vector)> {
        let (v, g) = self.0.eval(x)?;
        Ok((-v, -g))
    }

    fn r_min(&self) -> f64 {
        self.0.r_min()
    }
}

/// The three relativistic corrections that lead to a generalized Kepler force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Schwarzschild,
    LeviCivita,
    SpecialRelativity,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Schwarzschild => "schwarzschild",
            Family::LeviCivita => "levi_civita",
            Family::SpecialRelativity => "special_relativity",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(ℓ, α̂, β̂)` of `m ẍ = −α̂x/|x|³ − β̂x/|x|^ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub ell: u8,
    pub alpha_hat: f64,
    pub beta_hat: f64,
}

impl Coefficients {
    pub fn new(ell: u8, alpha_hat: f64, beta_hat: f64) -> Result<Self> {
        if ell != 4 && ell != 5 {
            return Err(Error::invalid("ell", format!("must be 4 or 5, got {ell}")));
        }
        if !(alpha_hat > 0.0) || !alpha_hat.is_finite() {
            return Err(Error::NonPositiveAttraction { alpha_hat });
        }
        if !beta_hat.is_finite() {
            return Err(Error::invalid("beta_hat", "must be finite"));
        }
        Ok(Coefficients {
            ell,
            alpha_hat,
            beta_hat,
        })
    }
}

/// Coefficients of the generalized Kepler force for a correction family.
///
/// `angular_momentum` is only read for [`Family::Schwarzschild`], whose `β̂`
/// depends on it; callers freeze it from the run's initial condition.
pub fn coefficients_for(
    family: Family,
    h: EnergyLevel,
    angular_momentum: Option<f64>,
    params: &PhysicalParams,
) -> Result<Coefficients> {
    params.validate()?;
    let PhysicalParams {
        g,
        central_mass,
        m,
        c,
    } = *params;
    let alpha = params.alpha();
    let c2 = c * c;
    let gm2 = g * g * central_mass * central_mass;
    let (ell, alpha_hat, beta_hat) = match family {
        Family::Schwarzschild => {
            let l = angular_momentum.ok_or_else(|| {
                Error::invalid("L", "the Schwarzschild family needs the angular momentum")
            })?;
            (5, alpha, 3.0 * g * central_mass * l * l / (m * c2))
        }
        Family::LeviCivita => (4, alpha * (1.0 + 4.0 * h.0 / (m * c2)), 6.0 * gm2 * m / c2),
        Family::SpecialRelativity => (4, alpha * (1.0 + h.0 / (m * c2)), gm2 * m / c2),
    };
    Coefficients::new(ell, alpha_hat, beta_hat)
}

/// Dynamics law tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForceModel {
    ClassicalKepler,
    RelativisticKepler,
    TransformedZh { h: EnergyLevel },
    CentralForce { coefficients: Coefficients },
}

/// Second half of a phase-space point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kinematics {
    Velocity(Vector),
    Momentum(Vector),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    pub x: Vector,
    pub kin: Kinematics,
}

impl PhaseState {
    pub fn with_velocity(t: f64, x: Vector, v: Vector) -> Self {
        PhaseState {
            t,
            x,
            kin: Kinematics::Velocity(v),
        }
    }

    pub fn with_momentum(t: f64, x: Vector, p: Vector) -> Self {
        PhaseState {
            t,
            x,
            kin: Kinematics::Momentum(p),
        }
    }

    /// Relativistic velocity `ẋ = p / (m √(1 + |p|²/(m²c²)))` when a momentum is stored.
    pub fn velocity(&self, params: &PhysicalParams) -> Vector {
        match self.kin {
            Kinematics::Velocity(v) => v,
            Kinematics::Momentum(p) => p * (1.0 / (params.m * gamma_from_momentum(&p, params))),
        }
    }

    /// Relativistic momentum `m γ ẋ`.
    pub fn momentum(&self, params: &PhysicalParams) -> Result<Vector> {
        match self.kin {
            Kinematics::Momentum(p) => Ok(p),
            Kinematics::Velocity(v) => Ok(v * (params.m * gamma_of_velocity(&v, params)?)),
        }
    }
}

/// `γ = √(1 + |p|²/(m²c²))`; never fails.
pub fn gamma_from_momentum(p: &Vector, params: &PhysicalParams) -> f64 {
    let mc = params.m * params.c;
    (1.0 + p.norm_squared() / (mc * mc)).sqrt()
}

pub fn gamma_of_velocity(v: &Vector, params: &PhysicalParams) -> Result<f64> {
    let beta2 = v.norm_squared() / (params.c * params.c);
    if !(beta2 < 1.0) {
        return Err(Error::Superluminal {
            speed: v.norm(),
            c: params.c,
        });
    }
    Ok(1.0 / (1.0 - beta2).sqrt())
}

/// Lorentz factor of a state.
pub fn gamma_of(state: &PhaseState, params: &PhysicalParams) -> Result<f64> {
    match state.kin {
        Kinematics::Velocity(v) => gamma_of_velocity(&v, params),
        Kinematics::Momentum(p) => Ok(gamma_from_momentum(&p, params)),
    }
}

/// `m c² (γ − 1)`, evaluated without cancellation when `|p| ≪ mc`.
pub(crate) fn relativistic_kinetic(p: &Vector, params: &PhysicalParams) -> f64 {
    let gamma = gamma_from_momentum(p, params);
    p.norm_squared() / (params.m * (gamma + 1.0))
}

/// Relativistic energy `m c² (γ − 1) − V(x)`.
pub fn relativistic_energy(
    state: &PhaseState,
    params: &PhysicalParams,
    potential: &dyn Potential,
) -> Result<f64> {
    let p = state.momentum(params)?;
    Ok(relativistic_kinetic(&p, params) - potential.value(&state.x)?)
}

/// Classical energy `(m/2)|z′|² − Z(z)`; `state` must carry a velocity.
pub fn classical_energy(
    state: &PhaseState,
    params: &PhysicalParams,
    potential: &dyn Potential,
) -> Result<f64> {
    let v = match state.kin {
        Kinematics::Velocity(v) => v,
        Kinematics::Momentum(p) => p * (1.0 / params.m),
    };
    Ok(0.5 * params.m * v.norm_squared() - potential.value(&state.x)?)
}

/// `m x ∧ ẋ` (classical) or `x ∧ p` (relativistic).
pub fn angular_momentum(
    state: &PhaseState,
    params: &PhysicalParams,
    relativistic: bool,
) -> Result<Wedge> {
    let w = if relativistic {
        state.x.wedge(&state.momentum(params)?)
    } else {
        match state.kin {
            Kinematics::Velocity(v) => state.x.wedge(&v).scale(params.m),
            Kinematics::Momentum(p) => state.x.wedge(&p),
        }
    };
    Ok(w)
}

/// Where a point sits relative to the energy level `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// `V + h ≥ 0`
    OmegaH,
    /// `V + h + 2mc² ≤ 0`
    SigmaH,
    Forbidden,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::OmegaH => "OmegaH",
            Region::SigmaH => "SigmaH",
            Region::Forbidden => "Forbidden",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Region label from an already evaluated potential value.
pub fn region_of_value(v: f64, h: EnergyLevel, params: &PhysicalParams) -> Region {
    let shifted = v + h.0;
    if shifted >= 0.0 {
        Region::OmegaH
    } else if shifted + 2.0 * params.rest_energy() <= 0.0 {
        Region::SigmaH
    } else {
        Region::Forbidden
    }
}

pub fn classify_region(
    x: &Vector,
    h: EnergyLevel,
    params: &PhysicalParams,
    potential: &dyn Potential,
) -> Result<Region> {
    Ok(region_of_value(potential.value(x)?, h, params))
}
