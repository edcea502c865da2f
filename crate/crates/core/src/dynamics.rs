//! First-order vector fields for the four systems.
//!
//! Flat state layout: `[x (n), v or p (n), clock (optional, 1)]`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    gamma_from_momentum, region_of_value, relativistic_kinetic, CentralForcePotential,
    Coefficients, EnergyLevel, ForceModel, KeplerPotential, PhaseState, PhysicalParams, Potential,
    Region, TransformedPotential, DEFAULT_R_MIN,
};
use crate::vector::{Vector, Wedge};

/// An autonomous or non-autonomous ODE `y' = f(t, y)` on a flat state.
pub trait VectorField {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Distance of the configuration part from the singular point, if the field has one.
    fn radius(&self, _y: &[f64]) -> Option<f64> {
        None
    }
}

impl<F> VectorField for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (self.1)(t, y, dy);
        Ok(())
    }
}

/// How the momentum-like half of the state evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Law {
    /// `ẋ = v`, `m v̇ = ∇U(x)`.
    Newtonian,
    /// `ẋ = p / (m γ)`, `ṗ = ∇V(x)` with `γ = √(1 + |p|²/(m²c²))`.
    Relativistic,
}

/// Optional companion time variable integrated with the motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clock {
    None,
    /// `ζ̇ = mc² / (V + h + mc²)` along a relativistic solution (physical time to bridge parameter).
    Forward(EnergyLevel),
    /// `dt/ds = (V + h + mc²) / mc²` along a transformed solution (bridge parameter to physical time).
    PhysicalTime(EnergyLevel),
    /// `dt/ds = |V + h + mc²| / mc²`, the rate used on `Σ_h`.
    PhysicalTimeMagnitude(EnergyLevel),
}

impl Clock {
    pub fn level(&self) -> Option<EnergyLevel> {
        match *self {
            Clock::None => None,
            Clock::Forward(h) | Clock::PhysicalTime(h) | Clock::PhysicalTimeMagnitude(h) => Some(h),
        }
    }

    /// Clock rate given the underlying potential value.
    pub fn rate(&self, v: f64, params: &PhysicalParams) -> Option<f64> {
        let mc2 = params.rest_energy();
        match *self {
            Clock::None => None,
            Clock::Forward(h) => Some(mc2 / (v + h.0 + mc2)),
            Clock::PhysicalTime(h) => Some((v + h.0 + mc2) / mc2),
            Clock::PhysicalTimeMagnitude(h) => Some((v + h.0 + mc2).abs() / mc2),
        }
    }
}

/// Per-sample conserved quantities and labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDiagnostics {
    pub energy: f64,
    pub angular_momentum: Wedge,
    pub gamma: Option<f64>,
    pub region: Option<Region>,
    /// Underlying potential `V` (or `U` for central-force runs).
    pub potential: f64,
}

/// A dynamics law bound to its parameters.
#[derive(Debug, Clone)]
pub struct FlowField {
    model: ForceModel,
    law: Law,
    params: PhysicalParams,
    /// Gradient source of the equations of motion.
    force: Arc<dyn Potential>,
    /// Potential used by clocks and regions.
    base: Arc<dyn Potential>,
    n: usize,
    clock: Clock,
}

fn check_dim(n: usize) -> Result<()> {
    if n == 2 || n == 3 {
        Ok(())
    } else {
        Err(Error::invalid("dim", format!("must be 2 or 3, got {n}")))
    }
}

/// Special-relativistic dynamics `d/dt (m ẋ γ) = ∇V(x)` in momentum form.
pub fn relativistic_field(
    params: PhysicalParams,
    potential: Arc<dyn Potential>,
    n: usize,
) -> Result<FlowField> {
    params.validate()?;
    check_dim(n)?;
    Ok(FlowField {
        model: ForceModel::RelativisticKepler,
        law: Law::Relativistic,
        params,
        force: potential.clone(),
        base: potential,
        n,
        clock: Clock::None,
    })
}

/// Transformed dynamics `m z″ = ∇Z_h(z)`.
pub fn transformed_field(
    params: PhysicalParams,
    h: EnergyLevel,
    potential: Arc<dyn Potential>,
    n: usize,
) -> Result<FlowField> {
    params.validate()?;
    check_dim(n)?;
    Ok(FlowField {
        model: ForceModel::TransformedZh { h },
        law: Law::Newtonian,
        params,
        force: Arc::new(TransformedPotential::new(potential.clone(), h, params)),
        base: potential,
        n,
        clock: Clock::None,
    })
}

/// Generalized Kepler dynamics `m ẍ = −α̂x/|x|³ − β̂x/|x|^ℓ`.
pub fn central_force_field(
    ell: u8,
    alpha_hat: f64,
    beta_hat: f64,
    params: PhysicalParams,
    n: usize,
) -> Result<FlowField> {
    let coefficients = Coefficients::new(ell, alpha_hat, beta_hat)?;
    central_force_field_from(coefficients, params, n)
}

pub fn central_force_field_from(
    coefficients: Coefficients,
    params: PhysicalParams,
    n: usize,
) -> Result<FlowField> {
    params.validate()?;
    check_dim(n)?;
    let u: Arc<dyn Potential> = Arc::new(CentralForcePotential {
        coefficients,
        r_min: DEFAULT_R_MIN,
    });
    Ok(FlowField {
        model: ForceModel::CentralForce { coefficients },
        law: Law::Newtonian,
        params,
        force: u.clone(),
        base: u,
        n,
        clock: Clock::None,
    })
}

/// Classical Kepler dynamics `m ẍ = −αx/|x|³`.
pub fn classical_kepler_field(params: PhysicalParams, n: usize) -> Result<FlowField> {
    params.validate()?;
    check_dim(n)?;
    let v: Arc<dyn Potential> = Arc::new(KeplerPotential::new(&params));
    Ok(FlowField {
        model: ForceModel::ClassicalKepler,
        law: Law::Newtonian,
        params,
        force: v.clone(),
        base: v,
        n,
        clock: Clock::None,
    })
}

/// Explicit relativistic acceleration `ẍ = (∇V − (ẋ·∇V) ẋ / c²) / (m γ)`.
pub fn relativistic_acceleration(
    v: &Vector,
    grad: &Vector,
    params: &PhysicalParams,
) -> Result<Vector> {
    let gamma = crate::model::gamma_of_velocity(v, params)?;
    let c2 = params.c * params.c;
    Ok((*grad - *v * (v.dot(grad) / c2)) * (1.0 / (params.m * gamma)))
}

impl FlowField {
    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn model(&self) -> ForceModel {
        self.model
    }

    pub fn law(&self) -> Law {
        self.law
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    /// Spatial dimension `n`.
    pub fn space_dim(&self) -> usize {
        self.n
    }

    /// Potential driving the motion (`V`, `Z_h` or `U`).
    pub fn force_potential(&self) -> &Arc<dyn Potential> {
        &self.force
    }

    /// Underlying potential (`V` for relativistic and transformed runs).
    pub fn base_potential(&self) -> &Arc<dyn Potential> {
        &self.base
    }

    pub fn is_relativistic(&self) -> bool {
        self.law == Law::Relativistic
    }

    /// Energy level tied to the field itself or to its clock.
    pub fn energy_level(&self) -> Option<EnergyLevel> {
        match self.model {
            ForceModel::TransformedZh { h } => Some(h),
            _ => self.clock.level(),
        }
    }

    pub fn position(&self, y: &[f64]) -> Vector {
        Vector::read(y, 0, self.n)
    }

    /// Second half of the state: velocity (Newtonian) or momentum (relativistic).
    pub fn conjugate(&self, y: &[f64]) -> Vector {
        Vector::read(y, self.n, self.n)
    }

    /// Coordinate velocity of a state.
    pub fn velocity(&self, y: &[f64]) -> Vector {
        let k = self.conjugate(y);
        match self.law {
            Law::Newtonian => k,
            Law::Relativistic => {
                k * (1.0 / (self.params.m * gamma_from_momentum(&k, &self.params)))
            }
        }
    }

    pub fn clock_value(&self, y: &[f64]) -> Option<f64> {
        match self.clock {
            Clock::None => None,
            _ => Some(y[2 * self.n]),
        }
    }

    pub fn phase_state(&self, t: f64, y: &[f64]) -> PhaseState {
        let x = self.position(y);
        let k = self.conjugate(y);
        match self.law {
            Law::Newtonian => PhaseState::with_velocity(t, x, k),
            Law::Relativistic => PhaseState::with_momentum(t, x, k),
        }
    }

    /// Builds a flat state; the clock slot is set to `clock` when the field carries one.
    pub fn flat_state(&self, x: &Vector, conjugate: &Vector, clock: f64) -> Result<Vec<f64>> {
        if x.dim() != self.n || conjugate.dim() != self.n {
            return Err(Error::invalid(
                "initial",
                format!("state vectors must have dimension {}", self.n),
            ));
        }
        let mut y = vec![0.0; self.dim()];
        x.write(&mut y, 0);
        conjugate.write(&mut y, self.n);
        if self.clock != Clock::None {
            y[2 * self.n] = clock;
        }
        Ok(y)
    }

    /// Radial velocity sign proxy `x · k` (`k` = velocity or momentum, both give the same sign).
    pub fn radial_indicator(&self, y: &[f64]) -> f64 {
        self.position(y).dot(&self.conjugate(y))
    }

    pub fn diagnostics(&self, y: &[f64], h: Option<EnergyLevel>) -> Result<SampleDiagnostics> {
        let x = self.position(y);
        let k = self.conjugate(y);
        let params = &self.params;
        let v_base = self.base.value(&x)?;
        let (energy, angular_momentum, gamma) = match self.law {
            Law::Relativistic => (
                relativistic_kinetic(&k, params) - v_base,
                x.wedge(&k),
                Some(gamma_from_momentum(&k, params)),
            ),
            Law::Newtonian => {
                let u = if Arc::ptr_eq(&self.force, &self.base) {
                    v_base
                } else {
                    self.force.value(&x)?
                };
                (
                    0.5 * params.m * k.norm_squared() - u,
                    x.wedge(&k).scale(params.m),
                    None,
                )
            }
        };
        let level = self.energy_level().or(match self.law {
            Law::Relativistic => h,
            Law::Newtonian => None,
        });
        let region = match self.model {
            ForceModel::CentralForce { .. } | ForceModel::ClassicalKepler => None,
            _ => level.map(|h| region_of_value(v_base, h, params)),
        };
        Ok(SampleDiagnostics {
            energy,
            angular_momentum,
            gamma,
            region,
            potential: v_base,
        })
    }
}

impl VectorField for FlowField {
    fn dim(&self) -> usize {
        2 * self.n + usize::from(self.clock != Clock::None)
    }

    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.n;
        let x = self.position(y);
        let k = self.conjugate(y);
        let (v, grad) = self.force.eval(&x)?;
        match self.law {
            Law::Newtonian => {
                k.write(dy, 0);
                (grad * (1.0 / self.params.m)).write(dy, n);
            }
            Law::Relativistic => {
                (k * (1.0 / (self.params.m * gamma_from_momentum(&k, &self.params)))).write(dy, 0);
                grad.write(dy, n);
            }
        }
        if self.clock != Clock::None {
            let v_base = if Arc::ptr_eq(&self.force, &self.base) {
                v
            } else {
                self.base.value(&x)?
            };
            dy[2 * n] = self.clock.rate(v_base, &self.params).unwrap_or(0.0);
        }
        Ok(())
    }

    fn radius(&self, y: &[f64]) -> Option<f64> {
        Some(self.position(y).norm())
    }
}
