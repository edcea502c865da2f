//! Closed-form orbits of the ℓ = 4 family and leading-order precession rates.
//!
//! With `u = 1/r` as a function of the polar angle, `m ẍ = −α̂x/|x|³ − β̂x/|x|⁴`
//! becomes `u″ + (1 − mβ̂/L²) u = mα̂/L²`, so bounded orbits are precessing
//! conics `r(θ) = p / (1 + e cos(k(θ − θ0)))` with `k = √(1 − mβ̂/L²)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coefficients, PhysicalParams};
use crate::vector::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinetParameters {
    /// Apsidal frequency ratio.
    pub k: f64,
    /// Semi-latus rectum of the precessing conic.
    pub p: f64,
    /// `mβ̂/L²`, so that `k² = 1 − q`.
    pub q: f64,
}

impl BinetParameters {
    /// `2π(1/k − 1)` evaluated from `q` without cancellation near `k = 1`.
    pub fn precession(&self) -> f64 {
        let k = (1.0 - self.q).sqrt();
        TAU * self.q / (k * (1.0 + k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConicOrbit {
    pub k: f64,
    pub p: f64,
    pub e: f64,
    pub theta0: f64,
}

impl ConicOrbit {
    pub fn is_bounded(&self) -> bool {
        (0.0..1.0).contains(&self.e)
    }
}

/// `k` and `p` for an ℓ = 4 force law at angular momentum `angular_momentum`.
pub fn binet_parameters(
    coefficients: &Coefficients,
    angular_momentum: f64,
    m: f64,
) -> Result<BinetParameters> {
    if coefficients.ell != 4 {
        return Err(Error::invalid(
            "ell",
            "closed-form orbits exist only for ell = 4",
        ));
    }
    let l2 = angular_momentum * angular_momentum;
    let m_beta = m * coefficients.beta_hat;
    if l2 <= m_beta {
        return Err(Error::SpiralRegime {
            l_squared: l2,
            m_beta,
        });
    }
    let q = m_beta / l2;
    Ok(BinetParameters {
        k: (1.0 - q).sqrt(),
        p: (l2 - m_beta) / (m * coefficients.alpha_hat),
        q,
    })
}

/// Perihelion advance per radial period, `2π(1/k − 1)`.
pub fn apsidal_precession(k: f64) -> f64 {
    TAU * (1.0 / k - 1.0)
}

/// First-order Schwarzschild advance `6π G²M²m² / (c²L²)`.
pub fn precession_schwarzschild_leading(params: &PhysicalParams, angular_momentum: f64) -> f64 {
    6.0 * PI * weak_field_parameter(params, angular_momentum)
}

/// First-order advance of the special-relativistic family, `π G²M²m² / (c²L²)`.
pub fn precession_special_relativity_leading(
    params: &PhysicalParams,
    angular_momentum: f64,
) -> f64 {
    PI * weak_field_parameter(params, angular_momentum)
}

/// `G²M²m² / (c²L²)`.
pub fn weak_field_parameter(params: &PhysicalParams, angular_momentum: f64) -> f64 {
    let a = params.alpha() / (params.c * angular_momentum);
    a * a
}

pub fn orbit_radius(conic: &ConicOrbit, theta: f64) -> Result<f64> {
    let denominator = 1.0 + conic.e * (conic.k * (theta - conic.theta0)).cos();
    if denominator <= 0.0 {
        return Err(Error::Asymptote { denominator });
    }
    Ok(conic.p / denominator)
}

/// Fits `e` and `θ0` from a planar state `(x, ẋ)` of the ℓ = 4 Newtonian system.
pub fn fit_conic(
    coefficients: &Coefficients,
    m: f64,
    x: &Vector,
    v: &Vector,
) -> Result<ConicOrbit> {
    if x.dim() != 2 {
        return Err(Error::invalid("dim", "conic fit needs a planar state"));
    }
    let l = m * x.wedge(v).magnitude();
    let BinetParameters { k, p, .. } = binet_parameters(coefficients, l, m)?;
    let r = x.norm();
    let r_dot = x.dot(v) / r;
    let ec = p / r - 1.0;
    let es = p * m * r_dot / (k * l);
    let e = ec.hypot(es);
    let phase = if e == 0.0 { 0.0 } else { es.atan2(ec) / k };
    // along a retrograde orbit the angle decreases
    let theta = x.angle();
    let theta0 = if l >= 0.0 {
        theta - phase
    } else {
        theta + phase
    };
    Ok(ConicOrbit { k, p, e, theta0 })
}

/// Planar state on `conic` at polar angle `theta` (prograde, angular momentum `L > 0`).
pub fn conic_state(
    conic: &ConicOrbit,
    angular_momentum: f64,
    m: f64,
    theta: f64,
) -> Result<(Vector, Vector)> {
    let r = orbit_radius(conic, theta)?;
    let phi = conic.k * (theta - conic.theta0);
    let r_dot = angular_momentum / m * conic.e * conic.k / conic.p * phi.sin();
    let theta_dot = angular_momentum / (m * r * r);
    let (s, c) = theta.sin_cos();
    let x = Vector::new2(r * c, r * s);
    let v = Vector::new2(r_dot * c - r * theta_dot * s, r_dot * s + r * theta_dot * c);
    Ok((x, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{coefficients_for, EnergyLevel, Family};

    fn ell4(alpha_hat: f64, beta_hat: f64) -> Coefficients {
        Coefficients::new(4, alpha_hat, beta_hat).unwrap()
    }

    #[test]
    fn binet_examples() {
        let b = binet_parameters(&ell4(1.0, 0.19), 1.0, 1.0).unwrap();
        assert!((b.k - 0.9).abs() < 1e-15);
        assert!((b.p - 0.81).abs() < 1e-15);
        assert!((b.precession() - apsidal_precession(0.9)).abs() < 1e-14);
        let b = binet_parameters(&ell4(2.0, 0.0), 1.5, 1.0).unwrap();
        assert_eq!(b.k, 1.0);
        assert_eq!(b.p, 1.5 * 1.5 / 2.0);
        assert!(matches!(
            binet_parameters(&ell4(1.0, 1.0), 1.0, 1.0),
            Err(Error::SpiralRegime { .. })
        ));
        assert!(binet_parameters(&Coefficients::new(5, 1.0, 1.0).unwrap(), 1.0, 1.0).is_err());
    }

    #[test]
    fn precession_examples() {
        assert_eq!(apsidal_precession(1.0), 0.0);
        assert!((apsidal_precession(0.9) - 2.0 * PI / 9.0).abs() < 1e-15);
        assert!((apsidal_precession(0.9) - 0.698_131_7).abs() < 1e-7);
        for k in [0.1, 0.5, 0.99] {
            assert!(apsidal_precession(k) > 0.0);
        }
    }

    #[test]
    fn special_relativity_leading_order() {
        // exact 2π(1/k − 1) against π ε as c grows; the gap shrinks like ε²
        let mut prev = f64::INFINITY;
        for c in [1e2, 1e3, 1e4] {
            let params = PhysicalParams::with_c(c).unwrap();
            let coeffs =
                coefficients_for(Family::SpecialRelativity, EnergyLevel(0.0), None, &params)
                    .unwrap();
            let b = binet_parameters(&coeffs, 1.0, 1.0).unwrap();
            let exact = b.precession();
            let lead = precession_special_relativity_leading(&params, 1.0);
            let rel = (exact - lead).abs() / lead;
            assert!(rel < 2.0 * weak_field_parameter(&params, 1.0));
            assert!(rel < prev);
            prev = rel;
        }
    }

    #[test]
    fn schwarzschild_and_family_ratios() {
        let params = PhysicalParams::with_c(1e3).unwrap();
        let lead = precession_schwarzschild_leading(&params, 1.0);
        assert!((lead - 6.0 * PI * 1e-6).abs() < 1e-20);
        let sr = precession_special_relativity_leading(&params, 1.0);
        assert!((lead / sr - 6.0).abs() < 1e-12);
        let prec = |f| {
            let c = coefficients_for(f, EnergyLevel(0.0), None, &params).unwrap();
            binet_parameters(&c, 1.0, 1.0).unwrap().precession()
        };
        let ratio = prec(Family::LeviCivita) / prec(Family::SpecialRelativity);
        assert!((ratio - 6.0).abs() < 1e-4);
    }

    #[test]
    fn orbit_radius_examples() {
        let circle = ConicOrbit {
            k: 0.9,
            p: 1.3,
            e: 0.0,
            theta0: 0.2,
        };
        for th in [0.0, 1.0, 5.0] {
            assert_eq!(orbit_radius(&circle, th).unwrap(), 1.3);
        }
        let ell = ConicOrbit {
            k: 1.0,
            p: 1.0,
            e: 0.5,
            theta0: 0.4,
        };
        assert!((orbit_radius(&ell, 0.4).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        for th in [0.1, 1.0, 2.0, 3.0] {
            assert!(orbit_radius(&ell, th).unwrap() > orbit_radius(&ell, 0.4).unwrap());
        }
        let hyp = ConicOrbit {
            k: 1.0,
            p: 1.0,
            e: 2.0,
            theta0: 0.0,
        };
        assert!(matches!(
            orbit_radius(&hyp, PI),
            Err(Error::Asymptote { .. })
        ));
    }

    #[test]
    fn fit_recovers_conic() {
        let coeffs = ell4(1.0, 0.19);
        let b = binet_parameters(&coeffs, 1.0, 1.0).unwrap();
        let conic = ConicOrbit {
            k: b.k,
            p: b.p,
            e: 0.4,
            theta0: 0.7,
        };
        let (x, v) = conic_state(&conic, 1.0, 1.0, 2.1).unwrap();
        let fit = fit_conic(&coeffs, 1.0, &x, &v).unwrap();
        assert!((fit.e - 0.4).abs() < 1e-12);
        assert!((fit.theta0 - 0.7).abs() < 1e-12);
        assert!((fit.p - b.p).abs() < 1e-12);
    }
}
