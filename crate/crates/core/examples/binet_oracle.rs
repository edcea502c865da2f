//! Closed-form precessing conic against the integrated ℓ = 4 orbit.

use relkepler::analytic::{conic_state, fit_conic, orbit_radius};
use relkepler::dynamics::central_force_field_from;
use relkepler::integrate::{integrate_until, IntegratorConfig, StopCondition};
use relkepler::model::{Coefficients, PhysicalParams};

fn main() -> relkepler::error::Result<()> {
    let params = PhysicalParams::default();
    let coefficients = Coefficients::new(4, 1.0, 0.19)?;
    let l = 1.0;

    let guess = fit_conic(
        &coefficients,
        params.m,
        &relkepler::vector::Vector::new2(1.0, 0.0),
        &relkepler::vector::Vector::new2(0.0, 1.0),
    )?;
    let (x, v) = conic_state(&guess, l, params.m, 0.3)?;
    let conic = fit_conic(&coefficients, params.m, &x, &v)?;
    println!("k = {:.9}, p = {:.9}, e = {:.9}", conic.k, conic.p, conic.e);

    let field = central_force_field_from(coefficients, params, 2)?;
    let y0 = field.flat_state(&x, &v, 0.0)?;
    let (traj, _) = integrate_until(
        &field,
        &y0,
        (0.0, 1e3),
        &IntegratorConfig::default(),
        StopCondition::Revolutions(5.0),
    )?
    .into_result()?;
    let mut worst: f64 = 0.0;
    for (s, theta) in traj.samples.iter().zip(&traj.angles) {
        let r = field.position(&s.y).norm();
        worst = worst.max((r - orbit_radius(&conic, x.angle() + theta - traj.angles[0])?).abs());
    }
    println!("max |r(θ) − p/(1 + e cos k(θ − θ0))| over 5 revolutions: {worst:.2e}");
    Ok(())
}
