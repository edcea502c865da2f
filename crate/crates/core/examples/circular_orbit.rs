//! Relativistic circular orbit: the radius, γ and energy stay fixed.

use std::sync::Arc;

use relkepler::dynamics::relativistic_field;
use relkepler::integrate::{integrate_until, IntegratorConfig, StopCondition};
use relkepler::model::{KeplerPotential, PhysicalParams};
use relkepler::vector::Vector;

fn main() -> relkepler::error::Result<()> {
    let params = PhysicalParams::default();
    // γ v² = α/(m r) at r = 1 gives v² = (√5 − 1)/2
    let v2 = (5.0f64.sqrt() - 1.0) / 2.0;
    let gamma = 1.0 / (1.0 - v2).sqrt();
    let field = relativistic_field(params, Arc::new(KeplerPotential::new(&params)), 2)?;
    let p = Vector::new2(0.0, gamma * v2.sqrt());
    let y0 = field.flat_state(&Vector::new2(1.0, 0.0), &p, 0.0)?;

    let run = integrate_until(
        &field,
        &y0,
        (0.0, 1e3),
        &IntegratorConfig::default(),
        StopCondition::Revolutions(10.0),
    )?;
    let (traj, report) = run.into_result()?;
    let radius_spread = traj
        .samples
        .iter()
        .map(|s| (field.position(&s.y).norm() - 1.0).abs())
        .fold(0.0, f64::max);
    println!(
        "h = {:.12}  (γ − 2 = {:.12})",
        report.energy_initial,
        gamma - 2.0
    );
    println!("period 2π/ω = {:.9}", traj.t_end() / 10.0);
    println!("max |r − 1| = {radius_spread:.2e}");
    println!(
        "energy drift {:.2e}, L drift {:.2e}",
        report.energy_drift_rel, report.angular_momentum_drift_rel
    );
    Ok(())
}
