//! Energy, angular momentum and confinement over 100 orbits.

use std::sync::Arc;

use relkepler::dynamics::relativistic_field;
use relkepler::integrate::{integrate_until, IntegratorConfig, StopCondition};
use relkepler::model::{KeplerPotential, PhysicalParams, Potential};
use relkepler::vector::Vector;

fn main() -> relkepler::error::Result<()> {
    let params = PhysicalParams::default();
    let potential: Arc<dyn Potential> = Arc::new(KeplerPotential::new(&params));
    let field = relativistic_field(params, potential.clone(), 2)?;
    let cfg = IntegratorConfig::adaptive(1e-10, 1e-12);

    for (h, r0, l) in [(-0.1, 5.0, 2.0), (-0.2, 3.0, 1.5), (-0.3, 2.0, 1.2)] {
        let gamma: f64 = 1.0 + h + 1.0 / r0;
        let pt = l / r0;
        let p = Vector::new2((gamma * gamma - 1.0 - pt * pt).sqrt(), pt);
        let y0 = field.flat_state(&Vector::new2(r0, 0.0), &p, 0.0)?;
        let (traj, report) = integrate_until(
            &field,
            &y0,
            (0.0, 1e6),
            &cfg,
            StopCondition::Revolutions(100.0),
        )?
        .into_result()?;
        let mut confinement = f64::INFINITY;
        for s in &traj.samples {
            confinement = confinement.min(potential.value(&field.position(&s.y))? + h);
        }
        println!(
            "h = {h:5}, L = {l}: energy drift {:.2e}, L drift {:.2e}, min V + h = {confinement:.3e}, {} steps",
            report.energy_drift_rel, report.angular_momentum_drift_rel, report.steps_taken
        );
    }
    Ok(())
}
