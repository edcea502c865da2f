//! Release from rest at r = 1: the run stops at the origin guard with its last state.

use std::sync::Arc;

use relkepler::dynamics::relativistic_field;
use relkepler::integrate::{integrate, IntegratorConfig};
use relkepler::model::{
    relativistic_energy, KeplerPotential, PhaseState, PhysicalParams, Potential,
};
use relkepler::vector::Vector;

fn main() -> relkepler::error::Result<()> {
    let params = PhysicalParams::default();
    let potential: Arc<dyn Potential> = Arc::new(KeplerPotential::new(&params));
    let start = PhaseState::with_velocity(0.0, Vector::new2(1.0, 0.0), Vector::new2(0.0, 0.0));
    println!(
        "h = {}",
        relativistic_energy(&start, &params, potential.as_ref())?
    );

    let field = relativistic_field(params, potential, 2)?;
    let y0 = field.flat_state(&start.x, &Vector::new2(0.0, 0.0), 0.0)?;
    let cfg = IntegratorConfig {
        r_min: 1e-6,
        ..IntegratorConfig::default()
    };
    let run = integrate(&field, &y0, (0.0, 10.0), &cfg)?;
    match &run.error {
        Some(e) => {
            let last = e.last_state().unwrap();
            println!("{}: {e}", e.kind());
            println!(
                "last state t = {:.9}, x = {:.3e}, p = {:.3e}",
                last.t, last.y[0], last.y[2]
            );
        }
        None => println!("completed"),
    }
    println!("{} samples kept", run.trajectory.len());
    Ok(())
}
