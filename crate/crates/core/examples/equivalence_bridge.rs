//! Relativistic orbit and transformed Newtonian orbit related by the energy-dependent clock.

use std::sync::Arc;

use relkepler::integrate::IntegratorConfig;
use relkepler::model::{EnergyLevel, KeplerPotential, PhaseState, PhysicalParams, Potential};
use relkepler::reparam::{
    matched_transformed_state, verify_equivalence, verify_equivalence_backward, BridgeOptions,
};
use relkepler::vector::Vector;

fn main() -> relkepler::error::Result<()> {
    let params = PhysicalParams::default();
    let potential: Arc<dyn Potential> = Arc::new(KeplerPotential::new(&params));
    let h = EnergyLevel(-0.3);
    let y0 = PhaseState::with_momentum(
        0.0,
        Vector::new2(2.0, 0.0),
        Vector::new2(0.08f64.sqrt(), 0.6),
    );
    let cfg = IntegratorConfig::default();
    let options = BridgeOptions::default();

    let forward = verify_equivalence(params, potential.clone(), h, &y0, &options, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&forward).unwrap());

    let z0 = matched_transformed_state(&params, potential.as_ref(), h, &y0)?;
    let backward = verify_equivalence_backward(params, potential, h, &z0, &options, &cfg)?;
    println!(
        "backward: sup gap {:.2e}, energy gap {:.2e}, speed identity {:.2e}, pass {}",
        backward.sup_position_gap, backward.energy_gap, backward.speed_identity_gap, backward.pass
    );
    Ok(())
}
