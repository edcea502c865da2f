//! A transformed orbit in Σ_h maps to relativistic motion with energy h + 2mc².

use std::sync::Arc;

use relkepler::integrate::IntegratorConfig;
use relkepler::model::{
    classify_region, EnergyLevel, KeplerPotential, PhaseState, PhysicalParams, Potential,
};
use relkepler::reparam::{sigma_branch_check, BridgeOptions};
use relkepler::vector::Vector;

fn main() -> relkepler::error::Result<()> {
    let params = PhysicalParams::default();
    let potential: Arc<dyn Potential> = Arc::new(KeplerPotential::new(&params));
    let h = EnergyLevel(-3.0);
    // V(2) = 0.5 and Z_h + h = 0.625, so |z′|² = 1.25
    let z0 = PhaseState::with_velocity(0.0, Vector::new2(2.0, 0.0), Vector::new2(0.5, 1.0));
    println!(
        "start region: {}",
        classify_region(&z0.x, h, &params, potential.as_ref())?
    );

    let report = sigma_branch_check(
        params,
        potential,
        h,
        &z0,
        3.0,
        &BridgeOptions::default(),
        &IntegratorConfig::default(),
    )?;
    println!(
        "target energy {}, gap {:.2e}, transported vs direct sup gap {:.2e}",
        report.target_energy, report.energy_gap, report.sup_position_gap
    );
    Ok(())
}
