//! The forward clock ζ(t) and its inverse t(s) on a Kepler orbit.

use std::sync::Arc;

use relkepler::integrate::{IntegratorConfig, StopCondition};
use relkepler::model::{EnergyLevel, KeplerPotential, PhaseState, PhysicalParams, Potential};
use relkepler::reparam::{
    integrate_with_forward_clock, integrate_with_inverse_clock, matched_transformed_state,
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
    let cfg = IntegratorConfig::adaptive(1e-12, 1e-14);

    let zeta = integrate_with_forward_clock(
        params,
        potential.clone(),
        h,
        &y0,
        (0.0, 60.0),
        &cfg,
        StopCondition::AtEnd,
    )?;
    let rates = zeta.clock_rate();
    let (lo, hi) = rates
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(*r), b.max(*r)));
    println!(
        "ζ(60) = {:.12}, dζ/dt in [{lo:.4}, {hi:.4}]",
        zeta.clock_span()
    );

    let z0 = matched_transformed_state(&params, potential.as_ref(), h, &y0)?;
    let span = (0.0, zeta.clock_span());
    let eta =
        integrate_with_inverse_clock(params, potential, h, &z0, span, &cfg, StopCondition::AtEnd)?;
    println!("t(ζ(60)) = {:.12}", eta.clock_span());

    for t in [10.0, 20.0, 40.0] {
        let s = zeta.clock_at(t)?;
        println!(
            "t = {t:4}: ζ = {s:.9}, t(ζ) − t = {:.2e}",
            eta.clock_at(s)? - t
        );
    }
    Ok(())
}
