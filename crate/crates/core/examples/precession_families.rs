//! Perihelion advance of the three coefficient families at c = 1000.

use relkepler::analytic::{
    binet_parameters, precession_schwarzschild_leading, precession_special_relativity_leading,
};
use relkepler::cli::measure_precession;
use relkepler::integrate::IntegratorConfig;
use relkepler::model::{coefficients_for, EnergyLevel, Family, PhysicalParams};

fn main() -> relkepler::error::Result<()> {
    let params = PhysicalParams::with_c(1e3)?;
    let l = 0.1;
    let cfg = IntegratorConfig::adaptive(1e-12, 1e-14);
    let mut sr = 0.0;
    for family in [
        Family::SpecialRelativity,
        Family::LeviCivita,
        Family::Schwarzschild,
    ] {
        let c = coefficients_for(family, EnergyLevel(0.0), Some(l), &params)?;
        let measured = measure_precession(c, params, l, 0.5, 10, &cfg)?.mean;
        let analytic = match family {
            Family::Schwarzschild => precession_schwarzschild_leading(&params, l),
            _ => binet_parameters(&c, l, params.m)?.precession(),
        };
        if family == Family::SpecialRelativity {
            sr = measured;
        }
        println!(
            "{family:>18}: measured {measured:.6e}, analytic {analytic:.6e}, ÷ SR {:.4}",
            measured / sr
        );
    }
    println!(
        "leading order πε for SR: {:.6e}",
        precession_special_relativity_leading(&params, l)
    );
    Ok(())
}
