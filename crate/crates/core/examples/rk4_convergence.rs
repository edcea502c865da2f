//! Fixed-step RK4 on half a Kepler ellipse; the error falls by 2⁴ per halving.

use std::f64::consts::PI;

use relkepler::dynamics::classical_kepler_field;
use relkepler::integrate::{integrate, IntegratorConfig};
use relkepler::model::PhysicalParams;
use relkepler::vector::Vector;

fn main() -> relkepler::error::Result<()> {
    let field = classical_kepler_field(PhysicalParams::default(), 2)?;
    // a = 1, e = 0.5: pericenter (0.5, 0) at speed √3, apocenter (−1.5, 0) at t = π
    let y0 = field.flat_state(
        &Vector::new2(0.5, 0.0),
        &Vector::new2(0.0, 3.0f64.sqrt()),
        0.0,
    )?;
    let mut previous: Option<f64> = None;
    for n in [100, 200, 400, 800, 1600] {
        let (traj, _) = integrate(
            &field,
            &y0,
            (0.0, PI),
            &IntegratorConfig::rk4(PI / n as f64),
        )?
        .into_result()?;
        let end = traj.samples.last().unwrap();
        let err = (field.position(&end.y) - Vector::new2(-1.5, 0.0)).norm();
        match previous {
            Some(p) => println!("n = {n:5}: error {err:.3e}, order {:.3}", (p / err).log2()),
            None => println!("n = {n:5}: error {err:.3e}"),
        }
        previous = Some(err);
    }
    Ok(())
}
