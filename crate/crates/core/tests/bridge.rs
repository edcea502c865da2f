use std::sync::Arc;

use relkepler::integrate::{IntegratorConfig, StopCondition};
use relkepler::model::{EnergyLevel, KeplerPotential, PhaseState, PhysicalParams, Potential};
use relkepler::reparam::{
    integrate_with_forward_clock, speed_squared_gap, transport_forward, verify_equivalence,
    BridgeOptions, ClockedTrajectory, EquivalenceReport, Grid,
};
use relkepler::vector::Vector;

fn setup() -> (PhysicalParams, Arc<dyn Potential>, EnergyLevel, PhaseState) {
    let params = PhysicalParams::default();
    let h = EnergyLevel(-0.2);
    // r = 3, L = 1.5
    let gamma: f64 = 1.0 + h.0 + 1.0 / 3.0;
    let pt = 0.5;
    let pr = (gamma * gamma - 1.0 - pt * pt).sqrt();
    let y0 = PhaseState::with_momentum(0.0, Vector::new2(3.0, 0.0), Vector::new2(pr, pt));
    (params, Arc::new(KeplerPotential::new(&params)), h, y0)
}

fn forward_run() -> ClockedTrajectory {
    let (params, v, h, y0) = setup();
    integrate_with_forward_clock(
        params,
        v,
        h,
        &y0,
        (0.0, 1e4),
        &IntegratorConfig::default(),
        StopCondition::Revolutions(3.0),
    )
    .unwrap()
}

#[test]
fn speed_squared_identity_along_relativistic_run() {
    let (_, v, h, _) = setup();
    let run = forward_run();
    assert!(speed_squared_gap(&run.base, h, v).unwrap() < 1e-8);
}

#[test]
fn transport_moves_time_only() {
    let run = forward_run();
    let z = transport_forward(&run, Grid::Points(500)).unwrap();
    let n = z.field.space_dim();
    for s in &z.samples {
        // the clock slot of the transported curve holds physical time
        let t = s.y[2 * n];
        let original = run.state_at(t).unwrap();
        let gap = (z.field.position(&s.y) - run.base.field.position(&original)).norm();
        assert!(gap < 1e-12, "{gap}");
    }
    assert!(z.samples.windows(2).all(|w| w[1].y[2 * n] > w[0].y[2 * n]));
}

#[test]
fn inverse_clock_rates_bounded_below_by_one() {
    let run = forward_run();
    let z = transport_forward(&run, Grid::Points(200)).unwrap();
    let n = z.field.space_dim();
    assert!(z.samples.iter().all(|s| s.dy[2 * n] >= 1.0));
}

#[test]
fn equivalence_report_round_trips() {
    let (params, v, h, y0) = setup();
    let report = verify_equivalence(
        params,
        v,
        h,
        &y0,
        &BridgeOptions {
            orbits: 2.0,
            ..Default::default()
        },
        &IntegratorConfig::default(),
    )
    .unwrap();
    assert!(report.pass, "{report:?}");
    let text = serde_json::to_string(&report).unwrap();
    let back: EquivalenceReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
}
