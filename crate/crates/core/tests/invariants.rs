use std::sync::Arc;

use proptest::prelude::*;

use relkepler::dynamics::{
    relativistic_acceleration, relativistic_field, transformed_field, VectorField,
};
use relkepler::model::{
    classify_region, EnergyLevel, KeplerPotential, PhysicalParams, Potential, Region,
    TransformedPotential,
};
use relkepler::vector::{Vector, Wedge};

fn params() -> impl Strategy<Value = PhysicalParams> {
    (0.5..2.0f64, 0.5..2.0f64, 0.5..2.0f64, 0.5..5.0f64)
        .prop_map(|(g, big_m, m, c)| PhysicalParams::new(g, big_m, m, c).unwrap())
}

fn point() -> impl Strategy<Value = Vector> {
    (0.2..5.0f64, 0.0..std::f64::consts::TAU, -1.0..1.0f64).prop_map(|(r, phi, u)| {
        let s = (1.0 - u * u).sqrt();
        Vector::new3(r * s * phi.cos(), r * s * phi.sin(), r * u)
    })
}

fn kepler(p: &PhysicalParams) -> Arc<dyn Potential> {
    Arc::new(KeplerPotential::new(p))
}

fn central_difference(f: &dyn Potential, x: &Vector) -> Vector {
    let step = 1e-5 * x.norm();
    let mut g = [0.0; 3];
    for (i, slot) in g.iter_mut().enumerate() {
        let mut e = [0.0; 3];
        e[i] = step;
        let e = Vector::new3(e[0], e[1], e[2]);
        *slot = (f.value(&(*x + e)).unwrap() - f.value(&(*x + -e)).unwrap()) / (2.0 * step);
    }
    Vector::new3(g[0], g[1], g[2])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kepler_gradient_matches_differences(p in params(), x in point()) {
        let v = kepler(&p);
        let g = v.gradient(&x).unwrap();
        prop_assert!((central_difference(v.as_ref(), &x) - g).norm() <= 1e-6 * g.norm());
    }

    #[test]
    fn transformed_gradient_matches_differences(p in params(), x in point(), h in -0.9..0.9f64) {
        let z = TransformedPotential::new(kepler(&p), EnergyLevel(h * p.rest_energy()), p);
        let g = z.gradient(&x).unwrap();
        prop_assert!((central_difference(&z, &x) - g).norm() <= 1e-6 * g.norm());
    }

    #[test]
    fn transformed_gradient_scales_base_gradient(p in params(), x in point(), h in -3.0..1.0f64) {
        let v = kepler(&p);
        let h = EnergyLevel(h * p.rest_energy());
        let z = TransformedPotential::new(v.clone(), h, p);
        let (value, grad) = v.eval(&x).unwrap();
        let expected = grad * (1.0 + (value + h.0) / p.rest_energy());
        prop_assert!((z.gradient(&x).unwrap() - expected).norm() <= 1e-14 * expected.norm().max(1e-300));
    }

    #[test]
    fn regions_partition_space(p in params(), x in point(), h in -5.0..1.0f64) {
        let v = kepler(&p);
        let h = EnergyLevel(h * p.rest_energy());
        let shifted = v.value(&x).unwrap() + h.0;
        let region = classify_region(&x, h, &p, v.as_ref()).unwrap();
        let omega = shifted >= 0.0;
        let sigma = shifted + 2.0 * p.rest_energy() <= 0.0;
        prop_assert!(!(omega && sigma));
        let expected = if omega { Region::OmegaH } else if sigma { Region::SigmaH } else { Region::Forbidden };
        prop_assert_eq!(region, expected);
    }

    #[test]
    fn momentum_and_velocity_forms_agree(p in params(), x in point(), q in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64)) {
        let field = relativistic_field(p, kepler(&p), 3).unwrap();
        let mom = Vector::new3(q.0, q.1, q.2) * p.m;
        let y = field.flat_state(&x, &mom, 0.0).unwrap();
        let mut dy = vec![0.0; 6];
        field.eval(0.0, &y, &mut dy).unwrap();
        let force = Vector::from_slice(&dy[3..]).unwrap();
        let velocity = |m: Vector| {
            let yy = field.flat_state(&x, &m, 0.0).unwrap();
            field.velocity(&yy)
        };
        let d = 1e-6;
        let fd = (velocity(mom + force * d) - velocity(mom + force * -d)) * (1.0 / (2.0 * d));
        let v = velocity(mom);
        let a = relativistic_acceleration(&v, &kepler(&p).gradient(&x).unwrap(), &p).unwrap();
        prop_assert!((fd - a).norm() <= 1e-6 * a.norm().max(1e-12));
        prop_assert!(v.norm() < p.c);
    }

    #[test]
    fn angular_momentum_is_stationary(p in params(), x in point(), q in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), h in -0.5..0.5f64) {
        let k = Vector::new3(q.0, q.1, q.2);
        for field in [
            relativistic_field(p, kepler(&p), 3).unwrap(),
            transformed_field(p, EnergyLevel(h), kepler(&p), 3).unwrap(),
        ] {
            let y = field.flat_state(&x, &k, 0.0).unwrap();
            let mut dy = vec![0.0; 6];
            field.eval(0.0, &y, &mut dy).unwrap();
            let xdot = Vector::from_slice(&dy[..3]).unwrap();
            let kdot = Vector::from_slice(&dy[3..]).unwrap();
            let lhs = xdot.wedge(&k);
            let rhs = x.wedge(&kdot);
            let scale = xdot.norm() * k.norm() + x.norm() * kdot.norm();
            let total = match (lhs, rhs) {
                (Wedge::Vector(a), Wedge::Vector(b)) => {
                    Vector::new3(a[0] + b[0], a[1] + b[1], a[2] + b[2]).norm()
                }
                _ => f64::NAN,
            };
            prop_assert!(total <= 1e-14 * scale.max(1e-300));
        }
    }
}
