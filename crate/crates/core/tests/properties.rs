//! Randomized invariants across the public API.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zcrit::bundle::{
    gauge_act, random_algebra_element, random_tangent, z_critical_residual, BundleModel,
    ConnectionState, GaugeElement,
};
use zcrit::charge::{
    builtin_charge, evaluate_charge, phase, Coefficient, ManifoldChargeTerm, ModelTopology,
    BUILTIN_NAMES,
};
use zcrit::kgeom::{Cp1Geometry, GeometryBackend, TorusGeometry};
use zcrit::moment::check_moment_linearity;
use zcrit::zkahler::z_tilde_manifold;

fn topology_for(name: &str, n: usize) -> ModelTopology {
    let topo = ModelTopology::unit_torus(n);
    match name {
        "dhym" | "hym" => topo
            .with_bundle(1, vec![Ratio::from_integer(1); n])
            .unwrap(),
        _ => topo,
    }
}

fn wrap(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn charge_is_additive_over_terms(idx in 0usize..4, n in 1usize..=3, cut in 0usize..4) {
        let spec = builtin_charge(BUILTIN_NAMES[idx], n).unwrap();
        let topo = topology_for(BUILTIN_NAMES[idx], n);
        let at = cut.min(spec.term_count());
        let (a, b) = spec.split(at);
        let whole = evaluate_charge(&spec, &topo).unwrap();
        let parts = (
            evaluate_charge(&a, &topo).unwrap_or_else(|_| zero()),
            evaluate_charge(&b, &topo).unwrap_or_else(|_| zero()),
        );
        prop_assert_eq!(whole.exact.unwrap(), parts.0.exact.unwrap() + parts.1.exact.unwrap());
    }

    #[test]
    fn phase_follows_rotation(idx in 0usize..4, n in 1usize..=2, scale in 0.1f64..10.0, psi in -3.0f64..3.0) {
        let spec = builtin_charge(BUILTIN_NAMES[idx], n).unwrap();
        let topo = topology_for(BUILTIN_NAMES[idx], n);
        let z = evaluate_charge(&spec, &topo).unwrap().value;
        prop_assume!(z.norm() > 1e-9);
        let base = phase(z).unwrap();
        let scaled = evaluate_charge(&spec.scaled(&Coefficient::from_f64(scale, 0.0)), &topo).unwrap().value;
        prop_assert!((phase(scaled).unwrap() - base).abs() < 1e-12);
        let rot = Complex64::from_polar(1.0, psi);
        let rotated = evaluate_charge(&spec.scaled(&Coefficient::from_f64(rot.re, rot.im)), &topo).unwrap().value;
        prop_assert!((phase(rotated).unwrap() - wrap(base + psi)).abs() < 1e-9);
    }

    #[test]
    fn term_degree_must_match(n in 1usize..=3, j in 0usize..5, ks in proptest::collection::vec(1usize..4, 0..4)) {
        let total = j + ks.iter().sum::<usize>();
        let built = ManifoldChargeTerm::new(Coefficient::int(1, 0), j, ks.clone(), n);
        prop_assert_eq!(built.is_ok(), total == n && ks.len() <= n);
    }
}

fn zero() -> zcrit::charge::ChargeValue {
    zcrit::charge::ChargeValue {
        value: Complex64::new(0.0, 0.0),
        exact: Some(num_complex::Complex::new(
            Ratio::from_integer(0),
            Ratio::from_integer(0),
        )),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn integral_of_z_tilde_is_topological_on_t2(seed in any::<u64>(), fraction in 0.05f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let geom = TorusGeometry::random(1, 32, vec![Ratio::from_integer(1)], fraction, &mut rng).unwrap();
        for name in ["csck", "exp"] {
            let spec = builtin_charge(name, 1).unwrap();
            let eval = z_tilde_manifold(&geom, &spec).unwrap();
            let total = geom.integrate(&eval.z_tilde);
            prop_assert!((total - eval.charge.value).norm() < 1e-10 * eval.charge.value.norm().max(1.0));
        }
    }

    #[test]
    fn cp1_hamiltonian_and_futaki(seed in any::<u64>(), fraction in 0.05f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let geom = Cp1Geometry::random(64, fraction, &mut rng).unwrap();
        let action = geom.hamiltonian_for_rotation().unwrap();
        prop_assert!(action.self_check < 1e-10);
        let mean: f64 = geom.integrate_real(&action.hamiltonian);
        prop_assert!(mean.abs() < 1e-12);
        let values = zcrit::moment::futaki_values(&[geom], zcrit::moment::FutakiWeight::Hamiltonian).unwrap();
        prop_assert!(values[0].abs() < 1e-8);
    }

    #[test]
    fn residual_trace_is_gauge_invariant(seed in any::<u64>(), rank in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Arc::new(TorusGeometry::flat(1, 32).unwrap());
        let model = Arc::new(BundleModel::new(base, rank, vec![Ratio::from_integer(1)]).unwrap());
        let conn = ConnectionState::new(model.clone(), random_tangent(&model, 0.3, &mut rng)).unwrap();
        let e = random_algebra_element(&model, 0.5, &mut rng);
        let moved = gauge_act(&GaugeElement::exp(&e, 1.0).unwrap(), &conn).unwrap();
        let spec = builtin_charge("dhym", 1).unwrap();
        let before = z_critical_residual(&conn, &spec).unwrap().trace();
        let after = z_critical_residual(&moved, &spec).unwrap().trace();
        prop_assert!(after.sub(&before).unwrap().sup_norm() < 1e-8 * before.sup_norm().max(1.0));
    }

    #[test]
    fn moment_pairing_is_linear(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Arc::new(TorusGeometry::random(1, 16, vec![Ratio::from_integer(1)], 0.2, &mut rng).unwrap());
        let model = Arc::new(BundleModel::new(base, 2, vec![Ratio::from_integer(1)]).unwrap());
        let conn = ConnectionState::new(model.clone(), random_tangent(&model, 0.3, &mut rng)).unwrap();
        let e1 = random_algebra_element(&model, 1.0, &mut rng);
        let e2 = random_algebra_element(&model, 1.0, &mut rng);
        for name in ["hym", "dhym"] {
            let spec = builtin_charge(name, 1).unwrap();
            prop_assert!(check_moment_linearity(&conn, &e1, &e2, &spec, 1e-12).unwrap().pass);
        }
    }
}
