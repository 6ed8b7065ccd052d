use proptest::prelude::*;
use qwave_core::*;
use std::cell::Cell;

fn covariant(center: [f64; 2], radial: Vec<f64>, tangential: Vec<f64>) -> impl Fn([f64; 2]) -> Vec<f64> {
    move |x| {
        let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
        let r = dx.hypot(dy);
        let poly = |c: &[f64]| c.iter().rev().fold(0.0, |acc, k| acc * r + k);
        let (f, g) = (poly(&radial), poly(&tangential));
        vec![(f * dx - g * dy) / r, (f * dy + g * dx) / r]
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn circuit_reproduces_the_direct_state(
        log_a in 1u32..5,
        radial in prop::collection::vec(-1.0f64..1.0, 1..5),
        tangential in prop::collection::vec(-1.0f64..1.0, 1..5),
        cx in -1.0f64..1.0,
        step in 0.05f64..1.0,
    ) {
        let a = 1usize << log_a;
        let spec = PolarGridSpec::planar(a, [cx, 0.5], step);
        let field = covariant(spec.center, radial, tangential);
        let calls = Cell::new(0usize);
        let counted = |x: [f64; 2]| { calls.set(calls.get() + 1); field(x) };
        let ray = match sample_reference_ray(counted, &spec) {
            Ok(r) => r,
            Err(Error::ZeroNorm) => return Ok(()),
            Err(e) => panic!("{e:?}"),
        };
        prop_assert_eq!(calls.get(), a);
        prop_assert_eq!(ray.evaluations, a);
        let circuit = build_circuit(&spec).unwrap();
        let psi = simulate_circuit(&circuit, &ray).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() <= 1e-12);
        let direct = direct_state(&field, &spec).unwrap();
        prop_assert!(1.0 - fidelity(&psi, &direct).unwrap() <= 1e-10);
        // Same normalization: Theta * N' equals N for covariant fields.
        prop_assert!((psi.scale() - direct.scale()).abs() <= 1e-10 * direct.scale());
    }
}

#[test]
fn angular_magnitudes_are_uniform() {
    let spec = PolarGridSpec::planar(8, [0.0, 0.0], 0.1);
    let field = covariant(spec.center, vec![0.3, 1.0], vec![-0.2, 0.5]);
    let psi = simulate_circuit(&build_circuit(&spec).unwrap(), &sample_reference_ray(&field, &spec).unwrap()).unwrap();
    for a in 0..8 {
        let mag = |k| (0..2).map(|c| psi.amplitudes()[spec.index(c, a, k)].norm_sqr()).sum::<f64>();
        for k in 1..8 {
            assert!((mag(k) - mag(0)).abs() < 1e-14);
        }
    }
}

#[test]
fn scalar_channels_ride_along() {
    // Components: (vx, vy, pressure, pad); only the first plane rotates.
    let spec = PolarGridSpec { components: 4, ..PolarGridSpec::planar(4, [0.0, 0.0], 0.5) };
    let field = |x: [f64; 2]| {
        let r = x[0].hypot(x[1]);
        vec![x[0] / r, x[1] / r, (-r).exp(), 0.0]
    };
    let psi = simulate_circuit(&build_circuit(&spec).unwrap(), &sample_reference_ray(field, &spec).unwrap()).unwrap();
    let direct = direct_state(field, &spec).unwrap();
    assert!(1.0 - fidelity(&psi, &direct).unwrap() < 1e-12);
}

#[test]
fn non_covariant_fields_are_detected() {
    let spec = PolarGridSpec::planar(4, [0.0, 0.0], 0.5);
    let uniform = |_: [f64; 2]| vec![1.0, 0.0];
    assert!(covariance_defect(uniform, &spec).unwrap() > 1e-3);
    let outward = covariant(spec.center, vec![1.0], vec![0.0]);
    assert!(covariance_defect(outward, &spec).unwrap() < 1e-12);
}

#[test]
fn minimum_angle_halves_with_each_angular_qubit() {
    let angles: Vec<f64> =
        [2, 4, 8, 16].iter().map(|&a| build_circuit(&PolarGridSpec::planar(a, [0.0; 2], 1.0)).unwrap().min_angle()).collect();
    for w in angles.windows(2) {
        assert_eq!(w[0], 2.0 * w[1]);
    }
}
