//! Simulated networks through the distribution and witness layers.

use approx::assert_abs_diff_eq;
use fnn_core::dist::Scenario;
use fnn_core::qsim::{simulate_bilocal, simulate_star, simulate_star_factorized, StarStrategy};
use fnn_core::witness::{
    builtin_fnn_bilocal, builtin_fnn_star, condition_on_ghz_success, evaluate_from_b0_data, BilocalWitness,
};
use proptest::prelude::*;

fn ideal() -> StarStrategy {
    StarStrategy::new(-1.865, -0.415)
}

#[test]
fn ghz_success_is_one_eighth_everywhere() {
    let d = simulate_star(&ideal()).unwrap();
    let s = Scenario::star();
    for x in 0..s.num_joint_inputs() {
        let p0: f64 = (0..s.num_joint_outputs()).filter(|o| o % 2 == 0).map(|o| d.table()[s.index(x, o)]).sum();
        assert_abs_diff_eq!(p0, 0.125, epsilon = 1e-12);
    }
}

#[test]
fn branches_are_independent() {
    let d = simulate_star(&ideal()).unwrap();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        for xi in 0..2 {
            for xj in 0..2 {
                assert!(d.mutual_information(i, j, xi, xj).unwrap() <= 1e-12);
            }
        }
    }
}

#[test]
fn three_witnesses_agree_at_symmetric_angles() {
    let d = simulate_star(&ideal()).unwrap();
    for i in 1..=3 {
        assert_abs_diff_eq!(builtin_fnn_star(i).unwrap().value(&d).unwrap(), 0.1859, epsilon = 5e-4);
    }
}

#[test]
fn bilocal_values() {
    let d = simulate_bilocal().unwrap();
    for kind in [BilocalWitness::ClassicalNs, BilocalWitness::NsClassical] {
        assert_abs_diff_eq!(builtin_fnn_bilocal(kind).value(&d).unwrap(), 5.0 / 2f64.sqrt(), epsilon = 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn b0_reduction_identity(
        t0 in -3.2f64..3.2, t1 in -3.2f64..3.2, p0 in -3.2f64..3.2, p1 in -3.2f64..3.2,
        v in prop::array::uniform3(0.0f64..=1.0),
    ) {
        let d = simulate_star(&StarStrategy::new(t0, t1).with_phi(p0, p1).with_visibilities(v)).unwrap();
        let (b0, p) = condition_on_ghz_success(&d).unwrap();
        for i in 1..=3 {
            let full = builtin_fnn_star(i).unwrap().value(&d).unwrap();
            prop_assert!((evaluate_from_b0_data(i, &b0, p).unwrap() - full).abs() <= 1e-12);
        }
    }

    #[test]
    fn factorized_simulation_matches(t0 in -3.2f64..3.2, t1 in -3.2f64..3.2, v in 0.0f64..=1.0) {
        let s = StarStrategy::new(t0, t1).with_phi(0.3, -1.1).with_visibility(v);
        let a = simulate_star(&s).unwrap();
        let b = simulate_star_factorized(&s).unwrap();
        for (x, y) in a.table().iter().zip(b.table()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}
