use std::f64::consts::PI;

use kagome_core::circuit::apply_circuit;
use kagome_core::entanglement::{correlation_spectrum, free_many_body_es, schmidt_es};
use kagome_core::fock::{annihilation_residual, build_ground_state};
use kagome_core::peps::evaluate_peps_state;
use kagome_core::realspace::HexWeights;
use kagome_core::{build_lattice, Boundary, C64};
use proptest::prelude::*;

#[test]
fn peps_and_product_agree_for_c2t_weights() {
    let lat = build_lattice(2, 2, Boundary::Torus).unwrap();
    let half = [C64::new(0.3, 0.1), C64::new(-0.2, 0.4), C64::new(0.5, -0.1)];
    let raw = HexWeights::c2t_from_half(half);
    let beta = HexWeights::new(raw.0.map(|b| b / raw.norm())).unwrap();
    let fock = build_ground_state(&lat, Some(&beta)).unwrap();
    let peps = evaluate_peps_state(&lat, Some(&beta)).unwrap();
    assert!(fock.fidelity(&peps) > 1.0 - 1e-10);
    assert!(annihilation_residual(&lat, &fock, Some(&beta)).unwrap() < 1e-12);
}

#[test]
fn schmidt_and_free_entropies_match_on_2x4() {
    let lat = build_lattice(2, 4, Boundary::Torus).unwrap();
    let psi = build_ground_state(&lat, None).unwrap();
    let s = schmidt_es(&psi, &lat, 1, true).unwrap();
    let modes = correlation_spectrum(2, 4, 1).unwrap();
    assert!((s.entropy() - modes.entropy()).abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn correlation_eigenvalues_are_probabilities(l1 in 2usize..10, l2 in 2usize..7, frac in 0.0f64..1.0) {
        let cut = 1 + ((l1 - 1) as f64 * frac) as usize;
        let modes = correlation_spectrum(l1, l2, cut).unwrap();
        for (_, x) in modes.all() {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&x));
        }
        prop_assert_eq!(modes.mode_count(), 3 * cut * l2);
    }

    #[test]
    fn free_levels_are_sorted_and_bounded(l1 in 3usize..9, l2 in 2usize..5, eps_max in 2.0f64..10.0) {
        let modes = correlation_spectrum(l1, l2, l1 / 2).unwrap();
        let es = free_many_body_es(&modes, (2, 3), eps_max).unwrap();
        for w in es.levels.windows(2) {
            prop_assert!((w[0].k, w[0].epsilon) <= (w[1].k, w[1].epsilon));
        }
        for l in &es.levels {
            prop_assert!(l.epsilon <= eps_max + 1e-9);
            prop_assert!(2 * l.k.unsigned_abs() as usize <= l2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn circuit_keeps_schmidt_weights_normalised(alpha in -PI..PI) {
        let lat = build_lattice(2, 4, Boundary::Torus).unwrap();
        let base = build_ground_state(&lat, None).unwrap();
        let psi = apply_circuit(&lat, &base, alpha);
        prop_assert!((psi.norm() - base.norm()).abs() < 1e-12 * base.norm());
        let s = schmidt_es(&psi, &lat, 1, true).unwrap();
        prop_assert!((s.total() - 1.0).abs() < 1e-10);
    }
}
