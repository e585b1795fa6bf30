mod common;

use common::{all_policies, enumerate_iterative, enumerate_pmf};
use finite_distill::bell::{success_probability, werner, BellDiagonalState};
use finite_distill::ensemble::survivor_pmf;
use finite_distill::iterative::expected_fidelity_exact;
use finite_distill::IterationPolicy;

#[test]
fn pmf_matches_pattern_enumeration() {
    let states = [
        werner(0.75).unwrap(),
        werner(0.55).unwrap(),
        BellDiagonalState::new(0.4, 0.1, 0.3, 0.2).unwrap(),
        BellDiagonalState::pure(),
    ];
    for s in &states {
        for n in (2..=12).step_by(2) {
            let lib = survivor_pmf(n, s).unwrap();
            let brute = enumerate_pmf(n, success_probability(s));
            assert_eq!(lib.pmf.len(), n / 2 + 1);
            for (x, y) in lib.pmf.iter().zip(&brute) {
                assert!((x - y).abs() < 1e-12, "n={n}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn exact_matches_enumeration_up_to_eight_pairs() {
    for (name, policy) in all_policies() {
        for a0 in [0.52, 0.6, 0.75, 0.9, 0.99] {
            let s0 = werner(a0).unwrap();
            for n in 1..=8 {
                let dp = expected_fidelity_exact(n, &s0, &policy).unwrap();
                let brute = enumerate_iterative(n, &s0, &policy);
                assert!((dp - brute).abs() < 1e-12, "{name} n={n} A0={a0}: {dp} vs {brute}");
            }
        }
    }
}

#[test]
fn exact_matches_enumeration_for_general_states() {
    let s0 = BellDiagonalState::new(0.62, 0.18, 0.12, 0.08).unwrap();
    for (name, policy) in all_policies() {
        for n in 1..=10 {
            let dp = expected_fidelity_exact(n, &s0, &policy).unwrap();
            let brute = enumerate_iterative(n, &s0, &policy);
            assert!((dp - brute).abs() < 1e-12, "{name} n={n}: {dp} vs {brute}");
        }
    }
}

#[test]
fn enumerated_spot_values() {
    let s0 = werner(0.75).unwrap();
    let policy = IterationPolicy::backup();
    let e = |n| enumerate_iterative(n, &s0, &policy);
    assert!((e(3) - 7.0 / 9.0).abs() < 1e-15);
    assert!((e(4) - 0.766203703704).abs() < 1e-12);
    assert!((e(5) - 0.820216049383).abs() < 1e-12);
}
