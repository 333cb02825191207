use postsel::capacities::{oneshot_classical_bounds, oneshot_quantum_bounds, CapacityReport};
use postsel::channels::zoo::depolarizing;
use postsel::divergences::{dmax_states, domega_states, dph_closed};
use postsel::hermkernel::{c, max_entangled, ComplexMatrix};
use postsel::projective::iomega_channel;
use postsel::protocols::{conditional_error_classical, conditional_fidelity, random_pure_input};
use postsel::random::{density_matrix, rng};
use postsel::{Bits, Channel};
use proptest::prelude::*;

fn states(seed: u64, d: usize) -> (ComplexMatrix, ComplexMatrix) {
    let mut r = rng(seed);
    (density_matrix(d, d, &mut r), density_matrix(d, d, &mut r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projective_divergence_ignores_scale(seed in any::<u64>(), a in 0.01f64..100.0, b in 0.01f64..100.0) {
        let (rho, sigma) = states(seed, 3);
        let base = domega_states(&rho, &sigma).unwrap().0;
        let scaled = domega_states(&(&rho * c(a, 0.0)), &(&sigma * c(b, 0.0))).unwrap().0;
        prop_assert!((base - scaled).abs() < 1e-8);
        prop_assert!(base >= -1e-12);
    }

    #[test]
    fn dmax_shifts_by_log_of_scale(seed in any::<u64>(), a in 0.01f64..100.0) {
        let (rho, sigma) = states(seed, 2);
        let base = dmax_states(&rho, &sigma).unwrap().0;
        let scaled = dmax_states(&(&rho * c(a, 0.0)), &sigma).unwrap().0;
        prop_assert!((scaled - base - a.log2()).abs() < 1e-8);
        prop_assert!(base >= -1e-12, "normalized states have nonnegative D_max");
    }

    #[test]
    fn dph_grows_with_eps(seed in any::<u64>(), e1 in 0.01f64..0.98, de in 0.0f64..0.01) {
        let (rho, sigma) = states(seed, 2);
        let lo = dph_closed(&rho, &sigma, e1).unwrap().0;
        let hi = dph_closed(&rho, &sigma, e1 + de).unwrap().0;
        prop_assert!(hi >= lo - 1e-12);
    }

    #[test]
    fn capacity_bounds_are_ordered_and_monotone(i in 0.0f64..12.0, di in 0.0f64..2.0, e in 0.01f64..0.9, de in 0.0f64..0.09) {
        let (ql, qu) = oneshot_quantum_bounds(Bits(i), e).unwrap();
        let (cl, cu) = oneshot_classical_bounds(Bits(i), e).unwrap();
        prop_assert!(ql.0 <= qu.0 && cl.0 <= cu.0);
        prop_assert!(cl.0 == 2.0 * ql.0);
        for (i2, e2) in [(i + di, e), (i, e + de)] {
            let (ql2, qu2) = oneshot_quantum_bounds(Bits(i2), e2).unwrap();
            let (cl2, cu2) = oneshot_classical_bounds(Bits(i2), e2).unwrap();
            prop_assert!(ql2.0 >= ql.0 && qu2.0 >= qu.0 && cl2.0 >= cl.0 && cu2.0 >= cu.0);
        }
    }

    #[test]
    fn report_matches_single_point_bounds(i in 0.0f64..8.0, e in 0.01f64..0.99) {
        let r = CapacityReport::from_bracket(Bits(i), Bits(i), e).unwrap();
        let (ql, qu) = oneshot_quantum_bounds(Bits(i), e).unwrap();
        prop_assert_eq!((r.q_lower_bits, r.q_upper_bits), (ql, qu));
        prop_assert!((r.asymptotic_q_bits.0 * 2.0 - r.asymptotic_c_bits.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conditional_metrics_ignore_success_scale(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = Channel::random(2, 2, 3, &mut r);
        let psi = random_pure_input(2, 2, &mut r);
        let base = n.as_subchannel();
        let e0 = conditional_error_classical(&base).unwrap();
        let f0 = conditional_fidelity(&base, &psi).unwrap();
        for s in [0.1, 0.5, 1.0] {
            let sub = base.scaled(s).unwrap();
            prop_assert!((conditional_error_classical(&sub).unwrap() - e0).abs() < 1e-10);
            prop_assert!((conditional_fidelity(&sub, &psi).unwrap() - f0).abs() < 1e-10);
        }
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f0));
    }

    #[test]
    fn iomega_brackets_are_sound(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = Channel::random(2, 2, 4, &mut r);
        let res = iomega_channel(&n, 1e-6, 1e-9).unwrap();
        prop_assert!(res.finite);
        prop_assert!(res.lower.0 <= res.upper.0 + 1e-12);
        prop_assert!(res.gap() <= 1e-5);
        prop_assert!(res.lower.0 >= -1e-9);
    }
}

#[test]
fn depolarizing_iomega_decreases_with_noise() {
    let mut last = f64::INFINITY;
    for p in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
        let v = iomega_channel(&depolarizing(p).unwrap(), 1e-6, 1e-9).unwrap().estimate().0;
        assert!(v < last);
        last = v;
    }
    assert!(last.abs() < 1e-5);
}

#[test]
fn classical_error_of_identity_is_zero_and_fidelity_one() {
    let id = Channel::identity(3).as_subchannel();
    assert_eq!(conditional_error_classical(&id).unwrap(), 0.0);
    assert!((conditional_fidelity(&id, &max_entangled(3)).unwrap() - 1.0).abs() < 1e-12);
}
