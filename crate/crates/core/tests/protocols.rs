use postsel::capacities::oneshot_quantum_bounds;
use postsel::channels::zoo::depolarizing;
use postsel::hermkernel::max_entangled;
use postsel::projective::iomega_channel;
use postsel::protocols::{
    build_pea_supermap, build_pna_achiever, build_teleport, check_nonsignalling, conditional_error_classical,
    conditional_error_quantum, conditional_fidelity, superdense_lift, teleport_error_bound, Direction, PEATriple,
    TeleportProtocol,
};
use postsel::random::{density_matrix, rng};
use postsel::{Channel, Error};

#[test]
fn teleport_bound_dominates_simulated_error() {
    let mut r = rng(40);
    for k in 0..6 {
        let n = Channel::random(2, 2, 4, &mut r);
        let res = iomega_channel(&n, 1e-6, 1e-9).unwrap();
        let proto = TeleportProtocol::from_dual(&n, 2, &res.dual, 1e-7).unwrap();
        let bound = teleport_error_bound(&n, &proto).unwrap();
        let out = build_teleport(&n, &proto).unwrap().apply(&n).unwrap();
        let est = conditional_error_quantum(&out, 2, k).unwrap();
        assert!(est.me_value <= bound + 1e-8, "instance {k}: {} > {bound}", est.me_value);
        assert!(est.heuristic_worst <= bound + 1e-6, "instance {k}: {} > {bound}", est.heuristic_worst);
    }
}

#[test]
fn superdense_lift_sends_squared_message_count() {
    let n = depolarizing(0.3).unwrap();
    let res = iomega_channel(&n, 1e-6, 1e-9).unwrap();
    let theta = build_teleport(&n, &TeleportProtocol::from_dual(&n, 2, &res.dual, 1e-7).unwrap()).unwrap();
    let lifted = superdense_lift(&theta).unwrap();
    assert_eq!((lifted.d_m(), lifted.d_mhat()), (4, 4));
    let classical = conditional_error_classical(&lifted.apply(&n).unwrap()).unwrap();
    let quantum = conditional_error_quantum(&theta.apply(&n).unwrap(), 1, 0).unwrap().me_value;
    assert!((classical - quantum).abs() < 1e-9);
}

#[test]
fn achievability_over_a_grid() {
    for p in [0.3, 0.5, 0.7] {
        let n = depolarizing(p).unwrap();
        let res = iomega_channel(&n, 1e-6, 1e-9).unwrap();
        for eps in [0.3, 0.5] {
            let (ql, _) = oneshot_quantum_bounds(res.lower, eps).unwrap();
            let d_m = ql.ratio().round() as usize;
            if d_m < 2 {
                continue;
            }
            let proto = TeleportProtocol::from_dual(&n, d_m, &res.dual, 1e-7).unwrap();
            let bound = teleport_error_bound(&n, &proto).unwrap();
            assert!(bound <= eps + 1e-6, "p {p} eps {eps} d_M {d_m}: bound {bound}");
            let primal = res.primal.as_ref().unwrap();
            let ach = build_pna_achiever(&n, d_m, eps, &res.dual, primal).unwrap();
            let out = ach.supermap.apply(&n).unwrap();
            let err = 1.0 - conditional_fidelity(&out, &max_entangled(d_m)).unwrap();
            assert!(err <= eps + 1e-6, "p {p} eps {eps}: nonsignalling code error {err}");
        }
    }
}

#[test]
fn converse_rejects_one_message_too_many() {
    for p in [0.3, 0.5, 0.7] {
        let n = depolarizing(p).unwrap();
        let res = iomega_channel(&n, 1e-6, 1e-9).unwrap();
        let primal = res.primal.as_ref().unwrap();
        for eps in [0.3, 0.5] {
            let (_, qu) = oneshot_quantum_bounds(res.upper, eps).unwrap();
            let d_m = qu.ratio().round() as usize + 1;
            let got = build_pna_achiever(&n, d_m, eps, &res.dual, primal);
            assert!(matches!(got, Err(Error::InfeasibleRate { .. })), "p {p} eps {eps} d_M {d_m}");
        }
    }
}

#[test]
fn random_assisted_codes_do_not_signal_to_bob() {
    let mut r = rng(77);
    for _ in 0..4 {
        let gamma = density_matrix(4, 4, &mut r);
        let encoder = Channel::random(4, 2, 2, &mut r);
        let decoder = Channel::random(4, 2, 2, &mut r).as_subchannel().scaled(0.7).unwrap();
        let triple = PEATriple::new(gamma, 2, 2, encoder, decoder).unwrap();
        let theta = build_pea_supermap(&triple).unwrap();
        assert!(check_nonsignalling(&theta, Direction::AliceToBob, 10, 1).unwrap() <= 1e-9);
    }
}
