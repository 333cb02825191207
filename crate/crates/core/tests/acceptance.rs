//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::time::{Duration, Instant};

use postsel::capacities::{asymptotic_sandwich_check, oneshot_classical_bounds, oneshot_quantum_bounds};
use postsel::channels::zoo::{amplitude_damping, bsc_embed, dephasing, depolarizing};
use postsel::divergences::{dph_closed, dph_search};
use postsel::hermkernel::{
    c, hermitize, identity, kron, max_abs, max_abs_diff, max_eig, max_entangled, min_eig,
    partial_trace,
};
use postsel::projective::{iomega_channel, iomega_finite, iomega_product, IomegaResult};
use postsel::protocols::{
    build_pea_supermap, build_pna_achiever, build_teleport, check_nonsignalling, check_replacement_preserving,
    conditional_error_quantum, conditional_fidelity, ctc_counterexample, pna_normalize, random_pure_input,
    teleport_error_bound, Direction, TeleportProtocol,
};
use postsel::random::{density_matrix, rng};
use postsel::{Bits, Channel};
use rand::Rng;

const GAP: f64 = 1e-6;
const TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Check = fn() -> Result<Outcome, postsel::Error>;

fn solve(n: &Channel) -> Result<IomegaResult, postsel::Error> {
    iomega_channel(n, GAP, TOL)
}

fn random_qubit_channel(r: &mut impl Rng) -> Channel {
    // four Kraus operators give a full-rank Choi matrix almost surely
    Channel::random(2, 2, 4, r)
}

fn closed_forms() -> Result<Outcome, postsel::Error> {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    let mut cases: Vec<(Channel, f64)> = Vec::new();
    for p in [0.3, 0.5, 0.8, 1.0] {
        cases.push((depolarizing(p)?, ((4.0 - 3.0 * p) / p).log2()));
    }
    cases.push((bsc_embed(0.1)?, 9f64.log2()));
    cases.push((bsc_embed(0.2)?, 2.0));
    for (n, want) in cases {
        let t = Instant::now();
        let res = solve(&n)?;
        slowest = slowest.max(t.elapsed());
        worst = worst.max((res.lower.0 - want).abs()).max((res.upper.0 - want).abs());
    }
    Ok(outcome(worst <= 1e-5 && slowest.as_secs_f64() <= 2.0, format!("max deviation {worst:.2e} bits, slowest {slowest:.2?}")))
}

/// Independent eigenvalue re-check of both certificates.
fn recheck(n: &Channel, res: &IomegaResult) -> Result<bool, postsel::Error> {
    let phi = n.choi();
    let (d_r, d_b) = (n.d_in(), n.d_out());
    let Some(primal) = &res.primal else { return Ok(false) };
    let ls = kron(&identity(d_r), &primal.s);
    let scale = max_eig(&ls)?.max(1.0);
    let lower_ok = min_eig(&hermitize(&(&ls - phi)))? >= -1e-8 * scale;
    let upper_ok = min_eig(&hermitize(&(phi * c(primal.xi, 0.0) - &ls)))? >= -1e-8 * scale * primal.xi;
    let (p, q) = (&res.dual.p, &res.dual.q);
    let dscale = max_abs(p).max(max_abs(q));
    let pq_ok = min_eig(p)? >= -1e-8 * dscale && min_eig(q)? >= -1e-8 * dscale;
    let marg = max_abs_diff(&partial_trace(p, &[d_r, d_b], &[1])?, &partial_trace(q, &[d_r, d_b], &[1])?);
    let ratio = (p * phi).trace().re / (q * phi).trace().re;
    let consistent = Bits::from_ratio(ratio).0 >= res.lower.0 - 1e-9 && primal.bits().0 <= res.upper.0 + 1e-9;
    Ok(lower_ok && upper_ok && pq_ok && marg <= 1e-7 * dscale && consistent)
}

fn duality_sandwich() -> Result<Outcome, postsel::Error> {
    let mut r = rng(2);
    let (mut validated, mut worst_gap, mut slowest) = (0, 0.0f64, Duration::ZERO);
    for _ in 0..50 {
        let n = random_qubit_channel(&mut r);
        let t = Instant::now();
        let res = solve(&n)?;
        slowest = slowest.max(t.elapsed());
        worst_gap = worst_gap.max(res.gap());
        if res.finite && recheck(&n, &res)? {
            validated += 1;
        }
    }
    Ok(outcome(
        validated == 50 && worst_gap <= 1e-5 && slowest.as_secs_f64() <= 10.0,
        format!("{validated}/50 re-validated, max gap {worst_gap:.2e} bits, slowest {slowest:.2?}"),
    ))
}

fn additivity() -> Result<Outcome, postsel::Error> {
    let mut r = rng(3);
    let mut pairs = vec![(depolarizing(0.5)?, depolarizing(0.8)?)];
    for _ in 0..10 {
        pairs.push((random_qubit_channel(&mut r), random_qubit_channel(&mut r)));
    }
    let (mut worst, mut slowest, mut depol_dev) = (0.0f64, Duration::ZERO, 0.0);
    for (k, (n, m)) in pairs.iter().enumerate() {
        let t = Instant::now();
        let a = solve(n)?.estimate().0;
        let b = solve(m)?.estimate().0;
        let joint = iomega_product(n, m, GAP)?.estimate().0;
        slowest = slowest.max(t.elapsed());
        worst = worst.max((joint - a - b).abs());
        if k == 0 {
            depol_dev = (joint - 10f64.log2()).abs();
        }
    }
    Ok(outcome(
        worst <= 3e-5 && depol_dev <= 3e-5 && slowest.as_secs_f64() <= 60.0,
        format!("max defect {worst:.2e} bits, depolarizing pair off log2(10) by {depol_dev:.2e}, slowest {slowest:.2?}"),
    ))
}

fn finiteness() -> Result<Outcome, postsel::Error> {
    let cases: Vec<(&str, Channel, bool)> = vec![
        ("identity", Channel::identity(2), false),
        ("dephasing(0.3)", dephasing(0.3)?, false),
        ("amplitude_damping(0.3)", amplitude_damping(0.3)?, false),
        ("depolarizing(0.1)", depolarizing(0.1)?, true),
        ("depolarizing(0.6)", depolarizing(0.6)?, true),
        ("bsc_embed(0.3)", bsc_embed(0.3)?, true),
        ("bsc_embed(0.9)", bsc_embed(0.9)?, true),
        ("replacement", Channel::replacement(&(identity(2) / c(2.0, 0.0)), 2)?, true),
    ];
    let mut wrong = Vec::new();
    for (name, n, finite) in &cases {
        if iomega_finite(n) != *finite || solve(n)?.finite != *finite {
            wrong.push(*name);
        }
    }
    Ok(outcome(wrong.is_empty(), format!("{} of {} classified correctly {wrong:?}", cases.len() - wrong.len(), cases.len())))
}

fn capacity_numbers() -> Result<Outcome, postsel::Error> {
    let log5 = Bits(5f64.log2());
    let q = oneshot_quantum_bounds(log5, 0.5)?;
    let cl = oneshot_classical_bounds(log5, 0.5)?;
    let zero = oneshot_quantum_bounds(Bits(0.0), 0.5)?;
    let pass = (q.0 .0, q.1 .0) == (1.0, 1.0)
        && cl.0 .0 == 2.0
        && cl.1 .0 == 6f64.log2()
        && (zero.0 .0, zero.1 .0) == (0.0, 0.0);
    Ok(outcome(pass, format!("Q {:?}, C {:?}, Q at zero {:?}", (q.0 .0, q.1 .0), (cl.0 .0, cl.1 .0), (zero.0 .0, zero.1 .0))))
}

fn achievability_loop() -> Result<Outcome, postsel::Error> {
    let n = depolarizing(0.5)?;
    let res = solve(&n)?;
    let proto = TeleportProtocol::from_dual(&n, 2, &res.dual, 1e-7)?;
    let (rp, rq) = proto.flag_overlaps(&n)?;
    let ratio = rp / rq;
    let bound = teleport_error_bound(&n, &proto)?;
    let formula = 1.0 / (ratio / 3.0 + 1.0);
    let out = build_teleport(&n, &proto)?.apply(&n)?;
    let me = conditional_error_quantum(&out, 1, 0)?.me_value;
    let primal = res.primal.as_ref().expect("finite value");
    let converse = matches!(
        build_pna_achiever(&n, 3, 0.5, &res.dual, primal),
        Err(postsel::Error::InfeasibleRate { .. })
    );
    let pass = ratio >= 5.0 - 1e-3
        && (bound - formula).abs() <= 1e-12
        && bound <= 0.375 + 1e-3
        && bound <= 0.5
        && me <= bound + 1e-9
        && converse;
    Ok(outcome(pass, format!("flag ratio {ratio:.6}, bound {bound:.6}, ME error {me:.6}, d_M = 3 rejected: {converse}")))
}

fn dph_validation() -> Result<Outcome, postsel::Error> {
    let mut r = rng(7);
    let (mut sound, mut close) = (0, 0);
    for k in 0..200 {
        let rho = density_matrix(2, 2, &mut r);
        let sigma = density_matrix(2, 2, &mut r);
        let eps = r.random_range(0.05..0.95);
        let closed = dph_closed(&rho, &sigma, eps)?.0;
        let found = dph_search(&rho, &sigma, eps, 200, 4, k)?.bits.0;
        if found <= closed + 1e-9 {
            sound += 1;
        }
        if closed - found <= 1e-3 {
            close += 1;
        }
    }
    let mut monotone = 0;
    for _ in 0..100 {
        let rho = density_matrix(2, 2, &mut r);
        let sigma = density_matrix(2, 2, &mut r);
        let n = Channel::random(2, 2, 2, &mut r);
        let eps = r.random_range(0.05..0.95);
        if dph_closed(&n.apply(&rho)?, &n.apply(&sigma)?, eps)?.0 <= dph_closed(&rho, &sigma, eps)?.0 + 1e-9 {
            monotone += 1;
        }
    }
    Ok(outcome(
        sound == 200 && close >= 180 && monotone == 100,
        format!("sound {sound}/200, within 1e-3 {close}/200, data processing {monotone}/100"),
    ))
}

fn pna_characterization() -> Result<Outcome, postsel::Error> {
    let n = depolarizing(0.5)?;
    let res = solve(&n)?;
    let theta = build_teleport(&n, &TeleportProtocol::from_dual(&n, 2, &res.dual, 1e-7)?)?;
    let ab = check_nonsignalling(&theta, Direction::AliceToBob, 20, 1)?;
    let rep = check_replacement_preserving(&theta, 20, 1)?.violation;
    let ctc = check_nonsignalling(&build_pea_supermap(&ctc_counterexample(2)?)?, Direction::BobToAlice, 20, 1)?;
    let norm = pna_normalize(&theta)?;
    let mut r = rng(11);
    let mut round_trip = 0.0f64;
    for _ in 0..5 {
        let m = Channel::random(2, 2, 2, &mut r);
        let direct = theta.apply(&m)?;
        let flagged = norm.d_flag.after(&norm.xi.apply(&m)?)?;
        round_trip = round_trip.max(max_abs_diff(&(direct.choi() / c(norm.c, 0.0)), flagged.choi()));
    }
    Ok(outcome(
        ab <= 1e-8 && rep <= 1e-8 && ctc >= 0.1 && round_trip <= 1e-8,
        format!("teleport A->B {ab:.1e}, replacement {rep:.1e}; counterexample B->A {ctc:.3}; normalization round trip {round_trip:.1e}"),
    ))
}

fn pna_achiever() -> Result<Outcome, postsel::Error> {
    let n = depolarizing(0.5)?;
    let res = solve(&n)?;
    let primal = res.primal.as_ref().expect("finite value");
    let ach = build_pna_achiever(&n, 2, 0.5, &res.dual, primal)?;
    let Some(sc) = ach.scaling else { return Ok(outcome(false, "trivial branch taken at eps = 0.5")) };

    // r T ≤ λ C and C ≤ μ r T, with T and C as Choi states of the message channels
    let d2 = 4.0;
    let w = sc.eps_prime / (d2 - 1.0);
    let t = max_entangled(2) * c(1.0 - sc.eps_prime - w, 0.0) + identity(4) * c(w, 0.0);
    let cc = identity(4) / c(d2, 0.0);
    let first = min_eig(&hermitize(&(&cc * c(sc.lambda, 0.0) - &t * c(sc.r, 0.0))))?;
    let second = min_eig(&hermitize(&(&t * c(sc.mu * sc.r, 0.0) - &cc)))?;
    let spectral = first >= -1e-10 && second >= -1e-10;

    let rep = check_replacement_preserving(&ach.supermap, 20, 3)?.violation;
    let out = ach.supermap.apply(&n)?;
    let mut r = rng(5);
    let mut worst = 1.0 - conditional_fidelity(&out, &max_entangled(2))?;
    for _ in 0..20 {
        worst = worst.max(1.0 - conditional_fidelity(&out, &random_pure_input(2, 2, &mut r))?);
    }
    let noisy = depolarizing(0.9)?;
    let noisy_res = solve(&noisy)?;
    let trivial = build_pna_achiever(&noisy, 2, 0.8, &noisy_res.dual, noisy_res.primal.as_ref().expect("finite"))?;
    let trivial_ok = trivial.scaling.is_none()
        && 1.0 - conditional_fidelity(&trivial.supermap.apply(&noisy)?, &max_entangled(2))? <= 0.8 + 1e-9;
    Ok(outcome(
        spectral && rep <= 1e-8 && worst <= 0.5 + 1e-6 && trivial_ok,
        format!(
            "scaling margins {first:.2e}, {second:.2e}; replacement {rep:.1e}; worst of 21 inputs {worst:.6}; trivial branch at 0.8 ok: {trivial_ok}"
        ),
    ))
}

fn asymptotic_sandwich() -> Result<Outcome, postsel::Error> {
    let n = depolarizing(0.5)?;
    let mut lines = Vec::new();
    let mut pass = true;
    for eps in [0.3, 0.5] {
        for blocks in [1, 2] {
            let s = asymptotic_sandwich_check(&n, eps, blocks, GAP)?;
            pass &= s.holds;
            lines.push(format!(
                "eps {eps} n {blocks}: {:.3} <= {:.3}, {:.3} <= {:.3}",
                s.floor_rate, s.c_lower_rate, s.c_upper_rate, s.ceiling_rate
            ));
        }
    }
    Ok(outcome(pass, lines.join("; ")))
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("closed-form values", closed_forms),
        ("duality sandwich", duality_sandwich),
        ("additivity", additivity),
        ("finiteness classification", finiteness),
        ("one-shot capacity numbers", capacity_numbers),
        ("teleportation achievability and converse", achievability_loop),
        ("postselected hypothesis testing", dph_validation),
        ("nonsignalling characterization", pna_characterization),
        ("nonsignalling achiever", pna_achiever),
        ("asymptotic sandwich", asymptotic_sandwich),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {:>2} {}: {name} ({:.2?}) {detail}", k + 1, if pass { "PASS" } else { "FAIL" }, t.elapsed());
    }
    let total = start.elapsed();
    println!("acceptance: {}/10 passed in {total:.2?}", 10 - failed);
    if failed > 0 || total.as_secs_f64() > 600.0 {
        std::process::exit(1);
    }
}
