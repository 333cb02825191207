//! Signalling and replacement-preservation checks on supermaps.

use crate::channels::{apply_choi, Channel, Supermap};
use crate::error::Result;
use crate::hermkernel::{c, identity, kron, max_abs, partial_trace, projector, trace_norm, unit, ComplexMatrix, ComplexVector};
use crate::random::{density_matrix, rng};

/// Which party's input is tested for influence on the other party's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Alice's message `M` must not affect Bob's view `M̂` of the bipartite map.
    AliceToBob,
    /// Bob's channel output `B` must not affect Alice's channel input `A`.
    BobToAlice,
}

/// States spanning the operator space on `C^d`: `|i⟩⟨i|` and the two superpositions of each pair.
pub fn spanning_states(d: usize) -> Vec<ComplexMatrix> {
    let mut out: Vec<ComplexMatrix> = (0..d).map(|i| unit(d, i, i)).collect();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in i + 1..d {
            for phase in [c(h, 0.0), c(0.0, h)] {
                let mut v = ComplexVector::zeros(d);
                v[i] = c(h, 0.0);
                v[j] = phase;
                out.push(projector(&v));
            }
        }
    }
    out
}

/// Largest trace distance between the receiving party's outputs as the sending
/// party's input varies, with the other input held fixed.
///
/// The map is linear, so comparing every spanning state against `|0⟩⟨0|`, for every
/// spanning state of the other input, decides exact nonsignalling; the `samples`
/// random triples are a redundancy check.
pub fn check_nonsignalling(theta: &Supermap, direction: Direction, samples: usize, seed: u64) -> Result<f64> {
    let bp = theta.to_bipartite();
    let [d_m, d_b, d_a, d_mhat] = bp.dims();
    // reduced map (M B) → receiving output, plus sender/holder dimensions
    let (reduced, d_out) = match direction {
        Direction::AliceToBob => (partial_trace(&bp.choi, &bp.dims(), &[0, 1, 3])?, d_mhat),
        Direction::BobToAlice => (partial_trace(&bp.choi, &bp.dims(), &[0, 1, 2])?, d_a),
    };
    let eval = |sender: &ComplexMatrix, other: &ComplexMatrix| -> Result<ComplexMatrix> {
        let x = match direction {
            Direction::AliceToBob => kron(sender, other),
            Direction::BobToAlice => kron(other, sender),
        };
        apply_choi(&reduced, d_m * d_b, d_out, &x)
    };
    let (d_send, d_other) = match direction {
        Direction::AliceToBob => (d_m, d_b),
        Direction::BobToAlice => (d_b, d_m),
    };
    let senders = spanning_states(d_send);
    let mut worst: f64 = 0.0;
    for other in spanning_states(d_other) {
        let base = eval(&senders[0], &other)?;
        for s in &senders[1..] {
            worst = worst.max(trace_norm(&(eval(s, &other)? - &base))?);
        }
    }
    let mut r = rng(seed);
    for _ in 0..samples {
        let rho = density_matrix(d_send, d_send, &mut r);
        let omega = density_matrix(d_send, d_send, &mut r);
        let other = density_matrix(d_other, d_other, &mut r);
        worst = worst.max(trace_norm(&(eval(&rho, &other)? - eval(&omega, &other)?))?);
    }
    Ok(worst)
}

/// Fit of `Θ{R^σ}` to `p · R^{σ′}` over sampled replacement channels.
#[derive(Debug, Clone)]
pub struct ReplacementFit {
    /// Largest entrywise residual of `J − (I/d_M) ⊗ Tr_M J`, relative to `p = Tr J`.
    pub violation: f64,
    /// Success probability for the maximally mixed replacement.
    pub p: f64,
    /// Output state `σ′` for the maximally mixed replacement.
    pub sigma_prime: ComplexMatrix,
}

/// Checks that `Θ` sends replacement channels to multiples of replacement channels.
///
/// Replacement states are `I/d_B`, each `|b⟩⟨b|`, and `trials` seeded random states.
/// The residual is relative to the success probability, so rescaling `Θ` leaves it unchanged.
pub fn check_replacement_preserving(theta: &Supermap, trials: usize, seed: u64) -> Result<ReplacementFit> {
    let (d_m, d_a, d_b) = (theta.d_m(), theta.d_a(), theta.d_b());
    let mut states = vec![identity(d_b) / c(d_b as f64, 0.0)];
    states.extend((0..d_b).map(|b| unit(d_b, b, b)));
    let mut r = rng(seed);
    states.extend((0..trials).map(|_| density_matrix(d_b, d_b, &mut r)));

    let mut fit: Option<(f64, ComplexMatrix)> = None;
    let mut violation: f64 = 0.0;
    for sigma in &states {
        let j = theta.apply(&Channel::replacement(sigma, d_a)?)?.choi().clone();
        let p = j.trace().re;
        let out = partial_trace(&j, &[d_m, theta.d_mhat()], &[1])?;
        if fit.is_none() {
            let sp = if p > 0.0 { &out / c(p, 0.0) } else { out.clone() };
            fit = Some((p, sp));
        }
        if p > super::INCONCLUSIVE_TOL {
            let model = kron(&(identity(d_m) / c(d_m as f64, 0.0)), &out);
            violation = violation.max(max_abs(&(j - model)) / p);
        }
    }
    let (p, sigma_prime) = fit.expect("at least one replacement state");
    Ok(ReplacementFit { violation, p, sigma_prime })
}

/// Both signalling directions together with the replacement fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NSCheckReport {
    pub a_to_b_violation: f64,
    pub b_to_a_violation: f64,
    pub replacement_preserving_violation: f64,
    /// Success probability `p` of the fit for the maximally mixed replacement.
    pub scale_c: f64,
}

pub fn ns_report(theta: &Supermap, samples: usize, seed: u64) -> Result<NSCheckReport> {
    let fit = check_replacement_preserving(theta, samples, seed)?;
    Ok(NSCheckReport {
        a_to_b_violation: check_nonsignalling(theta, Direction::AliceToBob, samples, seed)?,
        b_to_a_violation: check_nonsignalling(theta, Direction::BobToAlice, samples, seed)?,
        replacement_preserving_violation: fit.violation,
        scale_c: fit.p,
    })
}
