//! Nonsignalling-assisted constructions: the flagged normalization of a
//! nonsignalling supermap and the measure-and-prepare code that attains the
//! projective mutual information rate.

use crate::channels::{choi_to_kraus, kraus_gram, BipartiteSubchannelChoi, Channel, Subchannel, Supermap};
use crate::divergences::{check_eps, dmax_states};
use crate::error::{Error, Result};
use crate::hermkernel::{
    c, hermitize, identity, kron, max_eig, max_entangled, max_entangled_vector, min_eig, permutation_matrix, psd_part,
    psd_sqrt, unit, unit_rect, ComplexMatrix, PSD_TOL,
};
use crate::projective::{validate_channel_dual, DualCertificate, PrimalCertificate};
use crate::random::rng;

use super::checks::{check_nonsignalling, Direction};

/// Largest Alice-to-Bob signalling accepted by [`pna_normalize`].
pub const NS_TOL: f64 = 1e-8;

/// `Ξ` with a flag qubit appended to `M̂`, the flag-1 projection, and the scale `c`.
#[derive(Debug, Clone)]
pub struct PnaNormalization {
    pub xi: Supermap,
    pub d_flag: Subchannel,
    pub c: f64,
}

/// Writes a nonsignalling supermap as the flag-1 branch of a superchannel.
///
/// With `Υ` the completely depolarizing supermap and `c = d_M d_M̂ d_A d_B`,
/// `Λ = Υ − Θ/c` is a supermap and `Ξ = Λ ⊗ |0⟩⟨0| + (Θ/c) ⊗ |1⟩⟨1|` is deterministic,
/// so `Θ = c · D_flag ∘ Ξ`.
pub fn pna_normalize(theta: &Supermap) -> Result<PnaNormalization> {
    let v = check_nonsignalling(theta, Direction::AliceToBob, 0, 0)?;
    if v > NS_TOL {
        return Err(Error::NotNonsignalling(v));
    }
    let bp = theta.to_bipartite();
    let [d_m, d_b, d_a, d_mhat] = bp.dims();
    let scale = (d_m * d_mhat * d_a * d_b) as f64;
    let upsilon = Supermap::completely_depolarizing(d_m, d_a, d_b, d_mhat).to_bipartite();
    let lambda = upsilon.combine(1.0, &bp, -1.0 / scale)?;
    let low = min_eig(&lambda.choi)?;
    if low < -PSD_TOL {
        return Err(Error::AdmissibilityFailure(format!("complement Choi has eigenvalue {low:e}")));
    }
    let choi = kron(&lambda.choi, &unit(2, 0, 0)) + kron(&(&bp.choi / c(scale, 0.0)), &unit(2, 1, 1));
    let flagged = BipartiteSubchannelChoi { choi: hermitize(&choi), d_m, d_b, d_a, d_mhat: 2 * d_mhat };
    let xi = Supermap::from_bipartite(&flagged)?;

    let mut r = rng(0x5eed);
    for _ in 0..5 {
        let n = Channel::random(d_a, d_b, d_a * d_b, &mut r);
        let t = xi.apply(&n)?.choi().trace().re;
        if (t - 1.0).abs() > 1e-8 {
            return Err(Error::AdmissibilityFailure(format!("flagged supermap has success probability {t}")));
        }
    }
    let d_flag = Subchannel::from_kraus(vec![kron(&identity(d_mhat), &unit_rect(1, 2, 0, 1))], 2 * d_mhat, d_mhat)?;
    Ok(PnaNormalization { xi, d_flag, c: scale })
}

/// Constants of the measure-and-prepare code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AchieverScaling {
    /// Target error actually used, slightly below the requested one.
    pub eps_prime: f64,
    /// `Φ^N ≤ λ Φ^{R^σ}`.
    pub lambda: f64,
    /// `Φ^{R^σ} ≤ μ Φ^N`.
    pub mu: f64,
    /// Weight with `r T ≤ λ C` and `C ≤ μ r T`.
    pub r: f64,
    /// `Tr[PΦ^N] / Tr[QΦ^N]` of the dual certificate.
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct Achiever {
    pub supermap: Supermap,
    /// `None` when the requested error is so large that discarding the input already meets it.
    pub scaling: Option<AchieverScaling>,
}

/// Nonsignalling-assisted code for `d_M`-dimensional quantum messages with conditional
/// error at most `eps`, built from a dual and a primal certificate of `I_Ω(N)`.
///
/// Alice's side feeds half of `Φ_{RA}` into the channel and keeps the message. Bob
/// measures `{P̃, Q̃}` (the dual pair scaled so `P̃ + Q̃ ≤ I`) on `R B` and applies
/// `rT − C/μ` or `λC − rT` to the message, with `C` the completely depolarizing channel and
/// `T = (1−ε′) id + ε′/(d_M²−1) (d_M² C − id)`.
pub fn build_pna_achiever(
    n: &Channel,
    d_m: usize,
    eps: f64,
    dual: &DualCertificate,
    primal: &PrimalCertificate,
) -> Result<Achiever> {
    check_eps(eps)?;
    let (d_a, d_b) = (n.d_in(), n.d_out());
    let msgs = (d_m * d_m) as f64;
    let ratio = validate_channel_dual(n, dual, PSD_TOL)?
        .ok_or_else(|| Error::FeasibilityFailure("dual certificate does not validate".into()))?;
    if !ratio.is_finite() {
        return Err(Error::FeasibilityFailure("achiever needs a finite dual ratio".into()));
    }
    let ratio = ratio.ratio();
    let threshold = eps / (1.0 - eps) * ratio + 1.0;
    if msgs >= threshold {
        return Err(Error::InfeasibleRate { dm_sq: msgs, threshold });
    }
    if eps > (msgs - 1.0) / msgs {
        let supermap = Supermap::completely_depolarizing(d_m, d_a, d_b, d_m);
        return Ok(Achiever { supermap, scaling: None });
    }

    let eps_min = (msgs - 1.0) / (ratio + msgs - 1.0);
    let eps_prime = eps - (0.01f64).min((eps - eps_min) / 2.0);

    let s_tr = primal.s.trace().re;
    let phi_rep = kron(&(identity(d_a) / c(d_a as f64, 0.0)), &(&primal.s / c(s_tr, 0.0)));
    let lambda = dmax_states(n.choi(), &phi_rep)?.ratio();
    let mu = dmax_states(&phi_rep, n.choi())?.ratio();
    if !(lambda.is_finite() && mu.is_finite()) {
        return Err(Error::FeasibilityFailure("primal certificate does not sandwich the channel".into()));
    }

    let others = msgs - 1.0;
    let t_choi = max_entangled(d_m) * c(1.0 - eps_prime - eps_prime / others, 0.0)
        + identity(d_m * d_m) * c(eps_prime / others, 0.0);
    let c_choi = identity(d_m * d_m) / c(msgs, 0.0);
    // generalized eigenvalues of T against C = I/d_M²
    let g = &t_choi * c(msgs, 0.0);
    let hi = lambda / max_eig(&g)?;
    let lo = 1.0 / (mu * min_eig(&g)?);
    if lo > hi * (1.0 + 1e-9) {
        return Err(Error::EmptyScalingInterval { lo, hi });
    }
    let r = hi;
    let prep_q = &c_choi * c(lambda, 0.0) - &t_choi * c(r, 0.0);
    let prep_p = &t_choi * c(r, 0.0) - &c_choi * c(1.0 / mu, 0.0);
    let tol = 1e-9 * lambda.max(1.0);
    // rT ≤ λC and C ≤ μrT, checked spectrally
    for m in [&prep_q, &(&prep_p * c(mu, 0.0))] {
        if min_eig(&hermitize(m))? < -tol {
            return Err(Error::EmptyScalingInterval { lo, hi });
        }
    }

    let pq = max_eig(&hermitize(&(&dual.p + &dual.q)))?.max(1.0);
    let p_meas = psd_sqrt(&(psd_part(&dual.p)? / c(pq, 0.0)))?;
    let q_meas = psd_sqrt(&(psd_part(&dual.q)? / c(pq, 0.0)))?;
    let kp = choi_to_kraus(&psd_part(&prep_p)?, d_m, d_m)?;
    let kq = choi_to_kraus(&psd_part(&prep_q)?, d_m, d_m)?;
    let norm = max_eig(&kraus_gram(&kp))?.max(max_eig(&kraus_gram(&kq))?).max(f64::MIN_POSITIVE);
    let shrink = c(norm.sqrt().recip(), 0.0);

    // pre: M → A ⊗ (R ⊗ M), attaching Φ_RA
    let phi = ComplexMatrix::from_column_slice(d_a * d_a, 1, max_entangled_vector(d_a).as_slice());
    let swap_ra = permutation_matrix(&[d_a, d_a, d_m], &[1, 0, 2])?;
    let pre = Channel::from_kraus(vec![swap_ra * kron(&phi, &identity(d_m))], d_m, d_a * d_a * d_m)?;

    // post: (B, R, M) → M̂, measuring on R B and preparing on M
    let swap_br = permutation_matrix(&[d_b, d_a, d_m], &[1, 0, 2])?;
    let mut post = Vec::new();
    for (meas, ks) in [(&p_meas, &kp), (&q_meas, &kq)] {
        for j in 0..d_a * d_b {
            let row = meas.rows(j, 1).into_owned();
            for k in ks.iter() {
                post.push(kron(&row, &(k * shrink)) * &swap_br);
            }
        }
    }
    let post = Subchannel::from_kraus(post, d_b * d_a * d_m, d_m)?;
    let supermap = Supermap::new(pre, post, d_a, d_b)?;
    Ok(Achiever { supermap, scaling: Some(AchieverScaling { eps_prime, lambda, mu, r, ratio }) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::zoo::depolarizing;
    use crate::hermkernel::max_abs_diff;
    use crate::projective::{improve_dual, iomega_channel};
    use crate::protocols::{
        build_teleport, check_replacement_preserving, conditional_fidelity, random_pure_input, TeleportProtocol,
    };

    #[test]
    fn depolarizing_supermap_normalizes() {
        let theta = Supermap::completely_depolarizing(2, 2, 2, 2);
        let norm = pna_normalize(&theta).unwrap();
        assert_eq!(norm.c, 16.0);
        let n = depolarizing(0.2).unwrap();
        let back = norm.xi.then_post(&norm.d_flag).unwrap().apply(&n).unwrap();
        let want = theta.apply(&n).unwrap().choi() / c(16.0, 0.0);
        assert!(max_abs_diff(back.choi(), &want) < 1e-10);
    }

    #[test]
    fn teleport_round_trip() {
        let n = depolarizing(0.5).unwrap();
        let proto = TeleportProtocol::from_dual(&n, 2, &improve_dual(&n, 1).unwrap(), 1e-7).unwrap();
        let theta = build_teleport(&n, &proto).unwrap();
        let norm = pna_normalize(&theta).unwrap();
        let flagged = norm.xi.then_post(&norm.d_flag).unwrap();
        let mut r = rng(9);
        for _ in 0..5 {
            let m = Channel::random(2, 2, 3, &mut r);
            let got = flagged.apply(&m).unwrap().choi() * c(norm.c, 0.0);
            assert!(max_abs_diff(&got, theta.apply(&m).unwrap().choi()) < 1e-8);
        }
    }

    #[test]
    fn signalling_supermap_is_rejected() {
        let theta = crate::protocols::build_pea_supermap(&crate::protocols::ctc_counterexample(2).unwrap()).unwrap();
        // Alice-to-Bob nonsignalling holds here; a routing supermap does not
        assert!(pna_normalize(&theta).is_ok());
        let pre = vec![kron(&unit_rect(2, 1, 0, 0), &identity(2))];
        let post: Vec<ComplexMatrix> = (0..2).map(|b| kron(&unit_rect(1, 2, 0, b), &identity(2))).collect();
        let routing = Supermap::new(
            Channel::from_kraus(pre, 2, 4).unwrap(),
            Subchannel::from_kraus(post, 4, 2).unwrap(),
            2,
            2,
        )
        .unwrap();
        assert!(matches!(pna_normalize(&routing), Err(Error::NotNonsignalling(_))));
    }

    #[test]
    fn achiever_meets_target_error() {
        let n = depolarizing(0.5).unwrap();
        let res = iomega_channel(&n, 1e-7, PSD_TOL).unwrap();
        let primal = res.primal.clone().unwrap();
        let ach = build_pna_achiever(&n, 2, 0.5, &res.dual, &primal).unwrap();
        assert!(ach.scaling.is_some());
        let fit = check_replacement_preserving(&ach.supermap, 5, 1).unwrap();
        assert!(fit.violation < 1e-8, "{}", fit.violation);
        let out = ach.supermap.apply(&n).unwrap();
        assert!(1.0 - conditional_fidelity(&out, &max_entangled(2)).unwrap() <= 0.5 + 1e-6);
        let mut r = rng(4);
        for _ in 0..20 {
            let psi = random_pure_input(2, 2, &mut r);
            assert!(1.0 - conditional_fidelity(&out, &psi).unwrap() <= 0.5 + 1e-6);
        }
    }

    #[test]
    fn large_error_takes_trivial_branch() {
        let n = depolarizing(0.9).unwrap();
        let res = iomega_channel(&n, 1e-6, PSD_TOL).unwrap();
        let ach = build_pna_achiever(&n, 2, 0.8, &res.dual, res.primal.as_ref().unwrap()).unwrap();
        assert!(ach.scaling.is_none());
        let out = ach.supermap.apply(&n).unwrap();
        let mut r = rng(5);
        for _ in 0..10 {
            assert!(conditional_fidelity(&out, &random_pure_input(2, 2, &mut r)).unwrap() >= 0.2 - 1e-12);
        }
    }

    #[test]
    fn infeasible_rate_is_refused() {
        let n = depolarizing(0.5).unwrap();
        let res = iomega_channel(&n, 1e-6, PSD_TOL).unwrap();
        let err = build_pna_achiever(&n, 3, 0.3, &res.dual, res.primal.as_ref().unwrap()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleRate { .. }));
    }
}
