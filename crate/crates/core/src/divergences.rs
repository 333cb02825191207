//! Max-relative entropy, the Hilbert projective metric and postselected
//! hypothesis testing, all in bits with `+∞` for support mismatches.

use std::fmt;

use rand::Rng;

use crate::channels::Channel;
use crate::error::{Error, Result};
use crate::hermkernel::{
    c, hermitize, identity, max_eig, normalize, projector, pseudo_inv_sqrt, psd_spectrum, support_projector,
    ComplexMatrix, ComplexVector, RANK_TOL,
};
use crate::random::{pure_state, rng};

/// A quantity in bits, possibly `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Bits(pub f64);

impl Bits {
    pub const INF: Bits = Bits(f64::INFINITY);
    pub const ZERO: Bits = Bits(0.0);

    /// `log₂ x` (`x = ∞` gives `+∞`).
    pub fn from_ratio(x: f64) -> Self {
        Bits(x.log2())
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// `2^bits`.
    pub fn ratio(self) -> f64 {
        self.0.exp2()
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            write!(f, "+inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::ops::Add for Bits {
    type Output = Bits;
    fn add(self, rhs: Bits) -> Bits {
        Bits(self.0 + rhs.0)
    }
}

pub fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::EpsOutOfRange(eps));
    }
    Ok(())
}

/// Largest eigenvalue of `(I − Π_σ) ρ (I − Π_σ)` relative to `λ_max(ρ)`:
/// how much of `ρ` lies outside the support of `σ`.
fn support_leak(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    let out = identity(sigma.nrows()) - support_projector(sigma, RANK_TOL)?;
    let leak = max_eig(&hermitize(&(&out * rho * &out)))?;
    let scale = max_eig(rho)?;
    Ok(if scale > 0.0 { leak / scale } else { 0.0 })
}

/// `D_max(ρ‖σ) = log₂ λ_max(σ^{-1/2} ρ σ^{-1/2})`, or `+∞` if `supp ρ ⊄ supp σ`.
/// No normalization is applied to the arguments.
pub fn dmax_states(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<Bits> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch("dmax arguments differ in shape".into()));
    }
    psd_spectrum(rho)?;
    psd_spectrum(sigma)?;
    let leak = support_leak(rho, sigma)?;
    if leak > RANK_TOL {
        if leak < 10.0 * RANK_TOL {
            log::warn!("numerically ill-conditioned support comparison (leak {leak:e})");
        }
        return Ok(Bits::INF);
    }
    if leak > RANK_TOL / 10.0 {
        log::warn!("numerically ill-conditioned support comparison (leak {leak:e})");
    }
    let w = pseudo_inv_sqrt(sigma, RANK_TOL)?;
    let lam = max_eig(&hermitize(&(&w * rho * &w)))?;
    Ok(Bits::from_ratio(lam))
}

/// `D_max` between the Choi states of two channels.
pub fn dmax_channels(n: &Channel, m: &Channel) -> Result<Bits> {
    if n.d_in() != m.d_in() || n.d_out() != m.d_out() {
        return Err(Error::DimensionMismatch("channels differ in dimensions".into()));
    }
    dmax_states(n.choi(), m.choi())
}

/// Hilbert projective metric `D_max(ρ‖σ) + D_max(σ‖ρ)`.
pub fn domega_states(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<Bits> {
    let a = dmax_states(rho, sigma)?;
    if !a.is_finite() {
        return Ok(Bits::INF);
    }
    Ok(a + dmax_states(sigma, rho)?)
}

/// `log₂(ε/(1−ε) · 2^{D} + 1)` evaluated without overflow.
pub fn dph_from_domega(domega: Bits, eps: f64) -> Result<Bits> {
    check_eps(eps)?;
    if !domega.is_finite() {
        return Ok(Bits::INF);
    }
    let x = (eps / (1.0 - eps)).log2() + domega.0;
    // log₂(1 + 2^x)
    let v = if x > 50.0 { x + (-x).exp2().ln_1p() / std::f64::consts::LN_2 } else { x.exp2().ln_1p() / std::f64::consts::LN_2 };
    Ok(Bits(v))
}

/// Closed-form postselected hypothesis testing relative entropy.
pub fn dph_closed(rho: &ComplexMatrix, sigma: &ComplexMatrix, eps: f64) -> Result<Bits> {
    check_eps(eps)?;
    dph_from_domega(domega_states(rho, sigma)?, eps)
}

/// Conditional type-I error `Tr[Qρ]/Tr[(P+Q)ρ]`.
pub fn alpha_ph(rho: &ComplexMatrix, p: &ComplexMatrix, q: &ComplexMatrix) -> f64 {
    let num = (q * rho).trace().re;
    num / ((p + q) * rho).trace().re
}

/// Conditional type-II error `Tr[Pσ]/Tr[(P+Q)σ]`.
pub fn beta_ph(sigma: &ComplexMatrix, p: &ComplexMatrix, q: &ComplexMatrix) -> f64 {
    let num = (p * sigma).trace().re;
    num / ((p + q) * sigma).trace().re
}

/// Result of a variational search for the postselected test.
#[derive(Debug, Clone)]
pub struct DphSearch {
    /// `−log₂ β` of the best feasible pair found.
    pub bits: Bits,
    pub p: ComplexMatrix,
    pub q: ComplexMatrix,
}

fn rayleigh(v: &ComplexVector, m: &ComplexMatrix) -> f64 {
    (v.adjoint() * m * v)[(0, 0)].re
}

/// Power iteration for the top generalized eigenvector of `(a, b)`, i.e. the
/// maximizer of `⟨u|a|u⟩/⟨u|b|u⟩`, returned as `u = b^{-1/2} w`.
fn generalized_top(a: &ComplexMatrix, b: &ComplexMatrix, iters: usize, start: ComplexVector) -> Result<ComplexVector> {
    let w_half = pseudo_inv_sqrt(b, RANK_TOL)?;
    let m = hermitize(&(&w_half * a * &w_half));
    // m is PSD, so plain power iteration converges to the top eigenvector
    let mut w = start;
    for _ in 0..iters {
        let next = &m * &w;
        if next.norm() == 0.0 {
            break;
        }
        w = normalize(&next);
    }
    Ok(normalize(&(&w_half * w)))
}

/// Kernel direction of `sigma` carrying weight of `rho`, if any.
fn leaking_vector(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<Option<ComplexVector>> {
    let out = identity(sigma.nrows()) - support_projector(sigma, RANK_TOL)?;
    let leak = hermitize(&(&out * rho * &out));
    let s = crate::hermkernel::eig_hermitian(&leak)?;
    if s.max() > RANK_TOL * max_eig(rho)?.max(f64::MIN_POSITIVE) {
        Ok(Some(s.vector(0)))
    } else {
        Ok(None)
    }
}

/// Evaluates the rank-one test `P = p|u⟩⟨u|`, `Q = q|v⟩⟨v|` with `q/p` chosen so the
/// conditional type-I error equals `eps`, rescaled so that `P + Q ≤ I`.
fn rank_one_test(
    rho: &ComplexMatrix,
    sigma: &ComplexMatrix,
    u: &ComplexVector,
    v: &ComplexVector,
    eps: f64,
) -> Result<Option<(f64, ComplexMatrix, ComplexMatrix)>> {
    let a_rho = rayleigh(u, rho);
    let b_rho = rayleigh(v, rho);
    let mut r = if b_rho > 0.0 { eps * a_rho / ((1.0 - eps) * b_rho) } else { 1.0 };
    if !(r.is_finite() && r > 0.0) || a_rho <= 0.0 {
        return Ok(None);
    }
    let p0 = projector(u);
    let q0 = projector(v);
    // guard against round-off pushing α above ε
    for _ in 0..4 {
        if alpha_ph(rho, &p0, &(&q0 * c(r, 0.0))) <= eps {
            break;
        }
        r *= 1.0 - 1e-14;
    }
    let sum = &p0 + &q0 * c(r, 0.0);
    let norm = max_eig(&hermitize(&sum))?.max(f64::MIN_POSITIVE);
    let p = p0 / c(norm, 0.0);
    let q = q0 * c(r / norm, 0.0);
    if alpha_ph(rho, &p, &q) > eps {
        return Ok(None);
    }
    let beta = beta_ph(sigma, &p, &q);
    if !beta.is_finite() {
        return Ok(None);
    }
    Ok(Some((beta, p, q)))
}

/// Local search for the postselected ε-hypothesis test between `ρ` and `σ`.
///
/// Each restart draws random starting vectors and runs `budget` power-iteration
/// steps toward the two generalized eigenvectors; the best feasible pair over
/// `restarts` restarts is returned. The value is a lower bound on `D_pH^ε`.
pub fn dph_search(
    rho: &ComplexMatrix,
    sigma: &ComplexMatrix,
    eps: f64,
    budget: usize,
    restarts: usize,
    seed: u64,
) -> Result<DphSearch> {
    check_eps(eps)?;
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch("dph arguments differ in shape".into()));
    }
    psd_spectrum(rho)?;
    psd_spectrum(sigma)?;
    let d = rho.nrows();
    let mut r = rng(seed);
    let mut best: Option<(f64, ComplexMatrix, ComplexMatrix)> = None;

    let fixed_u = leaking_vector(rho, sigma)?;
    let fixed_v = leaking_vector(sigma, rho)?;
    for _ in 0..restarts.max(1) {
        let u = match &fixed_u {
            Some(u) => u.clone(),
            None => generalized_top(rho, sigma, budget, pure_state(d, &mut r))?,
        };
        let v = match &fixed_v {
            Some(v) => v.clone(),
            None => generalized_top(sigma, rho, budget, pure_state(d, &mut r))?,
        };
        if let Some(cand) = rank_one_test(rho, sigma, &u, &v, eps)? {
            if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                best = Some(cand);
            }
        }
        // a random feasible pair keeps the search well defined when power steps are degenerate
        let u = pure_state(d, &mut r);
        let v = pure_state(d, &mut r);
        if let Some(cand) = rank_one_test(rho, sigma, &u, &v, eps)? {
            if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                best = Some(cand);
            }
        }
    }
    let (beta, p, q) = best.ok_or_else(|| Error::SolverFailure("no feasible test found".into()))?;
    Ok(DphSearch { bits: Bits(-beta.max(0.0).log2()), p, q })
}

/// Draws a random feasible test pair (used to probe optimality of the closed form).
pub fn random_feasible_test(
    rho: &ComplexMatrix,
    eps: f64,
    rng: &mut impl Rng,
) -> Result<Option<(ComplexMatrix, ComplexMatrix)>> {
    let d = rho.nrows();
    let g = crate::random::ginibre(d, d, rng);
    let h = crate::random::ginibre(d, d, rng);
    let p = &g * g.adjoint();
    let mut q = &h * h.adjoint();
    let a = alpha_ph(rho, &p, &q);
    if a > eps {
        // shrink Q until α = ε
        let qr = (&q * rho).trace().re;
        let pr = (&p * rho).trace().re;
        let t = eps * pr / ((1.0 - eps) * qr) * (1.0 - 1e-12);
        q *= c(t, 0.0);
    }
    let norm = max_eig(&hermitize(&(&p + &q)))?;
    if norm <= 0.0 {
        return Ok(None);
    }
    Ok(Some((p / c(norm, 0.0), q / c(norm, 0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::zoo::{depolarizing, qubit_trash};
    use crate::hermkernel::{diag, kron, min_eig, unit};
    use crate::random::density_matrix;

    const LOG2_1_6: f64 = 0.678_071_905_112_637_8;

    #[test]
    fn dmax_examples() {
        let rho = diag(&[0.3, 0.7]);
        assert!(dmax_states(&rho, &rho).unwrap().0.abs() < 1e-12);
        let v = dmax_states(&diag(&[0.5, 0.5]), &diag(&[0.75, 0.25])).unwrap();
        assert!((v.0 - 1.0).abs() < 1e-12);
        assert_eq!(dmax_states(&unit(2, 0, 0), &unit(2, 1, 1)).unwrap(), Bits::INF);
    }

    #[test]
    fn dmax_channel_examples() {
        let id = Channel::identity(2);
        let dep = depolarizing(0.5).unwrap();
        assert!((dmax_channels(&id, &dep).unwrap().0 - LOG2_1_6).abs() < 1e-12);
        assert!((dmax_channels(&dep, &qubit_trash()).unwrap().0 - 2.5f64.log2()).abs() < 1e-12);
        assert!(dmax_channels(&dep, &dep).unwrap().0.abs() < 1e-12);
    }

    #[test]
    fn domega_examples() {
        let a = diag(&[0.5, 0.5]);
        let b = diag(&[0.75, 0.25]);
        assert!((domega_states(&a, &b).unwrap().0 - (1.0 + 1.5f64.log2())).abs() < 1e-12);
        assert!(domega_states(&b, &(b.clone() * c(3.7, 0.0))).unwrap().0.abs() < 1e-12);
    }

    #[test]
    fn dph_closed_examples() {
        let a = diag(&[0.5, 0.5]);
        assert!((dph_closed(&a, &a, 0.5).unwrap().0 - 1.0).abs() < 1e-12);
        assert!((dph_from_domega(Bits(2.0), 0.5).unwrap().0 - 5f64.log2()).abs() < 1e-12);
        assert!(dph_from_domega(Bits(3.0), 1e-12).unwrap().0 < 1e-10);
        assert!(matches!(dph_closed(&a, &a, 1.0), Err(Error::EpsOutOfRange(_))));
        assert_eq!(dph_from_domega(Bits::INF, 0.3).unwrap(), Bits::INF);
    }

    #[test]
    fn dmax_agrees_with_operator_inequality_definition() {
        let mut r = rng(17);
        for _ in 0..20 {
            let rho = density_matrix(3, 3, &mut r);
            let sigma = density_matrix(3, 3, &mut r);
            let lam = dmax_states(&rho, &sigma).unwrap().ratio();
            let above = &sigma * c(lam * (1.0 + 1e-8), 0.0) - &rho;
            let below = &sigma * c(lam * (1.0 - 1e-8), 0.0) - &rho;
            assert!(min_eig(&hermitize(&above)).unwrap() > -1e-12);
            assert!(min_eig(&hermitize(&below)).unwrap() < 0.0);
        }
    }

    #[test]
    fn dmax_is_additive() {
        let mut r = rng(2);
        let (r1, s1) = (density_matrix(2, 2, &mut r), density_matrix(2, 2, &mut r));
        let (r2, s2) = (density_matrix(2, 2, &mut r), density_matrix(2, 2, &mut r));
        let joint = dmax_states(&kron(&r1, &r2), &kron(&s1, &s2)).unwrap().0;
        let sum = dmax_states(&r1, &s1).unwrap().0 + dmax_states(&r2, &s2).unwrap().0;
        assert!((joint - sum).abs() < 1e-9);
    }

    #[test]
    fn dph_closed_is_increasing_in_eps() {
        let a = diag(&[0.2, 0.8]);
        let b = diag(&[0.6, 0.4]);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..100 {
            let v = dph_closed(&a, &b, k as f64 / 100.0).unwrap().0;
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn search_on_identical_states() {
        let a = diag(&[0.4, 0.6]);
        let s = dph_search(&a, &a, 0.5, 20, 10, 1).unwrap();
        assert!(s.bits.0 <= 1.0 + 1e-9);
        assert!((s.bits.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn search_finds_infinite_value_on_disjoint_support() {
        let s = dph_search(&unit(2, 0, 0), &unit(2, 1, 1), 0.3, 5, 2, 3).unwrap();
        assert_eq!(s.bits, Bits::INF);
    }

    #[test]
    fn random_tests_respect_closed_form() {
        let mut r = rng(5);
        for _ in 0..50 {
            let rho = density_matrix(2, 2, &mut r);
            let sigma = density_matrix(2, 2, &mut r);
            let closed = dph_closed(&rho, &sigma, 0.3).unwrap().0;
            if let Some((p, q)) = random_feasible_test(&rho, 0.3, &mut r).unwrap() {
                assert!(alpha_ph(&rho, &p, &q) <= 0.3 + 1e-12);
                assert!(beta_ph(&sigma, &p, &q) >= (-closed).exp2() - 1e-9);
            }
        }
    }
}
