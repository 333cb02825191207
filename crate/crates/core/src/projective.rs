//! Projective mutual information of channels and bipartite states.
//!
//! For a channel with Choi state `Φ`,
//! `I_Ω = log₂ inf { ξ : Φ ≤ I_R ⊗ S ≤ ξ Φ, S ≥ 0 }`,
//! and dually `I_Ω = log₂ sup { Tr[PΦ]/Tr[QΦ] : P, Q ≥ 0, Tr_R P = Tr_R Q }`.
//! Bisection on `log₂ ξ` decides each level with a min-slack barrier solve; every
//! decision produces either a feasible `S` (an upper bound) or a dual pair
//! `(P, Q)` (a lower bound), and both are re-validated by eigenvalue tests
//! before they are returned.
//!
//! States use the same program with `I_R` replaced by the marginal `ρ_A`.

use rand::Rng;

use crate::channels::{tensor_channels, Channel};
use crate::divergences::{dmax_channels, Bits};
use crate::error::{Error, Result};
use crate::hermkernel::{
    c, eig_hermitian, hermitize, identity, kron, max_abs, max_abs_diff, max_eig, min_eig, partial_trace, psd_part,
    pseudo_inv, pseudo_inv_sqrt, support_basis, support_projector, unit_rect, ComplexMatrix, PSD_TOL, RANK_TOL,
};
use crate::random::{haar_isometry, rng};
use crate::sdp::{self, hermitian_basis, hermitian_from_coords, Control, Lmi, Problem};

/// Feasible point of the primal program: `Φ ≤ L ⊗ S ≤ ξ Φ`.
#[derive(Debug, Clone)]
pub struct PrimalCertificate {
    pub xi: f64,
    pub s: ComplexMatrix,
}

impl PrimalCertificate {
    pub fn bits(&self) -> Bits {
        Bits::from_ratio(self.xi)
    }
}

/// Feasible point of the dual program; `log₂(Tr[PΦ]/Tr[QΦ])` is a lower bound.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub p: ComplexMatrix,
    pub q: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct IomegaResult {
    pub lower: Bits,
    pub upper: Bits,
    /// Absent when the value is infinite.
    pub primal: Option<PrimalCertificate>,
    pub dual: DualCertificate,
    pub finite: bool,
    pub iterations: usize,
}

impl IomegaResult {
    pub fn gap(&self) -> f64 {
        if self.finite {
            self.upper.0 - self.lower.0
        } else {
            0.0
        }
    }

    /// Midpoint of the bracket (`+∞` when infinite).
    pub fn estimate(&self) -> Bits {
        if self.finite {
            Bits(0.5 * (self.lower.0 + self.upper.0))
        } else {
            Bits::INF
        }
    }
}

/// Scaling of the reference operator multiplying `S` in the constraints.
/// The optimal value does not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SNormalization {
    /// `I_R ⊗ S` (for states: `ρ_A ⊗ S`).
    Identity,
    /// `(I_R/d_R) ⊗ S` (for states: `(ρ_A/Tr ρ_A)/d_A`-weighted, i.e. divided by `d_A`).
    Marginal,
}

#[derive(Debug, Clone, Copy)]
pub struct IomegaOptions {
    pub gap_bits: f64,
    pub psd_tol: f64,
    pub rank_tol: f64,
    pub normalization: SNormalization,
    pub max_bisections: usize,
}

impl Default for IomegaOptions {
    fn default() -> Self {
        Self { gap_bits: 1e-6, psd_tol: PSD_TOL, rank_tol: RANK_TOL, normalization: SNormalization::Identity, max_bisections: 200 }
    }
}

/// True iff `supp Φ = supp L ⊗ supp Φ_B` (with `L` the reference marginal).
fn product_support(phi: &ComplexMatrix, d_r: usize, d_b: usize, rank_tol: f64) -> Result<bool> {
    let pi = support_projector(phi, rank_tol)?;
    let pr = support_projector(&hermitize(&partial_trace(phi, &[d_r, d_b], &[0])?), rank_tol)?;
    let pb = support_projector(&hermitize(&partial_trace(phi, &[d_r, d_b], &[1])?), rank_tol)?;
    Ok(max_abs_diff(&pi, &kron(&pr, &pb)) <= 1e-8)
}

/// Whether `I_Ω(N)` is finite: the Choi support must be `I_R ⊗ supp(Φ_B)`.
pub fn iomega_finite(n: &Channel) -> bool {
    product_support(n.choi(), n.d_in(), n.d_out(), RANK_TOL).unwrap_or(false)
}

/// Whether `I_Ω(ρ_AB)` is finite.
pub fn state_iomega_finite(rho: &ComplexMatrix, d_a: usize, d_b: usize) -> Result<bool> {
    product_support(rho, d_a, d_b, RANK_TOL)
}

/// A compressed instance of the program: `phi` is full rank on `r_A ⊗ r_B`.
struct Instance {
    phi: ComplexMatrix,
    l: ComplexMatrix,
    d_r: usize,
    d_b: usize,
    va: ComplexMatrix,
    vb: ComplexMatrix,
    phi_scale: f64,
    l_scale: f64,
    phi_inv_sqrt: ComplexMatrix,
    white_identity_max: f64,
    basis: Vec<ComplexMatrix>,
    white_basis: Vec<ComplexMatrix>,
}

impl Instance {
    fn new(phi_full: &ComplexMatrix, l_full: &ComplexMatrix, d_r: usize, d_b: usize, rank_tol: f64) -> Result<Self> {
        let va = support_basis(&hermitize(l_full), rank_tol)?;
        let vb = support_basis(&hermitize(&partial_trace(phi_full, &[d_r, d_b], &[1])?), rank_tol)?;
        let v = kron(&va, &vb);
        let phi = hermitize(&(v.adjoint() * phi_full * &v));
        let l = hermitize(&(va.adjoint() * l_full * &va));
        let phi_scale = max_eig(&phi)?;
        let l_scale = max_eig(&l)?;
        let phi = phi / c(phi_scale, 0.0);
        let l = l / c(l_scale, 0.0);
        let (ra, rb) = (va.ncols(), vb.ncols());
        let phi_inv_sqrt = pseudo_inv_sqrt(&phi, 0.0)?;
        let basis = hermitian_basis(rb);
        let white_basis = basis.iter().map(|e| hermitize(&(&phi_inv_sqrt * kron(&l, e) * &phi_inv_sqrt))).collect();
        let white_identity_max = max_eig(&hermitize(&(&phi_inv_sqrt * kron(&l, &identity(rb)) * &phi_inv_sqrt)))?;
        Ok(Self { phi, l, d_r: ra, d_b: rb, va, vb, phi_scale, l_scale, phi_inv_sqrt, white_identity_max, basis, white_basis })
    }

    /// Smallest ξ certified by `S` (compressed), with `S` rescaled so that `Φ ≤ L ⊗ S`.
    fn kappa(&self, s: &ComplexMatrix) -> Result<Option<(f64, ComplexMatrix)>> {
        if min_eig(&hermitize(s))? <= 0.0 {
            return Ok(None);
        }
        let m = hermitize(&(&self.phi_inv_sqrt * kron(&self.l, s) * &self.phi_inv_sqrt));
        let spec = eig_hermitian(&m)?;
        let (hi, lo) = (spec.max(), spec.min());
        if lo <= 0.0 {
            return Ok(None);
        }
        Ok(Some((hi / lo, s / c(lo, 0.0))))
    }

    /// Dual pair from barrier multipliers of the two whitened slack blocks, completed so that
    /// `Tr_R[(L ⊗ I) P] = Tr_R[(L ⊗ I) Q]` holds exactly.
    fn dual_from_multipliers(&self, z1: &ComplexMatrix, z2: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let z1 = psd_part(&hermitize(&(&self.phi_inv_sqrt * z1 * &self.phi_inv_sqrt)))?;
        let z2 = psd_part(&hermitize(&(&self.phi_inv_sqrt * z2 * &self.phi_inv_sqrt)))?;
        let lw = kron(&self.l, &identity(self.d_b));
        let d = partial_trace(&(&lw * (&z2 - &z1)), &[self.d_r, self.d_b], &[1])?;
        let d = hermitize(&d);
        let dp = psd_part(&d)?;
        let dm = psd_part(&(-&d))?;
        let linv = pseudo_inv(&self.l, 0.0)? / c(self.d_r as f64, 0.0);
        let p = &z1 + kron(&linv, &dp);
        let q = &z2 + kron(&linv, &dm);
        Ok((hermitize(&p), hermitize(&q)))
    }

    fn ratio(&self, p: &ComplexMatrix, q: &ComplexMatrix) -> f64 {
        let num = (p * &self.phi).trace().re;
        let den = (q * &self.phi).trace().re;
        if den <= 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    }

    /// Primal certificate in the original space.
    fn lift_primal(&self, xi: f64, s: &ComplexMatrix) -> PrimalCertificate {
        let s_full = &self.vb * s * self.vb.adjoint() * c(self.phi_scale / self.l_scale, 0.0);
        PrimalCertificate { xi, s: hermitize(&s_full) }
    }

    fn lift_dual(&self, p: &ComplexMatrix, q: &ComplexMatrix) -> DualCertificate {
        let v = kron(&self.va, &self.vb);
        let p = &v * p * v.adjoint();
        let q = &v * q * v.adjoint();
        let scale = max_eig(&hermitize(&(&p + &q))).unwrap_or(1.0).max(f64::MIN_POSITIVE);
        DualCertificate { p: hermitize(&(p / c(scale, 0.0))), q: hermitize(&(q / c(scale, 0.0))) }
    }

    /// Min-slack program at level `xi`, posed in the frame whitened by `Φ^{-1/2}`:
    /// `(s − 1) I + W(L ⊗ S)W ≻ 0`, `(s + ξ) I − W(L ⊗ S)W ≻ 0`, `S ≻ 0`.
    /// Whitening makes the slack relative to `Φ`, which keeps the barrier well
    /// conditioned close to the threshold.
    fn decide(&self, xi: f64, width_bits: f64) -> Result<Decision> {
        let nb = self.basis.len();
        let dim = self.d_r * self.d_b;
        let id = identity(dim);
        let mut c1: Vec<ComplexMatrix> = self.white_basis.clone();
        c1.push(id.clone());
        let mut c2: Vec<ComplexMatrix> = self.white_basis.iter().map(|m| -m).collect();
        c2.push(id.clone());
        let mut c3: Vec<ComplexMatrix> = self.basis.clone();
        c3.push(ComplexMatrix::zeros(self.d_b, self.d_b));
        let problem = Problem {
            cost: (0..=nb).map(|i| if i == nb { 1.0 } else { 0.0 }).collect(),
            lmis: vec![
                Lmi { constant: -id.clone(), coeffs: c1 },
                Lmi { constant: &id * c(xi, 0.0), coeffs: c2 },
                Lmi { constant: ComplexMatrix::zeros(self.d_b, self.d_b), coeffs: c3 },
            ],
        };
        let mut x0 = crate::sdp::hermitian_coords(&identity(self.d_b));
        x0.push(2.0 + self.white_identity_max);

        let mut found: Option<Decision> = None;
        let mut best_ratio = 0.0;
        let mut best_dual: Option<(ComplexMatrix, ComplexMatrix)> = None;
        // the slack optimum near the threshold is of order the bracket width, so the
        // barrier must resolve well below that
        let resolve = (width_bits * std::f64::consts::LN_2 * 1e-2).clamp(1e-14, 1e-10);
        let opts = sdp::Options { gap_tol: resolve, ..sdp::Options::default() };
        let outcome = sdp::minimize(&problem, &x0, &opts, |it| {
            let s_val = it.x[nb];
            if s_val < 0.0 {
                found = Some(Decision::Feasible(hermitian_from_coords(self.d_b, &it.x[..nb])));
                return Control::Halt;
            }
            if let Ok((p, q)) = self.dual_from_multipliers(&it.duals[0], &it.duals[1]) {
                let r = self.ratio(&p, &q);
                if r > best_ratio {
                    best_ratio = r;
                    best_dual = Some((p.clone(), q.clone()));
                }
                if r > xi {
                    found = Some(Decision::Infeasible(p, q));
                    return Control::Halt;
                }
            }
            Control::Continue
        })?;
        if let Some(d) = found {
            return Ok(d);
        }
        let s = hermitian_from_coords(self.d_b, &outcome.last.x[..nb]);
        Ok(Decision::Undecided { s, dual: best_dual })
    }
}

enum Decision {
    Feasible(ComplexMatrix),
    Infeasible(ComplexMatrix, ComplexMatrix),
    Undecided { s: ComplexMatrix, dual: Option<(ComplexMatrix, ComplexMatrix)> },
}

/// Infinite-value dual witness: `Q = Π_R ⊗ Π_B − Π` has `Tr[QΦ] = 0`, and
/// `P = L⁺ ⊗ Tr_R[(L ⊗ I)Q]/rank(L)` matches its weighted marginal.
fn support_obstruction(phi: &ComplexMatrix, l: &ComplexMatrix, d_r: usize, d_b: usize, rank_tol: f64) -> Result<DualCertificate> {
    let pi = support_projector(phi, rank_tol)?;
    let pr = support_projector(&hermitize(l), rank_tol)?;
    let pb = support_projector(&hermitize(&partial_trace(phi, &[d_r, d_b], &[1])?), rank_tol)?;
    let q = hermitize(&(kron(&pr, &pb) - pi));
    let x = hermitize(&partial_trace(&(kron(l, &identity(d_b)) * &q), &[d_r, d_b], &[1])?);
    let rank = crate::hermkernel::rank(&hermitize(l), rank_tol)?.max(1);
    let p = kron(&pseudo_inv(&hermitize(l), rank_tol)?, &x) / c(rank as f64, 0.0);
    Ok(DualCertificate { p: hermitize(&p), q })
}

/// Eigenvalue re-check of a primal certificate against `Φ` and reference `L`.
pub fn validate_primal(phi: &ComplexMatrix, l: &ComplexMatrix, cert: &PrimalCertificate, psd_tol: f64) -> Result<bool> {
    let ls = kron(l, &cert.s);
    let scale = max_eig(&hermitize(&ls))?.max(max_eig(phi)?);
    let a = min_eig(&hermitize(&(&ls - phi)))?;
    let b = min_eig(&hermitize(&(phi * c(cert.xi, 0.0) - &ls)))?;
    let s_ok = min_eig(&hermitize(&cert.s))? >= -psd_tol * max_abs(&cert.s).max(f64::MIN_POSITIVE);
    Ok(cert.xi >= 1.0 - 1e-12 && a >= -psd_tol * scale && b >= -psd_tol * scale * cert.xi && s_ok)
}

/// Checks positivity and weighted marginal matching of a dual pair and returns
/// its bound `log₂(Tr[PΦ]/Tr[QΦ])`, or `None` if the pair is not feasible.
pub fn validate_dual(
    phi: &ComplexMatrix,
    l: &ComplexMatrix,
    d_r: usize,
    d_b: usize,
    cert: &DualCertificate,
    psd_tol: f64,
) -> Result<Option<Bits>> {
    let scale = max_abs(&cert.p).max(max_abs(&cert.q)).max(f64::MIN_POSITIVE);
    let p_ok = min_eig(&cert.p)? >= -psd_tol * scale;
    let q_ok = min_eig(&cert.q)? >= -psd_tol * scale;
    let lw = kron(l, &identity(d_b));
    let mp = partial_trace(&(&lw * &cert.p), &[d_r, d_b], &[1])?;
    let mq = partial_trace(&(&lw * &cert.q), &[d_r, d_b], &[1])?;
    let lscale = max_abs(l).max(f64::MIN_POSITIVE);
    let matched = max_abs_diff(&mp, &mq) <= 1e-8 * scale * lscale;
    if !(p_ok && q_ok && matched) {
        return Ok(None);
    }
    let num = (&cert.p * phi).trace().re;
    let den = (&cert.q * phi).trace().re;
    if num <= 0.0 {
        return Ok(None);
    }
    // a vanishing denominator (relative to the numerator) means an infinite bound
    if den <= 1e-13 * num {
        return Ok(Some(Bits::INF));
    }
    Ok(Some(Bits::from_ratio(num / den)))
}

/// Bisection driver shared by channels and states.
fn solve(phi: &ComplexMatrix, l: &ComplexMatrix, d_r: usize, d_b: usize, opts: &IomegaOptions) -> Result<IomegaResult> {
    if !product_support(phi, d_r, d_b, opts.rank_tol)? {
        let dual = support_obstruction(phi, l, d_r, d_b, opts.rank_tol)?;
        return Ok(IomegaResult { lower: Bits::INF, upper: Bits::INF, primal: None, dual, finite: false, iterations: 0 });
    }
    let inst = Instance::new(phi, l, d_r, d_b, opts.rank_tol)?;

    // initial bracket: S = I and S = Φ_B
    let mut best_s: Option<(f64, ComplexMatrix)> = None;
    let phib = hermitize(&partial_trace(&inst.phi, &[inst.d_r, inst.d_b], &[1])?);
    for s in [identity(inst.d_b), phib] {
        if let Some((k, s)) = inst.kappa(&s)? {
            if best_s.as_ref().is_none_or(|b| k < b.0) {
                best_s = Some((k, s));
            }
        }
    }
    let (k0, s0) = best_s.ok_or_else(|| Error::SolverFailure("no initial primal point".into()))?;
    let mut hi = (k0.log2(), s0);
    let ones = identity(inst.d_r * inst.d_b);
    let mut lo = (inst.ratio(&ones, &ones).log2().max(0.0), ones.clone(), ones);

    let mut iterations = 0;
    let mut undecided = 0usize;
    let offsets = [0.5, 0.25, 0.75, 0.125, 0.875];
    while hi.0 - lo.0 > opts.gap_bits {
        if iterations >= opts.max_bisections {
            return Err(Error::SolverFailure(format!("bisection did not close the gap within {iterations} steps")));
        }
        iterations += 1;
        let mid = lo.0 + (hi.0 - lo.0) * offsets[undecided % offsets.len()];
        let xi = mid.exp2();
        let (s_cand, dual_cand) = match inst.decide(xi, hi.0 - lo.0)? {
            Decision::Feasible(s) => (Some(s), None),
            Decision::Infeasible(p, q) => (None, Some((p, q))),
            Decision::Undecided { s, dual } => (Some(s), dual),
        };
        let mut progressed = false;
        if let Some(s) = s_cand {
            if let Some((k, s)) = inst.kappa(&s)? {
                let kb = k.log2();
                if kb < hi.0 {
                    progressed |= kb <= mid;
                    hi = (kb, s);
                }
            }
        }
        if let Some((p, q)) = dual_cand {
            let rb = inst.ratio(&p, &q).log2();
            if rb > lo.0 {
                progressed |= rb >= mid;
                lo = (rb, p, q);
            }
        }
        if progressed {
            undecided = 0;
        } else {
            undecided += 1;
            if undecided > 2 * offsets.len() {
                return Err(Error::SolverFailure(format!(
                    "feasibility undecided near log2 xi = {mid} (bracket [{}, {}])",
                    lo.0, hi.0
                )));
            }
        }
    }

    let primal = inst.lift_primal(hi.0.exp2(), &hi.1);
    let dual = inst.lift_dual(&lo.1, &lo.2);
    let tol = opts.psd_tol;
    if !validate_primal(phi, l, &primal, tol)? {
        return Err(Error::SolverFailure("primal certificate failed re-validation".into()));
    }
    let lower = validate_dual(phi, l, d_r, d_b, &dual, tol)?
        .ok_or_else(|| Error::SolverFailure("dual certificate failed re-validation".into()))?;
    let upper = Bits(hi.0.max(0.0));
    let lower = Bits(lower.0.min(upper.0));
    Ok(IomegaResult { lower, upper, primal: Some(primal), dual, finite: true, iterations })
}

fn reference_for_channel(d_r: usize, norm: SNormalization) -> ComplexMatrix {
    match norm {
        SNormalization::Identity => identity(d_r),
        SNormalization::Marginal => identity(d_r) / c(d_r as f64, 0.0),
    }
}

/// Certified bracket on `I_Ω(N)`; `tol` is the PSD tolerance used in re-validation.
pub fn iomega_channel(n: &Channel, gap_bits: f64, tol: f64) -> Result<IomegaResult> {
    iomega_channel_with(n, &IomegaOptions { gap_bits, psd_tol: tol, ..Default::default() })
}

pub fn iomega_channel_with(n: &Channel, opts: &IomegaOptions) -> Result<IomegaResult> {
    let l = reference_for_channel(n.d_in(), opts.normalization);
    solve(n.choi(), &l, n.d_in(), n.d_out(), opts)
}

/// Certified bracket on `I_Ω(ρ_AB)` with constraints `ρ ≤ ρ_A ⊗ S ≤ ξ ρ`.
pub fn iomega_state(rho: &ComplexMatrix, d_a: usize, d_b: usize, gap_bits: f64, tol: f64) -> Result<IomegaResult> {
    iomega_state_with(rho, d_a, d_b, &IomegaOptions { gap_bits, psd_tol: tol, ..Default::default() })
}

pub fn iomega_state_with(rho: &ComplexMatrix, d_a: usize, d_b: usize, opts: &IomegaOptions) -> Result<IomegaResult> {
    if rho.nrows() != d_a * d_b {
        return Err(Error::DimensionMismatch(format!("state of side {} is not {d_a}x{d_b}", rho.nrows())));
    }
    let mut l = hermitize(&partial_trace(rho, &[d_a, d_b], &[0])?);
    if opts.normalization == SNormalization::Marginal {
        l /= c(d_a as f64, 0.0);
    }
    solve(rho, &l, d_a, d_b, opts)
}

/// Validates a channel-level primal certificate (reference `I_R`).
pub fn validate_channel_primal(n: &Channel, cert: &PrimalCertificate, psd_tol: f64) -> Result<bool> {
    validate_primal(n.choi(), &identity(n.d_in()), cert, psd_tol)
}

/// Validates a channel-level dual certificate (`Tr_R P = Tr_R Q`) and returns its bound.
pub fn validate_channel_dual(n: &Channel, cert: &DualCertificate, psd_tol: f64) -> Result<Option<Bits>> {
    validate_dual(n.choi(), &identity(n.d_in()), n.d_in(), n.d_out(), cert, psd_tol)
}

fn channel_dual_ratio(n: &Channel, p: &ComplexMatrix, q: &ComplexMatrix) -> f64 {
    let num = (p * n.choi()).trace().re;
    let den = (q * n.choi()).trace().re;
    if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Dual certificate for a channel with finite `I_Ω`: the multipliers of the last
/// infeasible bisection level, refined by a seeded random local search that keeps
/// `Tr_R P = Tr_R Q` exactly.
pub fn improve_dual(n: &Channel, seed: u64) -> Result<DualCertificate> {
    if !iomega_finite(n) {
        return Err(Error::SolverFailure("I_Omega is infinite; no finite dual optimum".into()));
    }
    let res = iomega_channel(n, 1e-7, PSD_TOL)?;
    let (d_r, d_b) = (n.d_in(), n.d_out());
    let mut best = res.dual;
    let mut best_ratio = channel_dual_ratio(n, &best.p, &best.q);
    let mut r = rng(seed);
    let mut step = 1e-3;
    for _ in 0..200 {
        let gp = crate::random::ginibre(d_r * d_b, d_r * d_b, &mut r);
        let gq = crate::random::ginibre(d_r * d_b, d_r * d_b, &mut r);
        let mut p = &best.p + (&gp * gp.adjoint()) * c(step, 0.0);
        let mut q = psd_part(&hermitize(&(&best.q - (&gq * gq.adjoint()) * c(step, 0.0))))?;
        let d = hermitize(&partial_trace(&(&p - &q), &[d_r, d_b], &[1])?);
        q += kron(&identity(d_r), &psd_part(&d)?) / c(d_r as f64, 0.0);
        p += kron(&identity(d_r), &psd_part(&(-&d))?) / c(d_r as f64, 0.0);
        let ratio = channel_dual_ratio(n, &p, &q);
        if ratio > best_ratio {
            best_ratio = ratio;
            best = DualCertificate { p: hermitize(&p), q: hermitize(&q) };
        } else {
            step *= 0.97;
        }
    }
    let scale = max_eig(&hermitize(&(&best.p + &best.q)))?.max(f64::MIN_POSITIVE);
    Ok(DualCertificate { p: &best.p / c(scale, 0.0), q: &best.q / c(scale, 0.0) })
}

/// `D_max(N∘P ‖ N∘Q)` for a pair of encoders `P, Q: S → A`.
pub fn delta_pair(n: &Channel, p: &Channel, q: &Channel) -> Result<Bits> {
    dmax_channels(&n.after(p)?, &n.after(q)?)
}

/// Lower bound on `Δ(N) = sup_{P,Q} D_max(N∘P ‖ N∘Q)` by sampling encoder pairs
/// with input dimension `d_B`: half random Stinespring channels, half
/// preparations of random pure states.
pub fn delta_lower_sample(n: &Channel, trials: usize, seed: u64) -> Result<Bits> {
    let (d_s, d_a) = (n.d_out(), n.d_in());
    let mut r = rng(seed);
    let mut best = Bits(0.0);
    for t in 0..trials {
        let (p, q) = if t % 2 == 0 {
            (Channel::random(d_s, d_a, 2, &mut r), Channel::random(d_s, d_a, 2, &mut r))
        } else {
            (preparation(d_s, d_a, &mut r)?, preparation(d_s, d_a, &mut r)?)
        };
        let v = delta_pair(n, &p, &q)?;
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

/// Channel `d_in → d_out` discarding its input and preparing a random pure state.
fn preparation(d_in: usize, d_out: usize, r: &mut impl Rng) -> Result<Channel> {
    let v = haar_isometry(d_out, 1, r);
    let ks = (0..d_in).map(|i| &v * unit_rect(1, d_in, 0, i)).collect();
    Channel::from_kraus(ks, d_in, d_out)
}

/// Channel `d_in → d_out` discarding its input and preparing `|k⟩`.
pub fn basis_preparation(d_in: usize, d_out: usize, k: usize) -> Channel {
    let ks = (0..d_in).map(|i| unit_rect(d_out, d_in, k, i)).collect();
    Channel::from_kraus(ks, d_in, d_out).expect("preparation is a channel")
}

/// Largest entrywise deviation tolerated between `(𝒫 ⊗ id)(O)` and `P`.
const ACTION_TOL: f64 = 1e-7;

/// Turns a dual pair into two encoders `P_enc, Q_enc: S → A` (`d_S = d_B`) and a
/// rank-one test `O` on `T ⊗ B` (`d_T = d_B`) with
/// `Tr[O Φ^{N∘P_enc}] / Tr[O Φ^{N∘Q_enc}] = Tr[PΦ^N] / Tr[QΦ^N]`.
///
/// `O ∝ (I ⊗ √P_B) Φ_TB (I ⊗ √P_B)` with `P_B = Tr_R P`. For each of `P`, `Q` the
/// channel `𝒫: T → R` with `(𝒫 ⊗ id)(d_B·O) = P` is read off from the Kraus
/// operators of the CP map whose Choi operator is `P`; the encoder has the
/// complex-conjugate Kraus operators.
pub fn encoders_from_dual(n: &Channel, cert: &DualCertificate, tol: f64) -> Result<(Channel, Channel, ComplexMatrix)> {
    let (d_r, d_b) = (n.d_in(), n.d_out());
    let pb = hermitize(&partial_trace(&cert.p, &[d_r, d_b], &[1])?);
    let qb = hermitize(&partial_trace(&cert.q, &[d_r, d_b], &[1])?);
    let scale = max_abs(&pb).max(f64::MIN_POSITIVE);
    if max_abs_diff(&pb, &qb) > 1e-8 * scale.max(1.0) {
        return Err(Error::FeasibilityFailure("dual pair has mismatched marginals".into()));
    }
    let sqrt_pb = crate::hermkernel::psd_sqrt(&pb)?;
    let phi_tb = crate::hermkernel::max_entangled(d_b);
    let w = kron(&identity(d_b), &sqrt_pb);
    let o0 = hermitize(&(&w * phi_tb * w.adjoint())) * c(d_b as f64, 0.0);

    let p_enc = encoder_for(&cert.p, &pb, &o0, d_r, d_b, tol)?;
    let q_enc = encoder_for(&cert.q, &pb, &o0, d_r, d_b, tol)?;
    let tr = pb.trace().re;
    let o = o0 / c(tr, 0.0);
    Ok((p_enc, q_enc, hermitize(&o)))
}

fn encoder_for(
    x: &ComplexMatrix,
    pb: &ComplexMatrix,
    o0: &ComplexMatrix,
    d_r: usize,
    d_b: usize,
    tol: f64,
) -> Result<Channel> {
    // CP map E: R → B whose unnormalized Choi operator (R first) is X
    let e_kraus = crate::channels::choi_to_kraus(&(x / c(d_r as f64, 0.0)), d_r, d_b)
        .map_err(|e| Error::FeasibilityFailure(e.to_string()))?;
    let inv_sqrt_t = pseudo_inv_sqrt(&hermitize(&pb.transpose()), RANK_TOL)?;
    // Kraus of 𝒫: T → R are Eᵀ (√P_Bᵀ)^{-1} on the support, completed on the kernel
    let mut kraus: Vec<ComplexMatrix> = e_kraus.iter().map(|e| e.transpose() * &inv_sqrt_t).collect();
    let support = support_projector(&hermitize(&pb.transpose()), RANK_TOL)?;
    let kernel = identity(d_b) - support;
    if max_abs(&kernel) > 1e-12 {
        let basis = support_basis(&hermitize(&kernel), 1e-6)?;
        for j in 0..basis.ncols() {
            let col = basis.column(j).adjoint();
            kraus.push(unit_rect(d_r, 1, 0, 0) * col);
        }
    }
    // residual of the trace-preservation and action constraints
    let gram = crate::channels::kraus_gram(&kraus);
    let tp = max_abs_diff(&gram, &identity(d_b));
    let acted = crate::channels::apply_kraus_on(&kraus, o0, &[d_b, d_b], 0)?;
    let action = max_abs_diff(&acted, x) / max_abs(x).max(f64::MIN_POSITIVE);
    let limit = tol.max(ACTION_TOL);
    if tp > limit || action > limit {
        return Err(Error::FeasibilityFailure(format!(
            "encoder reconstruction residuals: trace {tp:e}, action {action:e}"
        )));
    }
    // renormalize away round-off in the trace condition
    let g = hermitize(&gram);
    let fix = pseudo_inv_sqrt(&g, 0.0)?;
    let kraus: Vec<ComplexMatrix> = kraus.iter().map(|k| k * &fix).map(|k| k.map(|z| z.conj())).collect();
    Channel::from_kraus(kraus, d_b, d_r)
}

/// `I_Ω(N ⊗ M)` computed directly at the product level.
pub fn iomega_product(n: &Channel, m: &Channel, gap_bits: f64) -> Result<IomegaResult> {
    iomega_channel(&tensor_channels(n, m), gap_bits, PSD_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::zoo::{amplitude_damping, bsc_embed, dephasing, depolarizing, qubit_trash};
    use crate::hermkernel::{diag, max_entangled};

    fn depol_closed(p: f64) -> f64 {
        ((4.0 - 3.0 * p) / p).log2()
    }

    #[test]
    fn finiteness_examples() {
        assert!(iomega_finite(&depolarizing(0.5).unwrap()));
        assert!(!iomega_finite(&Channel::identity(2)));
        assert!(!iomega_finite(&dephasing(0.3).unwrap()));
        assert!(!iomega_finite(&amplitude_damping(0.3).unwrap()));
        assert!(iomega_finite(&bsc_embed(0.2).unwrap()));
        assert!(iomega_finite(&qubit_trash()));
    }

    #[test]
    fn depolarizing_value() {
        let r = iomega_channel(&depolarizing(0.5).unwrap(), 1e-6, PSD_TOL).unwrap();
        assert!(r.finite);
        assert!(r.upper.0 - r.lower.0 <= 1e-6);
        assert!(r.lower.0 <= depol_closed(0.5) + 1e-9 && r.upper.0 >= depol_closed(0.5) - 1e-9);
    }

    #[test]
    fn replacement_is_zero() {
        let rep = Channel::replacement(&diag(&[0.3, 0.7]), 2).unwrap();
        let r = iomega_channel(&rep, 1e-6, PSD_TOL).unwrap();
        assert!(r.upper.0 < 1e-9 && r.lower.0 > -1e-9);
    }

    #[test]
    fn bsc_value() {
        let r = iomega_channel(&bsc_embed(0.2).unwrap(), 1e-6, PSD_TOL).unwrap();
        assert!((r.estimate().0 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn identity_is_infinite_with_obstruction() {
        let r = iomega_channel(&Channel::identity(2), 1e-6, PSD_TOL).unwrap();
        assert!(!r.finite && r.upper == Bits::INF);
        let b = validate_channel_dual(&Channel::identity(2), &r.dual, PSD_TOL).unwrap();
        assert_eq!(b, Some(Bits::INF));
    }

    #[test]
    fn state_examples() {
        let prod = kron(&diag(&[0.3, 0.7]), &diag(&[0.6, 0.4]));
        let r = iomega_state(&prod, 2, 2, 1e-6, PSD_TOL).unwrap();
        assert!(r.upper.0 < 1e-9);
        let choi = depolarizing(0.5).unwrap().choi().clone();
        let r = iomega_state(&choi, 2, 2, 1e-6, PSD_TOL).unwrap();
        assert!((r.estimate().0 - 5f64.log2()).abs() < 1e-6);
        let r = iomega_state(&max_entangled(2), 2, 2, 1e-6, PSD_TOL).unwrap();
        assert!(!r.finite);
    }

    #[test]
    fn normalization_does_not_change_value() {
        let mut r = rng(12);
        let n = Channel::random(2, 2, 4, &mut r);
        let a = iomega_channel_with(&n, &IomegaOptions { gap_bits: 1e-8, ..Default::default() }).unwrap();
        let b = iomega_channel_with(
            &n,
            &IomegaOptions { gap_bits: 1e-8, normalization: SNormalization::Marginal, ..Default::default() },
        )
        .unwrap();
        assert!((a.estimate().0 - b.estimate().0).abs() < 1e-8);
    }

    #[test]
    fn encoders_reproduce_dual_ratio() {
        let n = depolarizing(0.5).unwrap();
        let cert = improve_dual(&n, 3).unwrap();
        let bound = validate_channel_dual(&n, &cert, PSD_TOL).unwrap().unwrap();
        assert!(bound.0 >= 5f64.log2() - 1e-6);
        let (pe, qe, o) = encoders_from_dual(&n, &cert, 1e-7).unwrap();
        assert!(min_eig(&o).unwrap() > -1e-12 && max_eig(&o).unwrap() < 1.0 + 1e-12);
        assert_eq!(crate::hermkernel::rank(&o, 1e-9).unwrap(), 1);
        let num = (&o * n.after(&pe).unwrap().choi()).trace().re;
        let den = (&o * n.after(&qe).unwrap().choi()).trace().re;
        assert!(num / den >= 5.0 - 1e-3);
    }

    #[test]
    fn equal_dual_pair_gives_equal_encoders() {
        let n = depolarizing(0.3).unwrap();
        let pi = kron(&identity(2), &diag(&[0.7, 0.3]));
        let cert = DualCertificate { p: pi.clone(), q: pi };
        let (pe, qe, _) = encoders_from_dual(&n, &cert, 1e-7).unwrap();
        assert!(max_abs_diff(n.after(&pe).unwrap().choi(), n.after(&qe).unwrap().choi()) < 1e-9);
    }

    #[test]
    fn delta_samples_stay_below_iomega() {
        let n = depolarizing(0.5).unwrap();
        let d = delta_lower_sample(&n, 40, 1).unwrap();
        assert!(d.0 <= depol_closed(0.5) + 1e-6);
        assert!(delta_lower_sample(&qubit_trash(), 10, 1).unwrap().0.abs() < 1e-9);
        let id = Channel::identity(2);
        let v = delta_pair(&id, &basis_preparation(2, 2, 0), &basis_preparation(2, 2, 1)).unwrap();
        assert_eq!(v, Bits::INF);
    }
}
