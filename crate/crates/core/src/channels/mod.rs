//! Channels, subchannels and the Choi correspondence.
//!
//! Choi operators are normalized states on `R ⊗ B` with `d_R = d_in`:
//! `Φ^N = (id ⊗ N)[Φ]`. The unnormalized operator used in link products is
//! `d_in · Φ^N`.

pub mod supermap;
pub mod zoo;

use crate::error::{Error, Result};
use crate::hermkernel::{
    c, hermitize, identity, is_psd, kron, max_abs, max_abs_diff, partial_trace, permute_subsystems, psd_spectrum,
    vec_of, ComplexMatrix, ComplexVector, PSD_TOL,
};
use crate::random::haar_isometry;

pub use supermap::{BipartiteSubchannelChoi, Supermap};
pub use zoo::{make_builtin, Builtin};

/// Tolerance for trace preservation and Kraus/Choi consistency.
pub const CPTP_TOL: f64 = 1e-9;

/// Eigenvalues of a Choi operator at or below this fraction of the largest are
/// dropped when extracting Kraus operators.
const KRAUS_CUTOFF: f64 = 1e-14;

/// Normalized Choi operator of the map with the given Kraus operators.
pub fn choi_from_kraus(kraus: &[ComplexMatrix], d_in: usize) -> ComplexMatrix {
    let d_out = kraus.first().map_or(0, |k| k.nrows());
    let n = d_in * d_out;
    let mut choi = ComplexMatrix::zeros(n, n);
    for k in kraus {
        // (I ⊗ K)|Ω⟩ has amplitude K[b, i] at index (i, b)
        let v: ComplexVector = vec_of(&k.transpose());
        choi += &v * v.adjoint();
    }
    choi / c(d_in as f64, 0.0)
}

/// Kraus operators (`d_out × d_in`) of the CP map with normalized Choi operator `choi`,
/// one per nonzero eigenvalue.
pub fn choi_to_kraus(choi: &ComplexMatrix, d_in: usize, d_out: usize) -> Result<Vec<ComplexMatrix>> {
    if choi.nrows() != d_in * d_out || !choi.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "Choi of size {}x{} for a {d_in}->{d_out} map",
            choi.nrows(),
            choi.ncols()
        )));
    }
    let s = psd_spectrum(choi)?;
    let cut = KRAUS_CUTOFF * s.max().max(0.0);
    let mut out = Vec::new();
    for (k, &lam) in s.eigenvalues.iter().enumerate() {
        if lam <= cut {
            break;
        }
        let scale = (lam * d_in as f64).sqrt();
        let v = s.vector(k);
        out.push(ComplexMatrix::from_fn(d_out, d_in, |b, i| v[i * d_out + b] * scale));
    }
    if out.is_empty() {
        out.push(ComplexMatrix::zeros(d_out, d_in));
    }
    Ok(out)
}

/// `Σ K† K`.
pub fn kraus_gram(kraus: &[ComplexMatrix]) -> ComplexMatrix {
    let d_in = kraus[0].ncols();
    kraus.iter().fold(ComplexMatrix::zeros(d_in, d_in), |acc, k| acc + k.adjoint() * k)
}

/// Applies a CP map given by Kraus operators to factor `factor` of a multipartite operator.
/// The output has the factor's dimension replaced by the Kraus row count.
pub fn apply_kraus_on(
    kraus: &[ComplexMatrix],
    rho: &ComplexMatrix,
    dims: &[usize],
    factor: usize,
) -> Result<ComplexMatrix> {
    if factor >= dims.len() {
        return Err(Error::DimensionMismatch(format!("factor {factor} out of {} factors", dims.len())));
    }
    let d_in = kraus[0].ncols();
    if dims[factor] != d_in {
        return Err(Error::DimensionMismatch(format!(
            "factor {factor} has dimension {}, map expects {d_in}",
            dims[factor]
        )));
    }
    let side: usize = dims.iter().product();
    if rho.nrows() != side || !rho.is_square() {
        return Err(Error::DimensionMismatch(format!("operator side {} vs dims {dims:?}", rho.nrows())));
    }
    let left: usize = dims[..factor].iter().product();
    let right: usize = dims[factor + 1..].iter().product();
    let il = identity(left);
    let ir = identity(right);
    let d_out = kraus[0].nrows();
    let n_out = left * d_out * right;
    let mut out = ComplexMatrix::zeros(n_out, n_out);
    for k in kraus {
        let full = kron(&kron(&il, k), &ir);
        out += &full * rho * full.adjoint();
    }
    Ok(out)
}

/// Applies a map given by its normalized Choi operator: `L(X) = d_in · Tr_R[(X^T ⊗ I) Φ]`.
pub fn apply_choi(choi: &ComplexMatrix, d_in: usize, d_out: usize, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    if x.nrows() != d_in || !x.is_square() {
        return Err(Error::DimensionMismatch(format!("input of size {} for d_in = {d_in}", x.nrows())));
    }
    let prod = kron(&x.transpose(), &identity(d_out)) * choi;
    Ok(partial_trace(&prod, &[d_in, d_out], &[1])? * c(d_in as f64, 0.0))
}

fn check_choi_shape(choi: &ComplexMatrix, d_in: usize, d_out: usize) -> Result<()> {
    if !choi.is_square() || choi.nrows() != d_in * d_out {
        return Err(Error::DimensionMismatch(format!(
            "Choi of size {}x{} for a {d_in}->{d_out} map",
            choi.nrows(),
            choi.ncols()
        )));
    }
    Ok(())
}

fn validate_cp(choi: &ComplexMatrix, d_in: usize, d_out: usize) -> Result<()> {
    check_choi_shape(choi, d_in, d_out)?;
    if !is_psd(choi, PSD_TOL)? {
        return Err(Error::InvalidChannel("Choi operator is not positive semidefinite".into()));
    }
    Ok(())
}

/// A completely positive trace-preserving map `d_in → d_out`.
#[derive(Debug, Clone)]
pub struct Channel {
    d_in: usize,
    d_out: usize,
    kraus: Option<Vec<ComplexMatrix>>,
    choi: ComplexMatrix,
}

impl Channel {
    pub fn from_kraus(kraus: Vec<ComplexMatrix>, d_in: usize, d_out: usize) -> Result<Self> {
        if kraus.is_empty() || kraus.iter().any(|k| k.shape() != (d_out, d_in)) {
            return Err(Error::DimensionMismatch(format!("Kraus operators must all be {d_out}x{d_in}")));
        }
        let dev = max_abs_diff(&kraus_gram(&kraus), &identity(d_in));
        if dev > CPTP_TOL {
            return Err(Error::InvalidChannel(format!("Kraus operators are not trace preserving (deviation {dev:e})")));
        }
        let choi = choi_from_kraus(&kraus, d_in);
        Ok(Self { d_in, d_out, kraus: Some(kraus), choi })
    }

    /// From a normalized (trace one) Choi operator on `R ⊗ B`.
    pub fn from_choi(choi: ComplexMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        validate_cp(&choi, d_in, d_out)?;
        let marg = partial_trace(&choi, &[d_in, d_out], &[0])?;
        let dev = max_abs_diff(&marg, &(identity(d_in) / c(d_in as f64, 0.0)));
        if dev > CPTP_TOL {
            return Err(Error::InvalidChannel(format!("Choi marginal deviates from I/d_in by {dev:e}")));
        }
        Ok(Self { d_in, d_out, kraus: None, choi: hermitize(&choi) })
    }

    /// Validates the Kraus set and checks it against an explicitly given Choi operator.
    pub fn from_parts(kraus: Vec<ComplexMatrix>, choi: ComplexMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        let ch = Self::from_kraus(kraus, d_in, d_out)?;
        check_choi_shape(&choi, d_in, d_out)?;
        let dev = max_abs_diff(&ch.choi, &choi);
        if dev > CPTP_TOL {
            return Err(Error::InvalidChannel(format!("stored Choi differs from Kraus Choi by {dev:e}")));
        }
        Ok(ch)
    }

    pub fn identity(d: usize) -> Self {
        Self::from_kraus(vec![identity(d)], d, d).expect("identity is a channel")
    }

    /// Replacement channel `ρ ↦ Tr[ρ] σ`.
    pub fn replacement(sigma: &ComplexMatrix, d_in: usize) -> Result<Self> {
        let t = sigma.trace();
        if (t.re - 1.0).abs() > CPTP_TOL || !is_psd(sigma, PSD_TOL)? {
            return Err(Error::InvalidChannel("replacement state must be a density matrix".into()));
        }
        let choi = kron(&(identity(d_in) / c(d_in as f64, 0.0)), sigma);
        Self::from_choi(choi, d_in, sigma.nrows())
    }

    /// Isometry `V` as the channel `ρ ↦ VρV†`.
    pub fn isometry(v: ComplexMatrix) -> Result<Self> {
        let (d_out, d_in) = v.shape();
        Self::from_kraus(vec![v], d_in, d_out)
    }

    /// Haar-random Stinespring channel with environment dimension `d_env`
    /// (raised to `⌈d_in/d_out⌉` if smaller, so the dilation is an isometry).
    pub fn random(d_in: usize, d_out: usize, d_env: usize, rng: &mut impl rand::Rng) -> Self {
        let d_env = d_env.max(d_in.div_ceil(d_out));
        let v = haar_isometry(d_out * d_env, d_in, rng);
        let kraus = (0..d_env)
            .map(|e| ComplexMatrix::from_fn(d_out, d_in, |b, i| v[(b * d_env + e, i)]))
            .collect();
        Self::from_kraus(kraus, d_in, d_out).expect("Stinespring channel is CPTP")
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    /// Normalized Choi state `(id ⊗ N)[Φ]`.
    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn stored_kraus(&self) -> Option<&[ComplexMatrix]> {
        self.kraus.as_deref()
    }

    /// Kraus operators, extracted from the Choi operator when none are stored.
    pub fn kraus(&self) -> Vec<ComplexMatrix> {
        match &self.kraus {
            Some(k) => k.clone(),
            None => choi_to_kraus(&self.choi, self.d_in, self.d_out).expect("validated Choi is PSD"),
        }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        apply_kraus_on(&self.kraus(), rho, &[self.d_in], 0)
    }

    /// Applies the channel to factor `factor` of an operator on `dims`.
    pub fn apply_on(&self, rho: &ComplexMatrix, dims: &[usize], factor: usize) -> Result<ComplexMatrix> {
        apply_kraus_on(&self.kraus(), rho, dims, factor)
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &Channel) -> Result<Channel> {
        if first.d_out != self.d_in {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {}->{} after {}->{}",
                self.d_in, self.d_out, first.d_in, first.d_out
            )));
        }
        let mut ks = Vec::new();
        for a in self.kraus() {
            for b in first.kraus() {
                ks.push(&a * &b);
            }
        }
        let choi = compress_choi(&choi_from_kraus(&ks, first.d_in));
        Channel::from_choi(choi, first.d_in, self.d_out)
    }

    /// Convex combination `t·a + (1−t)·b`.
    pub fn mix(t: f64, a: &Channel, b: &Channel) -> Result<Channel> {
        if a.d_in != b.d_in || a.d_out != b.d_out {
            return Err(Error::DimensionMismatch("mixing channels of different shape".into()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::ParamOutOfRange { name: "t".into(), value: t });
        }
        Channel::from_choi(&a.choi * c(t, 0.0) + &b.choi * c(1.0 - t, 0.0), a.d_in, a.d_out)
    }

    pub fn as_subchannel(&self) -> Subchannel {
        Subchannel { d_in: self.d_in, d_out: self.d_out, kraus: self.kraus.clone(), choi: self.choi.clone() }
    }
}

fn compress_choi(choi: &ComplexMatrix) -> ComplexMatrix {
    hermitize(choi)
}

/// Product channel `N ⊗ M`; its Choi operator lives on `(R R′) ⊗ (B B′)`.
pub fn tensor_channels(n: &Channel, m: &Channel) -> Channel {
    let choi = tensor_choi(&n.choi, n.d_in, n.d_out, &m.choi, m.d_in, m.d_out);
    let kraus = match (&n.kraus, &m.kraus) {
        (Some(a), Some(b)) => Some(a.iter().flat_map(|x| b.iter().map(move |y| kron(x, y))).collect()),
        _ => None,
    };
    Channel { d_in: n.d_in * m.d_in, d_out: n.d_out * m.d_out, kraus, choi }
}

/// `kron(Φ^N, Φ^M)` reordered from `R B R′ B′` to `R R′ B B′`.
pub fn tensor_choi(a: &ComplexMatrix, ai: usize, ao: usize, b: &ComplexMatrix, bi: usize, bo: usize) -> ComplexMatrix {
    permute_subsystems(&kron(a, b), &[ai, ao, bi, bo], &[0, 2, 1, 3]).expect("consistent dims")
}

/// A completely positive trace-nonincreasing map.
#[derive(Debug, Clone)]
pub struct Subchannel {
    d_in: usize,
    d_out: usize,
    kraus: Option<Vec<ComplexMatrix>>,
    choi: ComplexMatrix,
}

impl Subchannel {
    pub fn from_kraus(kraus: Vec<ComplexMatrix>, d_in: usize, d_out: usize) -> Result<Self> {
        if kraus.is_empty() || kraus.iter().any(|k| k.shape() != (d_out, d_in)) {
            return Err(Error::DimensionMismatch(format!("Kraus operators must all be {d_out}x{d_in}")));
        }
        let excess = crate::hermkernel::max_eig(&(kraus_gram(&kraus) - identity(d_in)))?;
        if excess > CPTP_TOL {
            return Err(Error::InvalidChannel(format!("Kraus operators increase trace (excess {excess:e})")));
        }
        let choi = choi_from_kraus(&kraus, d_in);
        Ok(Self { d_in, d_out, kraus: Some(kraus), choi })
    }

    pub fn from_choi(choi: ComplexMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        validate_cp(&choi, d_in, d_out)?;
        let marg = partial_trace(&choi, &[d_in, d_out], &[0])? * c(d_in as f64, 0.0);
        let excess = crate::hermkernel::max_eig(&(hermitize(&marg) - identity(d_in)))?;
        if excess > CPTP_TOL {
            return Err(Error::InvalidChannel(format!("Choi marginal exceeds I/d_in (excess {excess:e})")));
        }
        Ok(Self { d_in, d_out, kraus: None, choi: hermitize(&choi) })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn kraus(&self) -> Vec<ComplexMatrix> {
        match &self.kraus {
            Some(k) => k.clone(),
            None => choi_to_kraus(&self.choi, self.d_in, self.d_out).expect("validated Choi is PSD"),
        }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        apply_choi(&self.choi, self.d_in, self.d_out, rho)
    }

    pub fn apply_on(&self, rho: &ComplexMatrix, dims: &[usize], factor: usize) -> Result<ComplexMatrix> {
        apply_kraus_on(&self.kraus(), rho, dims, factor)
    }

    /// `s · self` for `s ∈ [0, 1]`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(0.0..=1.0 + CPTP_TOL).contains(&s) {
            return Err(Error::ParamOutOfRange { name: "scale".into(), value: s });
        }
        let kraus = self.kraus.as_ref().map(|ks| ks.iter().map(|k| k * c(s.sqrt(), 0.0)).collect());
        Ok(Self { d_in: self.d_in, d_out: self.d_out, kraus, choi: &self.choi * c(s, 0.0) })
    }

    /// Largest eigenvalue of `Σ K†K` (1 for a channel).
    pub fn max_success(&self) -> Result<f64> {
        let marg = partial_trace(&self.choi, &[self.d_in, self.d_out], &[0])? * c(self.d_in as f64, 0.0);
        crate::hermkernel::max_eig(&hermitize(&marg))
    }

    /// `self ∘ first` for a subchannel or channel `first`.
    pub fn after(&self, first: &Subchannel) -> Result<Subchannel> {
        if first.d_out != self.d_in {
            return Err(Error::DimensionMismatch("composition dimension mismatch".into()));
        }
        let mut ks = Vec::new();
        for a in self.kraus() {
            for b in first.kraus() {
                ks.push(&a * &b);
            }
        }
        Subchannel::from_choi(hermitize(&choi_from_kraus(&ks, first.d_in)), first.d_in, self.d_out)
    }

    /// Largest entry of the Choi operator, used in scale-relative comparisons.
    pub fn choi_scale(&self) -> f64 {
        max_abs(&self.choi)
    }
}

impl From<Channel> for Subchannel {
    fn from(ch: Channel) -> Self {
        Subchannel { d_in: ch.d_in, d_out: ch.d_out, kraus: ch.kraus, choi: ch.choi }
    }
}

/// Applies a map given by Kraus operators to a single-system operator.
pub fn apply_kraus(kraus: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
    kraus.iter().fold(ComplexMatrix::zeros(kraus[0].nrows(), kraus[0].nrows()), |acc, k| acc + k * rho * k.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermkernel::{diag, eigvalsh, ket, max_entangled, projector, unit};
    use crate::random::rng;

    #[test]
    fn identity_choi_is_bell_state() {
        assert!(max_abs_diff(Channel::identity(2).choi(), &max_entangled(2)) < 1e-15);
    }

    #[test]
    fn replacement_choi_is_product() {
        let sigma = diag(&[0.7, 0.3]);
        let ch = Channel::replacement(&sigma, 3).unwrap();
        let expect = kron(&(identity(3) / c(3.0, 0.0)), &sigma);
        assert!(max_abs_diff(ch.choi(), &expect) < 1e-15);
        let rho = projector(&ket(3, 1)) * c(0.5, 0.0);
        assert!(max_abs_diff(&ch.apply(&rho).unwrap(), &(sigma * c(0.5, 0.0))) < 1e-14);
    }

    #[test]
    fn choi_to_kraus_examples() {
        let k = choi_to_kraus(&max_entangled(2), 2, 2).unwrap();
        assert_eq!(k.len(), 1);
        let phase = k[0][(0, 0)];
        assert!(max_abs_diff(&(&k[0] / phase), &identity(2)) < 1e-12);
        let k = choi_to_kraus(&(identity(4) / c(4.0, 0.0)), 2, 2).unwrap();
        assert_eq!(k.len(), 4);
        for op in &k {
            assert_eq!(crate::hermkernel::rank(&(op * op.adjoint()), 1e-9).unwrap(), 1);
        }
    }

    #[test]
    fn kraus_round_trip_on_random_channels() {
        let mut r = rng(3);
        for t in 0..100 {
            let d_in = 1 + t % 3;
            let d_out = 1 + (t / 3) % 3;
            let ch = Channel::random(d_in, d_out, 1 + t % 4, &mut r);
            let back = choi_from_kraus(&choi_to_kraus(ch.choi(), d_in, d_out).unwrap(), d_in);
            assert!(max_abs_diff(&back, ch.choi()) < 1e-9);
        }
    }

    #[test]
    fn rejects_scaled_kraus() {
        let ks = vec![identity(2) * c(1.1, 0.0)];
        assert!(matches!(Channel::from_kraus(ks.clone(), 2, 2), Err(Error::InvalidChannel(_))));
        assert!(matches!(Subchannel::from_kraus(ks, 2, 2), Err(Error::InvalidChannel(_))));
    }

    #[test]
    fn apply_on_middle_factor() {
        let flip = Channel::isometry(crate::hermkernel::pauli_x()).unwrap();
        let rho = kron(&kron(&unit(2, 0, 0), &unit(2, 0, 0)), &unit(3, 2, 2));
        let out = flip.apply_on(&rho, &[2, 2, 3], 1).unwrap();
        let expect = kron(&kron(&unit(2, 0, 0), &unit(2, 1, 1)), &unit(3, 2, 2));
        assert!(max_abs_diff(&out, &expect) < 1e-15);
    }

    #[test]
    fn apply_choi_matches_kraus() {
        let mut r = rng(5);
        let ch = Channel::random(3, 2, 2, &mut r);
        let rho = crate::random::density_matrix(3, 3, &mut r);
        let a = ch.apply(&rho).unwrap();
        let b = apply_choi(ch.choi(), 3, 2, &rho).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn tensor_product_structure() {
        let mut r = rng(9);
        let n = Channel::random(2, 2, 2, &mut r);
        let rep = Channel::replacement(&diag(&[0.5, 0.5]), 2).unwrap();
        let nr = tensor_channels(&n, &rep);
        // R R' B B' → keep R B R'
        let kept = partial_trace(nr.choi(), &[2, 2, 2, 2], &[0, 1, 2]).unwrap();
        let kept = permute_subsystems(&kept, &[2, 2, 2], &[0, 2, 1]).unwrap();
        let expect = kron(n.choi(), &(identity(2) / c(2.0, 0.0)));
        assert!(max_abs_diff(&kept, &expect) < 1e-14);
        let id2 = tensor_channels(&Channel::identity(2), &Channel::identity(2));
        assert!(max_abs_diff(id2.choi(), Channel::identity(4).choi()) < 1e-14);
    }

    #[test]
    fn tensor_choi_matches_kraus_choi() {
        let mut r = rng(1);
        let a = Channel::random(2, 3, 2, &mut r);
        let b = Channel::random(2, 2, 3, &mut r);
        let ab = tensor_channels(&a, &b);
        let from_kraus = choi_from_kraus(ab.stored_kraus().unwrap(), 4);
        assert!(max_abs_diff(&from_kraus, ab.choi()) < 1e-14);
        let e = eigvalsh(ab.choi()).unwrap();
        assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subchannel_scaling_scales_trace() {
        let s = Channel::identity(2).as_subchannel().scaled(0.5).unwrap();
        assert!((s.choi().trace().re - 0.5).abs() < 1e-15);
    }
}
