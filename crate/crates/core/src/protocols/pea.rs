//! Entanglement-assisted protocols: the generic shared-state wiring, the
//! teleportation-based code, and the super-dense lift to classical messages.

use crate::channels::{Channel, Subchannel, Supermap};
use crate::error::{Error, Result};
use crate::hermkernel::{
    c, identity, is_psd, kron, kron_vec, max_entangled, max_entangled_vector, permutation_matrix, permute_subsystems,
    permute_vector, projector, psd_spectrum, psd_sqrt, support_basis, unit_rect, ComplexMatrix, ComplexVector, PSD_TOL,
};
use crate::projective::{encoders_from_dual, DualCertificate};

use super::INCONCLUSIVE_TOL;

/// Shared state `γ` on `A′ ⊗ B′`, encoder `E: M ⊗ A′ → A` and decoder `D: B ⊗ B′ → M̂`.
#[derive(Debug, Clone)]
pub struct PEATriple {
    pub gamma: ComplexMatrix,
    pub d_a_prime: usize,
    pub d_b_prime: usize,
    pub encoder: Channel,
    pub decoder: Subchannel,
}

impl PEATriple {
    pub fn new(
        gamma: ComplexMatrix,
        d_a_prime: usize,
        d_b_prime: usize,
        encoder: Channel,
        decoder: Subchannel,
    ) -> Result<Self> {
        let t = Self { gamma, d_a_prime, d_b_prime, encoder, decoder };
        t.validate()?;
        Ok(t)
    }

    pub fn d_m(&self) -> usize {
        self.encoder.d_in() / self.d_a_prime
    }

    pub fn d_b(&self) -> usize {
        self.decoder.d_in() / self.d_b_prime
    }

    fn validate(&self) -> Result<()> {
        let side = self.d_a_prime * self.d_b_prime;
        if !self.gamma.is_square() || self.gamma.nrows() != side {
            return Err(Error::DimensionMismatch(format!("shared state of side {} for A′B′ = {side}", self.gamma.nrows())));
        }
        if (self.gamma.trace().re - 1.0).abs() > PSD_TOL || !is_psd(&self.gamma, PSD_TOL)? {
            return Err(Error::InvalidChannel("shared state is not a normalized density operator".into()));
        }
        if self.d_a_prime == 0 || !self.encoder.d_in().is_multiple_of(self.d_a_prime) {
            return Err(Error::DimensionMismatch("encoder input is not M ⊗ A′".into()));
        }
        if self.d_b_prime == 0 || !self.decoder.d_in().is_multiple_of(self.d_b_prime) {
            return Err(Error::DimensionMismatch("decoder input is not B ⊗ B′".into()));
        }
        Ok(())
    }
}

/// `ρ_M ↦ (D ∘ N ∘ E)[ρ_M ⊗ γ]` as a supermap in `N`: the pre-processing attaches `γ`
/// and applies `E`, keeping `B′` as memory; the post-processing is `D`.
pub fn build_pea_supermap(t: &PEATriple) -> Result<Supermap> {
    t.validate()?;
    let d_m = t.d_m();
    let d_a = t.encoder.d_out();
    let spec = psd_spectrum(&t.gamma)?;
    let cut = 1e-14 * spec.max();
    let enc = t.encoder.kraus();
    let id_m = identity(d_m);
    let id_bp = identity(t.d_b_prime);
    let mut kraus = Vec::new();
    for (j, &p) in spec.eigenvalues.iter().enumerate() {
        if p <= cut {
            break;
        }
        let g = ComplexMatrix::from_column_slice(t.gamma.nrows(), 1, (spec.vector(j) * c(p.sqrt(), 0.0)).as_slice());
        let attach = kron(&id_m, &g);
        for k in &enc {
            kraus.push(kron(k, &id_bp) * &attach);
        }
    }
    let pre = Channel::from_kraus(kraus, d_m, d_a * t.d_b_prime)?;
    Supermap::new(pre, t.decoder.clone(), d_a, t.d_b())
}

/// The triple sharing `Φ_{A′B′}` (dimension `d`) whose encoder discards the message and
/// forwards `A′`, and whose decoder outputs `|1⟩` on a qubit `M̂` after projecting `BB′`
/// onto `Φ`. It postselects Bob's input onto Alice's output, so it signals from Bob to Alice.
pub fn ctc_counterexample(d: usize) -> Result<PEATriple> {
    let d_m = 2;
    let enc: Vec<ComplexMatrix> = (0..d_m)
        .map(|m| kron(&unit_rect(1, d_m, 0, m), &identity(d)))
        .collect();
    let phi = max_entangled_vector(d);
    let dec = unit_rect(d_m, 1, 1, 0) * bra(&phi);
    PEATriple::new(
        max_entangled(d),
        d,
        d,
        Channel::from_kraus(enc, d_m * d, d)?,
        Subchannel::from_kraus(vec![dec], d * d, d_m)?,
    )
}

/// Encoders, test and message size of the teleportation-based code.
///
/// `o` acts on `B ⊗ B₂′`, with `B₂′` holding Bob's half of the flag pair.
#[derive(Debug, Clone)]
pub struct TeleportProtocol {
    pub d_m: usize,
    pub p_enc: Channel,
    pub q_enc: Channel,
    pub o: ComplexMatrix,
}

impl TeleportProtocol {
    pub fn new(d_m: usize, p_enc: Channel, q_enc: Channel, o: ComplexMatrix) -> Result<Self> {
        if p_enc.d_in() != q_enc.d_in() || p_enc.d_out() != q_enc.d_out() {
            return Err(Error::DimensionMismatch("encoders of different shape".into()));
        }
        let d_b = p_enc.d_in();
        if !o.is_square() || o.nrows() != d_b * d_b {
            return Err(Error::DimensionMismatch(format!("test of side {} for B ⊗ B₂′ = {}", o.nrows(), d_b * d_b)));
        }
        if !is_psd(&o, PSD_TOL)? || !is_psd(&(identity(o.nrows()) - &o), PSD_TOL)? {
            return Err(Error::InvalidChannel("test operator is not between 0 and I".into()));
        }
        if d_m == 0 {
            return Err(Error::DimensionMismatch("message dimension must be positive".into()));
        }
        Ok(Self { d_m, p_enc, q_enc, o })
    }

    /// Encoders and test read off a dual certificate of the projective mutual information.
    pub fn from_dual(n: &Channel, d_m: usize, cert: &DualCertificate, tol: f64) -> Result<Self> {
        let (p_enc, q_enc, o_tb) = encoders_from_dual(n, cert, tol)?;
        let d_b = n.d_out();
        let o = permute_subsystems(&o_tb, &[d_b, d_b], &[1, 0])?;
        Self::new(d_m, p_enc, q_enc, o)
    }

    /// `Tr[O Φ^{N∘P_enc}]` and `Tr[O Φ^{N∘Q_enc}]`.
    pub fn flag_overlaps(&self, n: &Channel) -> Result<(f64, f64)> {
        let d_b = n.d_out();
        if self.p_enc.d_out() != n.d_in() || self.p_enc.d_in() != d_b {
            return Err(Error::DimensionMismatch("encoders do not fit the channel".into()));
        }
        let o_tb = permute_subsystems(&self.o, &[d_b, d_b], &[1, 0])?;
        let rp = (&o_tb * n.after(&self.p_enc)?.choi()).trace().re;
        let rq = (&o_tb * n.after(&self.q_enc)?.choi()).trace().re;
        Ok((rp, rq))
    }
}

/// The teleportation-based code as a supermap in the channel.
///
/// Shared state `Φ_{A₁′B₁′} ⊗ Φ_{A₂′B₂′}` with `d_{A₁′} = d_M` and `d_{A₂′} = d_B`.
/// Alice measures `{Φ_{MA₁′}, I − Φ}` and feeds `A₂′` through `P_enc` on success and
/// `Q_enc` otherwise. Bob measures `{O, I − O}` on `B B₂′` and on `O` passes `B₁′` out.
pub fn build_teleport(n: &Channel, proto: &TeleportProtocol) -> Result<Supermap> {
    let (d_a, d_b, d_m) = (n.d_in(), n.d_out(), proto.d_m);
    if proto.p_enc.d_in() != d_b || proto.p_enc.d_out() != d_a {
        return Err(Error::DimensionMismatch(format!(
            "encoders are {}->{}, need {d_b}->{d_a}",
            proto.p_enc.d_in(),
            proto.p_enc.d_out()
        )));
    }
    // γ on (A₁′ A₂′)(B₁′ B₂′)
    let pair = kron_vec(&max_entangled_vector(d_m), &max_entangled_vector(d_b));
    let gamma = projector(&permute_vector(&pair, &[d_m, d_m, d_b, d_b], &[0, 2, 1, 3])?);

    // encoder on M A₁′ A₂′
    let bell = bra(&max_entangled_vector(d_m));
    let fail_basis = support_basis(&(identity(d_m * d_m) - max_entangled(d_m)), 1e-9)?;
    let mut enc = Vec::new();
    for k in proto.p_enc.kraus() {
        enc.push(kron(&bell, &k));
    }
    for j in 0..fail_basis.ncols() {
        let row = bra(&fail_basis.column(j).into_owned());
        for k in proto.q_enc.kraus() {
            enc.push(kron(&row, &k));
        }
    }
    let encoder = Channel::from_kraus(enc, d_m * d_m * d_b, d_a)?;

    // decoder on B B₁′ B₂′: reorder to B B₂′ B₁′, apply √O, keep B₁′
    let swap = permutation_matrix(&[d_b, d_m, d_b], &[0, 2, 1])?;
    let root = psd_sqrt(&proto.o)?;
    let id_m = identity(d_m);
    let dec: Vec<ComplexMatrix> = (0..d_b * d_b).map(|j| kron(&root.rows(j, 1).into_owned(), &id_m) * &swap).collect();
    let decoder = Subchannel::from_kraus(dec, d_b * d_m * d_b, d_m)?;

    build_pea_supermap(&PEATriple::new(gamma, d_m * d_b, d_m * d_b, encoder, decoder)?)
}

/// Upper bound `((1/(d_M²−1))·Tr[OΦ^{N∘P}]/Tr[OΦ^{N∘Q}] + 1)^{-1}` on the conditional
/// quantum error of the teleportation-based code.
pub fn teleport_error_bound(n: &Channel, proto: &TeleportProtocol) -> Result<f64> {
    let (rp, rq) = proto.flag_overlaps(n)?;
    if rp <= INCONCLUSIVE_TOL && rq <= INCONCLUSIVE_TOL {
        return Err(Error::AllInconclusive(0));
    }
    let others = (proto.d_m * proto.d_m - 1) as f64;
    if others == 0.0 || rq <= 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (rp / (rq * others) + 1.0))
}

/// `X^a Z^b` on `C^d` with `m = a·d + b`.
pub fn heisenberg_weyl(d: usize, m: usize) -> ComplexMatrix {
    let (a, b) = (m / d, m % d);
    ComplexMatrix::from_fn(d, d, |i, j| {
        if i == (j + a) % d {
            let angle = 2.0 * std::f64::consts::PI * (b * j % d) as f64 / d as f64;
            c(angle.cos(), angle.sin())
        } else {
            c(0.0, 0.0)
        }
    })
}

/// `⟨v|` as a one-row matrix.
fn bra(v: &ComplexVector) -> ComplexMatrix {
    ComplexMatrix::from_fn(1, v.len(), |_, j| v[j].conj())
}

fn bell_vector(d: usize, m: usize) -> ComplexVector {
    kron(&heisenberg_weyl(d, m), &identity(d)) * max_entangled_vector(d)
}

/// Classical code on `d_M²` messages from a quantum one: message `m` applies the
/// Heisenberg–Weyl operator `W^m` to half of a fresh `Φ_{A′B′}`, which is then sent
/// with the quantum code; Bob measures the output and `B′` in the Bell basis.
pub fn superdense_lift(theta: &Supermap) -> Result<Supermap> {
    let d = theta.d_m();
    if theta.d_mhat() != d {
        return Err(Error::DimensionMismatch(format!("quantum code maps {d} to {} dimensions", theta.d_mhat())));
    }
    let msgs = d * d;
    let id_d = identity(d);
    let bells: Vec<ComplexVector> = (0..msgs).map(|m| bell_vector(d, m)).collect();

    let mut pre = Vec::new();
    for (m, v) in bells.iter().enumerate() {
        let v = ComplexMatrix::from_column_slice(d * d, 1, v.as_slice());
        for l in theta.pre().kraus() {
            pre.push(kron(&l, &id_d) * &v * unit_rect(1, msgs, 0, m));
        }
    }
    let pre = Channel::from_kraus(pre, msgs, theta.d_a() * theta.d_e() * d)?;

    let mut post = Vec::new();
    for (m, v) in bells.iter().enumerate() {
        let row = unit_rect(msgs, 1, m, 0) * bra(v);
        for k in theta.post().kraus() {
            post.push(&row * kron(&k, &id_d));
        }
    }
    let post = Subchannel::from_kraus(post, theta.d_b() * theta.d_e() * d, msgs)?;
    Supermap::new(pre, post, theta.d_a(), theta.d_b())
}
