//! Probabilistic supermaps in decomposed form and their bipartite Choi operators.
//!
//! A supermap `Θ` takes a channel `N: A → B` to the subchannel
//! `post ∘ (N ⊗ id_E) ∘ pre` from `M` to `M̂`, with `pre: M → A ⊗ E` a channel
//! and `post: B ⊗ E → M̂` a subchannel. Viewed with `A` and `B` left open it is a
//! bipartite subchannel `MB → AM̂`, whose Choi operator is ordered `M B A M̂`.

use super::{Channel, Subchannel};
use crate::error::{Error, Result};
use crate::hermkernel::{
    c, hermitize, identity, kron, max_abs_diff, max_entangled, partial_trace, permute_subsystems, pseudo_inv_sqrt,
    psd_sqrt, unit_rect, ComplexMatrix, RANK_TOL,
};

/// Tolerance used when realizing a superchannel from its bipartite Choi operator.
const REALIZE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Supermap {
    pre: Channel,
    post: Subchannel,
    d_m: usize,
    d_a: usize,
    d_b: usize,
    d_mhat: usize,
    d_e: usize,
}

impl Supermap {
    /// `pre: M → A ⊗ E` (output ordered `A, E`), `post: B ⊗ E → M̂` (input ordered `B, E`).
    pub fn new(pre: Channel, post: Subchannel, d_a: usize, d_b: usize) -> Result<Self> {
        let d_m = pre.d_in();
        if d_a == 0 || !pre.d_out().is_multiple_of(d_a) {
            return Err(Error::DimensionMismatch(format!("pre output {} is not a multiple of d_A = {d_a}", pre.d_out())));
        }
        let d_e = pre.d_out() / d_a;
        if post.d_in() != d_b * d_e {
            return Err(Error::DimensionMismatch(format!(
                "post input {} differs from d_B·d_E = {}",
                post.d_in(),
                d_b * d_e
            )));
        }
        let d_mhat = post.d_out();
        Ok(Self { pre, post, d_m, d_a, d_b, d_mhat, d_e })
    }

    /// The supermap returning its argument unchanged (`pre = id`, `post = id`, trivial memory).
    pub fn identity(d: usize) -> Self {
        Self::new(Channel::identity(d), Channel::identity(d).into(), d, d).expect("identity dims")
    }

    /// Supermap that ignores its input channel: discards `M` and prepares `I/d_A`,
    /// then discards `B` and prepares `I/d_M̂`.
    pub fn completely_depolarizing(d_m: usize, d_a: usize, d_b: usize, d_mhat: usize) -> Self {
        let s = 1.0 / (d_a as f64).sqrt();
        let pre: Vec<ComplexMatrix> = (0..d_a)
            .flat_map(|a| (0..d_m).map(move |m| unit_rect(d_a, d_m, a, m) * c(s, 0.0)))
            .collect();
        let t = 1.0 / (d_mhat as f64).sqrt();
        let post: Vec<ComplexMatrix> = (0..d_mhat)
            .flat_map(|o| (0..d_b).map(move |b| unit_rect(d_mhat, d_b, o, b) * c(t, 0.0)))
            .collect();
        Self::new(
            Channel::from_kraus(pre, d_m, d_a).expect("discard-and-prepare"),
            Subchannel::from_kraus(post, d_b, d_mhat).expect("discard-and-prepare"),
            d_a,
            d_b,
        )
        .expect("consistent dims")
    }

    pub fn pre(&self) -> &Channel {
        &self.pre
    }

    pub fn post(&self) -> &Subchannel {
        &self.post
    }

    pub fn d_m(&self) -> usize {
        self.d_m
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn d_mhat(&self) -> usize {
        self.d_mhat
    }

    pub fn d_e(&self) -> usize {
        self.d_e
    }

    /// `Θ{N} = post ∘ (N ⊗ id_E) ∘ pre`.
    pub fn apply(&self, n: &Channel) -> Result<Subchannel> {
        apply_supermap(self, n)
    }

    pub fn to_bipartite(&self) -> BipartiteSubchannelChoi {
        supermap_to_bipartite(self)
    }

    /// The same supermap with its post-processing multiplied by `s ∈ [0, 1]`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.pre.clone(), self.post.scaled(s)?, self.d_a, self.d_b)
    }

    /// Appends a further subchannel after the post-processing.
    pub fn then_post(&self, after: &Subchannel) -> Result<Self> {
        Self::new(self.pre.clone(), after.after(&self.post)?, self.d_a, self.d_b)
    }

    /// Realizes a deterministic supermap (superchannel) from its bipartite Choi operator.
    ///
    /// Requires `Tr_M̂ J = Y_{MA} ⊗ I_B` with `Tr_A Y = I_M` (unnormalized `J`).
    /// The pre-processing is the isometry `|m⟩ ↦ Σ_a |a⟩_A ⊗ √(Yᵀ)|m,a⟩_E` with memory
    /// `E = M ⊗ A`; the post-processing has Choi `(I ⊗ Y^{-1/2} ⊗ I) J (I ⊗ Y^{-1/2} ⊗ I)`.
    pub fn from_bipartite(bp: &BipartiteSubchannelChoi) -> Result<Self> {
        let BipartiteSubchannelChoi { d_m, d_b, d_a, d_mhat, .. } = *bp;
        let dims = [d_m, d_b, d_a, d_mhat];
        let j = bp.unnormalized();
        let y = partial_trace(&j, &dims, &[0, 2])? / c(d_b as f64, 0.0);
        let no_mhat = partial_trace(&j, &dims, &[0, 1, 2])?;
        let expect = permute_subsystems(&kron(&y, &identity(d_b)), &[d_m, d_a, d_b], &[0, 2, 1])?;
        let scale = crate::hermkernel::max_abs(&no_mhat).max(1.0);
        let dev = max_abs_diff(&no_mhat, &expect);
        if dev > REALIZE_TOL * scale {
            return Err(Error::AdmissibilityFailure(format!("Bob-to-Alice signalling of size {dev:e}")));
        }
        let ty = partial_trace(&y, &[d_m, d_a], &[0])?;
        let dev = max_abs_diff(&ty, &identity(d_m));
        if dev > REALIZE_TOL * scale {
            return Err(Error::AdmissibilityFailure(format!("not trace preserving (deviation {dev:e})")));
        }

        let f = psd_sqrt(&hermitize(&y.transpose()))?;
        let d_e = d_m * d_a;
        let v = ComplexMatrix::from_fn(d_a * d_e, d_m, |row, m| {
            let (a, e) = (row / d_e, row % d_e);
            f[(e, m * d_a + a)]
        });
        let pre = Channel::from_kraus(vec![v], d_m, d_a * d_e).map_err(|e| Error::AdmissibilityFailure(e.to_string()))?;

        let jp = permute_subsystems(&j, &dims, &[1, 0, 2, 3])?;
        let w = kron(&kron(&identity(d_b), &pseudo_inv_sqrt(&hermitize(&y), RANK_TOL)?), &identity(d_mhat));
        let k = hermitize(&(&w * jp * &w)) / c((d_b * d_e) as f64, 0.0);
        let post = Subchannel::from_choi(k, d_b * d_e, d_mhat).map_err(|e| Error::AdmissibilityFailure(e.to_string()))?;
        Self::new(pre, post, d_a, d_b)
    }
}

/// Normalized Choi operator of `Θ{N}` as a map `M → M̂`.
pub fn apply_supermap(theta: &Supermap, n: &Channel) -> Result<Subchannel> {
    if n.d_in() != theta.d_a || n.d_out() != theta.d_b {
        return Err(Error::DimensionMismatch(format!(
            "supermap expects a {}->{} channel, got {}->{}",
            theta.d_a,
            theta.d_b,
            n.d_in(),
            n.d_out()
        )));
    }
    let (d_m, d_e) = (theta.d_m, theta.d_e);
    let phi = max_entangled(d_m);
    let x = theta.pre.apply_on(&phi, &[d_m, d_m], 1)?;
    let x = n.apply_on(&x, &[d_m, theta.d_a, d_e], 1)?;
    let x = theta.post.apply_on(&x, &[d_m, theta.d_b * d_e], 1)?;
    Subchannel::from_choi(hermitize(&x), d_m, theta.d_mhat)
}

/// Choi operator of the bipartite subchannel `MB → AM̂` obtained by wiring
/// `pre` and `post` through the memory.
pub fn supermap_to_bipartite(theta: &Supermap) -> BipartiteSubchannelChoi {
    let (d_m, d_a, d_b, d_e) = (theta.d_m, theta.d_a, theta.d_b, theta.d_e);
    // factors R_M M R_B B
    let phi = kron(&max_entangled(d_m), &max_entangled(d_b));
    let x = theta.pre.apply_on(&phi, &[d_m, d_m, d_b, d_b], 1).expect("dims");
    // R_M A E R_B B → R_M R_B A B E
    let x = permute_subsystems(&x, &[d_m, d_a, d_e, d_b, d_b], &[0, 3, 1, 4, 2]).expect("dims");
    let x = theta.post.apply_on(&x, &[d_m, d_b, d_a, d_b * d_e], 3).expect("dims");
    BipartiteSubchannelChoi { choi: hermitize(&x), d_m, d_b, d_a, d_mhat: theta.d_mhat }
}

/// Normalized Choi operator of a bipartite map `M ⊗ B → A ⊗ M̂`, factors ordered `M B A M̂`.
#[derive(Debug, Clone)]
pub struct BipartiteSubchannelChoi {
    pub choi: ComplexMatrix,
    pub d_m: usize,
    pub d_b: usize,
    pub d_a: usize,
    pub d_mhat: usize,
}

impl BipartiteSubchannelChoi {
    pub fn dims(&self) -> [usize; 4] {
        [self.d_m, self.d_b, self.d_a, self.d_mhat]
    }

    /// `d_M d_B · choi`.
    pub fn unnormalized(&self) -> ComplexMatrix {
        &self.choi * c((self.d_m * self.d_b) as f64, 0.0)
    }

    /// Applies the bipartite map to an operator on `M ⊗ B`; output on `A ⊗ M̂`.
    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        super::apply_choi(&self.choi, self.d_m * self.d_b, self.d_a * self.d_mhat, x)
    }

    /// Link product with a channel `A → B`: the normalized Choi operator of the
    /// resulting map `M → M̂`, `d_A d_B · Tr_{BA}[Φ_Θ̂ (I ⊗ (Φ^N_{BA})ᵀ ⊗ I)]`.
    pub fn contract(&self, n: &Channel) -> Result<ComplexMatrix> {
        if n.d_in() != self.d_a || n.d_out() != self.d_b {
            return Err(Error::DimensionMismatch("channel does not fit the bipartite map".into()));
        }
        let nb = permute_subsystems(n.choi(), &[self.d_a, self.d_b], &[1, 0])?.transpose();
        let op = kron(&kron(&identity(self.d_m), &nb), &identity(self.d_mhat));
        let prod = &self.choi * op;
        let out = partial_trace(&prod, &self.dims(), &[0, 3])?;
        Ok(out * c((self.d_a * self.d_b) as f64, 0.0))
    }

    /// Entrywise combination `a·self + b·other` of two bipartite maps of equal shape.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch("bipartite maps of different shape".into()));
        }
        Ok(Self {
            choi: &self.choi * c(a, 0.0) + &other.choi * c(b, 0.0),
            d_m: self.d_m,
            d_b: self.d_b,
            d_a: self.d_a,
            d_mhat: self.d_mhat,
        })
    }
}
