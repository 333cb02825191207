//! Coding protocols as supermaps and the conditional error metrics used to grade them.
//!
//! Errors are always conditioned on a conclusive outcome: a subchannel `N′` is
//! judged by `N′/Tr N′`, so multiplying it by a positive constant changes nothing.

mod checks;
mod pea;
mod pna;

pub use checks::{check_nonsignalling, check_replacement_preserving, ns_report, Direction, NSCheckReport, ReplacementFit};
pub use pea::{
    build_pea_supermap, build_teleport, ctc_counterexample, heisenberg_weyl, superdense_lift, teleport_error_bound,
    PEATriple, TeleportProtocol,
};
pub use pna::{build_pna_achiever, pna_normalize, Achiever, PnaNormalization};

use rand::Rng;

use crate::channels::Subchannel;
use crate::error::{Error, Result};
use crate::hermkernel::{c, identity, kron, max_entangled_vector, normalize, projector, ComplexMatrix, ComplexVector};
use crate::random::{pure_state, rng};

/// Conclusive probabilities at or below this make a conditional metric undefined.
pub const INCONCLUSIVE_TOL: f64 = 1e-12;

/// Worst-case conditional error of a classical code: `1 − min_m ⟨m|N′(|m⟩⟨m|)|m⟩ / Tr N′(|m⟩⟨m|)`.
pub fn conditional_error_classical(n: &Subchannel) -> Result<f64> {
    let d = square_dim(n)?;
    let mut worst: f64 = 0.0;
    for m in 0..d {
        let out = n.apply(&crate::hermkernel::unit(d, m, m))?;
        let total = out.trace().re;
        if total <= INCONCLUSIVE_TOL {
            return Err(Error::AllInconclusive(m));
        }
        worst = worst.max(1.0 - out[(m, m)].re / total);
    }
    Ok(worst.max(0.0))
}

/// `Tr[ψ (id_R ⊗ N′)(ψ)] / Tr[(id_R ⊗ N′)(ψ)]` for a state `ψ` on `R ⊗ M`.
pub fn conditional_fidelity(n: &Subchannel, psi: &ComplexMatrix) -> Result<f64> {
    let d = square_dim(n)?;
    if !psi.is_square() || !psi.nrows().is_multiple_of(d) {
        return Err(Error::DimensionMismatch(format!("state of side {} on R ⊗ M with d_M = {d}", psi.nrows())));
    }
    let d_r = psi.nrows() / d;
    let out = n.apply_on(psi, &[d_r, d], 1)?;
    let total = out.trace().re;
    if total <= INCONCLUSIVE_TOL {
        return Err(Error::AllInconclusive(0));
    }
    Ok((psi * &out).trace().re / total)
}

/// Result of the worst-case quantum error search.
#[derive(Debug, Clone)]
pub struct QuantumErrorEstimate {
    /// Largest conditional error found by the restarted search (a lower bound on the true worst case).
    pub heuristic_worst: f64,
    /// Conditional error at the maximally entangled input.
    pub me_value: f64,
    /// The input attaining `heuristic_worst`, a unit vector on `R ⊗ M` with `d_R = d_M`.
    pub worst_state: ComplexVector,
}

/// Searches pure inputs `ψ_RM` (`d_R = d_M` suffices by Schmidt decomposition) for the
/// largest conditional error. Restart 0 starts at the maximally entangled state, the
/// others at seeded random vectors; adding restarts never lowers the result.
pub fn conditional_error_quantum(n: &Subchannel, restarts: usize, seed: u64) -> Result<QuantumErrorEstimate> {
    let d = square_dim(n)?;
    let obj = FidelityObjective::new(n, d);
    let me = max_entangled_vector(d);
    let me_fid = obj.value(&me).ok_or(Error::AllInconclusive(0))?;
    let me_value = (1.0 - me_fid).max(0.0);

    let mut best = (me_value, me.clone());
    let mut r = rng(seed);
    for k in 0..restarts.max(1) {
        let start = if k == 0 { me.clone() } else { pure_state(d * d, &mut r) };
        if let Some((fid, psi)) = obj.descend(start) {
            if 1.0 - fid > best.0 {
                best = (1.0 - fid, psi);
            }
        }
    }
    Ok(QuantumErrorEstimate { heuristic_worst: best.0.max(0.0), me_value, worst_state: best.1 })
}

fn square_dim(n: &Subchannel) -> Result<usize> {
    if n.d_in() != n.d_out() {
        return Err(Error::DimensionMismatch(format!(
            "conditional metrics need d_M = d_M̂, got {} -> {}",
            n.d_in(),
            n.d_out()
        )));
    }
    Ok(n.d_in())
}

/// `f(ψ) = Σ_k |ψ†K̃_kψ|² / (ψ†Bψ · ψ†ψ)` with `K̃_k = I ⊗ K_k` and `B = I ⊗ Σ K†K`.
struct FidelityObjective {
    lifted: Vec<ComplexMatrix>,
    gram: ComplexMatrix,
}

impl FidelityObjective {
    fn new(n: &Subchannel, d: usize) -> Self {
        let ks = n.kraus();
        let id = identity(d);
        let lifted: Vec<ComplexMatrix> = ks.iter().map(|k| kron(&id, k)).collect();
        let gram = kron(&id, &crate::channels::kraus_gram(&ks));
        Self { lifted, gram }
    }

    fn parts(&self, psi: &ComplexVector) -> (f64, f64, f64) {
        let a: f64 = self.lifted.iter().map(|k| psi.dotc(&(k * psi)).norm_sqr()).sum();
        let b = psi.dotc(&(&self.gram * psi)).re;
        (a, b, psi.norm_squared())
    }

    fn value(&self, psi: &ComplexVector) -> Option<f64> {
        let (a, b, nn) = self.parts(psi);
        (b > INCONCLUSIVE_TOL * nn).then(|| a / (b * nn))
    }

    /// Wirtinger gradient `∂f/∂ψ̄`.
    fn gradient(&self, psi: &ComplexVector) -> ComplexVector {
        let (a, b, nn) = self.parts(psi);
        let mut ga = ComplexVector::zeros(psi.len());
        for k in &self.lifted {
            let kpsi = k * psi;
            let z = psi.dotc(&kpsi);
            ga += kpsi * z.conj() + k.adjoint() * psi * z;
        }
        let gb = &self.gram * psi;
        let f = a / (b * nn);
        ga / c(b * nn, 0.0) - (gb / c(b, 0.0) + psi / c(nn, 0.0)) * c(f, 0.0)
    }

    /// Projected gradient descent with backtracking; returns the final fidelity and state.
    fn descend(&self, start: ComplexVector) -> Option<(f64, ComplexVector)> {
        let mut psi = normalize(&start);
        let mut f = self.value(&psi)?;
        let mut step = 1.0;
        for _ in 0..400 {
            let g = self.gradient(&psi);
            let gn = g.norm();
            if gn < 1e-12 {
                break;
            }
            let mut improved = false;
            while step > 1e-12 {
                let cand = normalize(&(&psi - &g * c(step, 0.0)));
                match self.value(&cand) {
                    Some(fc) if fc < f - 1e-4 * step * gn * gn => {
                        psi = cand;
                        f = fc;
                        improved = true;
                        break;
                    }
                    _ => step *= 0.5,
                }
            }
            if !improved {
                break;
            }
            step = (step * 2.0).min(4.0);
        }
        Some((f, psi))
    }
}

/// `|ψ⟩⟨ψ|` for a vector on `R ⊗ M`.
pub fn pure(psi: &ComplexVector) -> ComplexMatrix {
    projector(&normalize(psi))
}

/// A seeded random pure state on `d_R ⊗ d_M`, returned as a density matrix.
pub fn random_pure_input(d_r: usize, d_m: usize, rng: &mut impl Rng) -> ComplexMatrix {
    projector(&pure_state(d_r * d_m, rng))
}
