//! Seeded random states, unitaries and isometries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::hermkernel::{c, normalize, ComplexMatrix, ComplexVector};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Haar-distributed isometry `cols → rows` (`rows ≥ cols`), from the QR
/// decomposition of a Gaussian matrix with the phases of `R`'s diagonal fixed.
pub fn haar_isometry(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = ginibre(rows, cols, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..cols {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / c(d.norm(), 0.0) } else { c(1.0, 0.0) };
        for i in 0..rows {
            q[(i, k)] *= phase;
        }
    }
    q
}

pub fn haar_unitary(d: usize, rng: &mut impl Rng) -> ComplexMatrix {
    haar_isometry(d, d, rng)
}

/// Uniformly random unit vector.
pub fn pure_state(d: usize, rng: &mut impl Rng) -> ComplexVector {
    normalize(&ginibre(d, 1, rng).column(0).into_owned())
}

/// Random density matrix from the induced measure with ancilla dimension `k`
/// (`k ≥ d` gives full rank almost surely).
pub fn density_matrix(d: usize, k: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ginibre(d, k, rng);
    let m = &g * g.adjoint();
    let t = m.trace();
    m / t
}
