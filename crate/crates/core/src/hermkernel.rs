//! Dense complex Hermitian linear algebra.
//!
//! Everything here works on `DMatrix<Complex64>`; dimensions stay below a few
//! hundred so no structure is exploited.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Entrywise tolerance of the Hermiticity check.
pub const HERM_TOL: f64 = 1e-10;
/// Relative tolerance of the PSD check: `λ_min ≥ −PSD_TOL · λ_max`.
pub const PSD_TOL: f64 = 1e-9;
/// Relative rank cutoff for supports and pseudo-inverses.
pub const RANK_TOL: f64 = 1e-9;

const EIG_MAX_ITER: usize = 10_000;

/// Spectral decomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, stored as columns in the order of `eigenvalues`.
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, k: usize) -> ComplexVector {
        self.eigenvectors.column(k).into_owned()
    }

    /// `V f(Λ) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let s = f(lam);
            for i in 0..n {
                scaled[(i, k)] *= s;
            }
        }
        &scaled * self.eigenvectors.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|x| x)
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn zeros(r: usize, c: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(r, c)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    let mut m = zeros(n, n);
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = c(*v, 0.0);
    }
    m
}

/// Computational basis vector `|i⟩` in dimension `d`.
pub fn ket(d: usize, i: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(d);
    v[i] = c(1.0, 0.0);
    v
}

/// `|v⟩⟨v|`.
pub fn projector(v: &ComplexVector) -> ComplexMatrix {
    v * v.adjoint()
}

/// `|i⟩⟨j|` in dimension `d`.
pub fn unit(d: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = zeros(d, d);
    m[(i, j)] = c(1.0, 0.0);
    m
}

/// `|i⟩⟨j|` as a `rows × cols` matrix.
pub fn unit_rect(rows: usize, cols: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = zeros(rows, cols);
    m[(i, j)] = c(1.0, 0.0);
    m
}

/// Normalized maximally entangled vector `Σ_i |ii⟩/√d`.
pub fn max_entangled_vector(d: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(d * d);
    let s = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        v[i * d + i] = c(s, 0.0);
    }
    v
}

/// Maximally entangled state `Φ` on two `d`-dimensional factors.
pub fn max_entangled(d: usize) -> ComplexMatrix {
    projector(&max_entangled_vector(d))
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> ComplexMatrix {
    diag(&[1.0, -1.0])
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.trace()
}

pub fn real_trace(m: &ComplexMatrix) -> f64 {
    m.trace().re
}

/// `Tr[A B]` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let mut s = c(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |M − N|` entrywise.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// `max |M[i,j] − conj(M[j,i])|`, or `+∞` for non-square input.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            d = d.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    d
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    hermiticity_defect(m) <= tol * max_abs(m).max(1.0)
}

/// `(M + M†)/2`.
pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Full spectral decomposition of a Hermitian matrix.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eig_hermitian needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_hermitian(m, HERM_TOL) {
        return Err(Error::NotHermitian(hermiticity_defect(m)));
    }
    eig_hermitized(&hermitize(m))
}

fn eig_hermitized(h: &ComplexMatrix) -> Result<Spectrum> {
    let n = h.nrows();
    if n == 0 {
        return Ok(Spectrum { eigenvalues: vec![], eigenvectors: zeros(0, 0) });
    }
    let fast = SymmetricEigen::try_new(h.clone(), f64::EPSILON, EIG_MAX_ITER)
        .filter(|se| se.eigenvalues.iter().all(|x| x.is_finite()) && se.eigenvectors.iter().all(|z| z.is_finite()));
    let (values, vectors): (Vec<f64>, ComplexMatrix) = match fast {
        Some(se) => (se.eigenvalues.iter().copied().collect(), se.eigenvectors),
        // the tridiagonal route occasionally yields NaN on highly degenerate inputs
        None => jacobi_eigen(h)?,
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let eigenvalues = order.iter().map(|&k| values[k]).collect();
    let mut eigenvectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &vectors.column(src));
    }
    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// Cyclic complex Jacobi diagonalization of a Hermitian matrix (unsorted).
fn jacobi_eigen(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = h.nrows();
    let mut a = h.clone();
    let mut v = identity(n);
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|p| (p + 1..n).map(move |q| (p, q))).map(|(p, q)| a[(p, q)].norm_sqr()).sum();
        if off <= 1e-32 * scale {
            let values = (0..n).map(|i| a[(i, i)].re).collect();
            return Ok((values, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                // phase-fix the pair to a real symmetric 2x2 block, then rotate
                let phase = apq / c(r, 0.0);
                let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                let (upp, upq) = (c(cs, 0.0), c(sn, 0.0));
                let (uqp, uqq) = (-phase.conj() * sn, phase.conj() * cs);
                for k in 0..n {
                    let (x, y) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = x * upp + y * uqp;
                    a[(k, q)] = x * upq + y * uqq;
                }
                for k in 0..n {
                    let (x, y) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = upp.conj() * x + uqp.conj() * y;
                    a[(q, k)] = upq.conj() * x + uqq.conj() * y;
                }
                for k in 0..n {
                    let (x, y) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = x * upp + y * uqp;
                    v[(k, q)] = x * upq + y * uqq;
                }
            }
        }
    }
    Err(Error::NoConvergence)
}

/// Eigenvalues only, descending.
pub fn eigvalsh(m: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(eig_hermitian(m)?.eigenvalues)
}

pub fn max_eig(m: &ComplexMatrix) -> Result<f64> {
    Ok(eig_hermitian(m)?.max())
}

pub fn min_eig(m: &ComplexMatrix) -> Result<f64> {
    Ok(eig_hermitian(m)?.min())
}

/// `λ_min ≥ −tol · max(λ_max, 0)` for a Hermitian matrix.
pub fn is_psd(m: &ComplexMatrix, tol: f64) -> Result<bool> {
    let s = eig_hermitian(m)?;
    Ok(s.min() >= -tol * s.max().max(0.0))
}

/// Spectrum of a matrix expected to be PSD; errors with `NotPsd` otherwise.
pub fn psd_spectrum(m: &ComplexMatrix) -> Result<Spectrum> {
    let s = eig_hermitian(m)?;
    if s.min() < -PSD_TOL * s.max().max(0.0) {
        return Err(Error::NotPsd(s.min()));
    }
    Ok(s)
}

fn rank_cutoff(s: &Spectrum, rank_tol: f64) -> f64 {
    rank_tol * s.max().max(0.0)
}

/// Number of eigenvalues above `rank_tol · λ_max`.
pub fn rank(m: &ComplexMatrix, rank_tol: f64) -> Result<usize> {
    let s = psd_spectrum(m)?;
    let cut = rank_cutoff(&s, rank_tol);
    Ok(s.eigenvalues.iter().filter(|&&x| x > cut).count())
}

/// Orthonormal basis (as columns) of the support of a PSD matrix.
pub fn support_basis(m: &ComplexMatrix, rank_tol: f64) -> Result<ComplexMatrix> {
    let s = psd_spectrum(m)?;
    let cut = rank_cutoff(&s, rank_tol);
    let r = s.eigenvalues.iter().filter(|&&x| x > cut).count();
    Ok(s.eigenvectors.columns(0, r).into_owned())
}

/// Projector onto the span of eigenvectors with eigenvalue above `rank_tol · λ_max`.
pub fn support_projector(m: &ComplexMatrix, rank_tol: f64) -> Result<ComplexMatrix> {
    let s = psd_spectrum(m)?;
    let cut = rank_cutoff(&s, rank_tol);
    Ok(s.map(|x| if x > cut { 1.0 } else { 0.0 }))
}

/// `M^{-1/2}` on the support, zero elsewhere.
pub fn pseudo_inv_sqrt(m: &ComplexMatrix, rank_tol: f64) -> Result<ComplexMatrix> {
    let s = psd_spectrum(m)?;
    let cut = rank_cutoff(&s, rank_tol);
    Ok(s.map(|x| if x > cut { 1.0 / x.sqrt() } else { 0.0 }))
}

/// `M^{-1}` on the support, zero elsewhere.
pub fn pseudo_inv(m: &ComplexMatrix, rank_tol: f64) -> Result<ComplexMatrix> {
    let s = psd_spectrum(m)?;
    let cut = rank_cutoff(&s, rank_tol);
    Ok(s.map(|x| if x > cut { 1.0 / x } else { 0.0 }))
}

/// Principal square root of a PSD matrix (negative round-off clipped).
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let s = psd_spectrum(m)?;
    Ok(s.map(|x| x.max(0.0).sqrt()))
}

/// Projection onto the PSD cone in Frobenius norm.
pub fn psd_part(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(eig_hermitian(m)?.map(|x| x.max(0.0)))
}

/// Lower-triangular `L` with `M = L L†` and positive real diagonal, or `None`
/// if `M` is not (numerically) positive definite.
pub fn cholesky_hermitian(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    let n = m.nrows();
    let mut l = zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = c(djj, 0.0);
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    Ok(eig_hermitian(m)?.eigenvalues.iter().map(|x| x.abs()).sum())
}

/// Kronecker product; `(A⊗B)[(i·rB+k),(j·cB+l)] = A[i,j]·B[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Kronecker product of a list of matrices, left to right.
pub fn kron_all(ms: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut out = identity(1);
    for m in ms {
        out = kron(&out, m);
    }
    out
}

pub fn kron_vec(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    a.kronecker(b)
}

fn check_dims(side: usize, dims: &[usize]) -> Result<()> {
    let prod: usize = dims.iter().product();
    if prod != side {
        return Err(Error::DimensionMismatch(format!(
            "subsystem dims {dims:?} multiply to {prod}, matrix side is {side}"
        )));
    }
    Ok(())
}

/// Splits a flat index into digits of the given mixed radix (most significant first).
pub fn digits(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
    out
}

/// Inverse of [`digits`].
pub fn flat_index(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (d, n)| acc * n + d)
}

/// Traces out every factor whose index is not in `keep`. The kept factors
/// stay in their original relative order.
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("partial_trace needs a square matrix".into()));
    }
    check_dims(m.nrows(), dims)?;
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch(format!("keep index {bad} out of range for {} factors", dims.len())));
    }
    let kept: Vec<usize> = (0..dims.len()).filter(|i| keep.contains(i)).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let kdims: Vec<usize> = kept.iter().map(|&i| dims[i]).collect();
    let tdims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let dk: usize = kdims.iter().product();
    let dt: usize = tdims.iter().product();

    // full[k * dt + t] = flat index in the original ordering
    let mut full = vec![0usize; dk * dt];
    let mut dig = vec![0usize; dims.len()];
    for k in 0..dk {
        let kd = digits(k, &kdims);
        for t in 0..dt {
            let td = digits(t, &tdims);
            for (pos, &f) in kept.iter().enumerate() {
                dig[f] = kd[pos];
            }
            for (pos, &f) in traced.iter().enumerate() {
                dig[f] = td[pos];
            }
            full[k * dt + t] = flat_index(&dig, dims);
        }
    }
    let mut out = zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut s = c(0.0, 0.0);
            for t in 0..dt {
                s += m[(full[i * dt + t], full[j * dt + t])];
            }
            out[(i, j)] = s;
        }
    }
    Ok(out)
}

/// Index map for reordering tensor factors: new factor `i` is old factor `perm[i]`.
/// Returns `old_index[new_index]`.
fn permutation_index_map(dims: &[usize], perm: &[usize]) -> Result<Vec<usize>> {
    let n = dims.len();
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::DimensionMismatch(format!("{perm:?} is not a permutation of {n} factors")));
    }
    let ndims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let total: usize = dims.iter().product();
    let mut map = vec![0usize; total];
    let mut old = vec![0usize; n];
    for (new, slot) in map.iter_mut().enumerate() {
        let nd = digits(new, &ndims);
        for i in 0..n {
            old[perm[i]] = nd[i];
        }
        *slot = flat_index(&old, dims);
    }
    Ok(map)
}

/// Permutation unitary `U` with `U (x_0 ⊗ … ⊗ x_{n-1}) = x_{perm[0]} ⊗ … ⊗ x_{perm[n-1]}`.
pub fn permutation_matrix(dims: &[usize], perm: &[usize]) -> Result<ComplexMatrix> {
    let map = permutation_index_map(dims, perm)?;
    let mut u = zeros(map.len(), map.len());
    for (new, &old) in map.iter().enumerate() {
        u[(new, old)] = c(1.0, 0.0);
    }
    Ok(u)
}

/// Reorders the tensor factors of an operator: new factor `i` is old factor `perm[i]`.
pub fn permute_subsystems(m: &ComplexMatrix, dims: &[usize], perm: &[usize]) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("permute_subsystems needs a square matrix".into()));
    }
    check_dims(m.nrows(), dims)?;
    let map = permutation_index_map(dims, perm)?;
    let n = map.len();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| m[(map[i], map[j])]))
}

/// Same reordering applied to a vector.
pub fn permute_vector(v: &ComplexVector, dims: &[usize], perm: &[usize]) -> Result<ComplexVector> {
    check_dims(v.len(), dims)?;
    let map = permutation_index_map(dims, perm)?;
    Ok(ComplexVector::from_fn(map.len(), |i, _| v[map[i]]))
}

/// Partial transpose on the listed factors.
pub fn partial_transpose(m: &ComplexMatrix, dims: &[usize], factors: &[usize]) -> Result<ComplexMatrix> {
    check_dims(m.nrows(), dims)?;
    let n = m.nrows();
    let mut out = zeros(n, n);
    for i in 0..n {
        let di = digits(i, dims);
        for j in 0..n {
            let dj = digits(j, dims);
            let (mut a, mut b) = (di.clone(), dj.clone());
            for &f in factors {
                std::mem::swap(&mut a[f], &mut b[f]);
            }
            out[(flat_index(&a, dims), flat_index(&b, dims))] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Column-stacking helper: `|v⟩ ↦ Σ v_{ij}|i⟩⟨j|` for a vector on `A⊗B`, giving a `d_A × d_B` matrix.
pub fn unvec(v: &ComplexVector, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |i, j| v[i * cols + j])
}

/// Inverse of [`unvec`].
pub fn vec_of(m: &ComplexMatrix) -> ComplexVector {
    let (r, cc) = m.shape();
    ComplexVector::from_fn(r * cc, |k, _| m[(k / cc, k % cc)])
}

/// Unit-normalizes a vector (zero vectors are returned unchanged).
pub fn normalize(v: &ComplexVector) -> ComplexVector {
    let n = v.norm();
    if n == 0.0 {
        v.clone()
    } else {
        v / c(n, 0.0)
    }
}
