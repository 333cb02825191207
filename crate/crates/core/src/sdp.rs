//! A small log-barrier solver for linear matrix inequalities.
//!
//! Minimizes `cᵀx` over real `x` subject to `F_k(x) = G_k + Σ_i x_i H_{k,i} ≻ 0`,
//! with all `G_k`, `H_{k,i}` Hermitian. Problems here have tens of variables and
//! blocks of side at most a few dozen, so everything is dense and each Newton
//! step forms the full Hessian. A caller-supplied monitor sees every iterate and
//! may stop the solve early, which is how feasibility questions are decided
//! without running to full precision.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hermkernel::{c, cholesky_hermitian, ComplexMatrix};

/// One block `G + Σ x_i H_i ≻ 0`.
#[derive(Debug, Clone)]
pub struct Lmi {
    pub constant: ComplexMatrix,
    pub coeffs: Vec<ComplexMatrix>,
}

impl Lmi {
    pub fn eval(&self, x: &[f64]) -> ComplexMatrix {
        let mut f = self.constant.clone();
        for (h, &xi) in self.coeffs.iter().zip(x) {
            if xi != 0.0 {
                f += h * c(xi, 0.0);
            }
        }
        f
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub cost: Vec<f64>,
    pub lmis: Vec<Lmi>,
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Initial barrier weight.
    pub t0: f64,
    /// Barrier weight multiplier between centering phases.
    pub mu: f64,
    /// Newton steps allowed per centering phase.
    pub max_newton: usize,
    /// Centering stops when half the squared Newton decrement falls below this.
    pub newton_tol: f64,
    /// Solve stops when the barrier duality gap `m/t` falls below this.
    pub gap_tol: f64,
    pub max_outer: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self { t0: 1.0, mu: 8.0, max_newton: 80, newton_tol: 1e-11, gap_tol: 1e-10, max_outer: 60 }
    }
}

/// Snapshot handed to the monitor.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub x: Vec<f64>,
    pub t: f64,
    /// Newton-corrected multipliers per block; they meet the dual equality
    /// constraints but may be slightly indefinite far from the central path.
    pub duals: Vec<ComplexMatrix>,
    pub value: f64,
    /// True when the iterate is centered for the current `t`.
    pub centered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Halt,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub last: Iterate,
    pub halted: bool,
    pub newton_steps: usize,
}

struct Local {
    inv: Vec<ComplexMatrix>,
    logdet: f64,
}

fn factor(problem: &Problem, x: &[f64]) -> Option<Local> {
    let mut inv = Vec::with_capacity(problem.lmis.len());
    let mut logdet = 0.0;
    for lmi in &problem.lmis {
        let l = cholesky_hermitian(&lmi.eval(x))?;
        for i in 0..l.nrows() {
            logdet += 2.0 * l[(i, i)].re.ln();
        }
        let linv = l.solve_lower_triangular(&ComplexMatrix::identity(l.nrows(), l.nrows()))?;
        inv.push(linv.adjoint() * linv);
    }
    Some(Local { inv, logdet })
}

fn objective(problem: &Problem, x: &[f64]) -> f64 {
    problem.cost.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Real part of `tr(A B)`.
fn trace_prod_re(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let (x, y) = (a[(i, k)], b[(k, i)]);
            s += x.re * y.re - x.im * y.im;
        }
    }
    s
}

fn snapshot(problem: &Problem, x: &[f64], t: f64, duals: Vec<ComplexMatrix>, centered: bool) -> Iterate {
    Iterate { x: x.to_vec(), t, duals, value: objective(problem, x), centered }
}

/// Multipliers `(F⁻¹ − F⁻¹ ΔF F⁻¹)/t` built from the Newton step at `x`; unlike
/// `F⁻¹/t` they satisfy `Tr[H_i Z] = c_i` exactly, whatever the centering error.
fn corrected_duals(problem: &Problem, loc: &Local, step: &DVector<f64>, t: f64) -> Vec<ComplexMatrix> {
    problem
        .lmis
        .iter()
        .zip(&loc.inv)
        .map(|(lmi, w)| {
            let mut df = ComplexMatrix::zeros(w.nrows(), w.ncols());
            for (h, &d) in lmi.coeffs.iter().zip(step.iter()) {
                if d != 0.0 {
                    df += h * c(d, 0.0);
                }
            }
            (w - w * df * w) / c(t, 0.0)
        })
        .collect()
}

/// Runs the barrier method from a strictly feasible `x0`.
///
/// The monitor sees every iterate together with the Newton-corrected
/// multipliers of each block.
pub fn minimize(
    problem: &Problem,
    x0: &[f64],
    opts: &Options,
    mut monitor: impl FnMut(&Iterate) -> Control,
) -> Result<Outcome> {
    let n = problem.cost.len();
    if x0.len() != n || problem.lmis.iter().any(|l| l.coeffs.len() != n) {
        return Err(Error::DimensionMismatch("variable count differs between cost, start and blocks".into()));
    }
    let m: usize = problem.lmis.iter().map(|l| l.constant.nrows()).sum();
    let mut x = x0.to_vec();
    let mut loc = factor(problem, &x).ok_or_else(|| Error::SolverFailure("starting point is not strictly feasible".into()))?;
    let mut t = opts.t0;
    let mut steps = 0usize;
    let mut last = snapshot(problem, &x, t, loc.inv.iter().map(|w| w / c(t, 0.0)).collect(), false);

    for _outer in 0..opts.max_outer {
        for _ in 0..opts.max_newton {
            // gradient and Hessian of t·cᵀx − Σ log det F_k
            let mut g = DVector::<f64>::from_iterator(n, problem.cost.iter().map(|ci| t * ci));
            let mut hess = DMatrix::<f64>::zeros(n, n);
            for (lmi, w) in problem.lmis.iter().zip(&loc.inv) {
                let prods: Vec<ComplexMatrix> = lmi.coeffs.iter().map(|h| w * h).collect();
                for i in 0..n {
                    g[i] -= prods[i].trace().re;
                    for j in 0..=i {
                        let v = trace_prod_re(&prods[i], &prods[j]);
                        hess[(i, j)] += v;
                        if i != j {
                            hess[(j, i)] += v;
                        }
                    }
                }
            }
            // symmetric diagonal scaling before factoring; the Hessian's diagonal
            // spreads over many orders of magnitude near the boundary
            let dscale: Vec<f64> = (0..n).map(|i| 1.0 / hess[(i, i)].abs().max(1e-300).sqrt()).collect();
            let scaled = DMatrix::<f64>::from_fn(n, n, |i, j| hess[(i, j)] * dscale[i] * dscale[j]);
            let rhs = DVector::<f64>::from_fn(n, |i, _| -g[i] * dscale[i]);
            let mut reg = 0.0;
            let step = loop {
                let mut hr = scaled.clone();
                for i in 0..n {
                    hr[(i, i)] += reg;
                }
                if let Some(ch) = Cholesky::new(hr) {
                    let y = ch.solve(&rhs);
                    break DVector::<f64>::from_fn(n, |i, _| y[i] * dscale[i]);
                }
                reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
                if reg > 1.0 {
                    return Err(Error::SolverFailure("Newton system is singular".into()));
                }
            };
            let decrement = -g.dot(&step);
            let centered = decrement / 2.0 <= opts.newton_tol;
            last = snapshot(problem, &x, t, corrected_duals(problem, &loc, &step, t), centered);
            if monitor(&last) == Control::Halt {
                return Ok(Outcome { last, halted: true, newton_steps: steps });
            }
            if centered {
                break;
            }
            // Armijo test on the change of the barrier function, formed as a
            // difference so that large t does not swamp it in round-off
            let slope: f64 = problem.cost.iter().zip(step.iter()).map(|(a, d)| a * d).sum();
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
                if let Some(next) = factor(problem, &cand) {
                    let change = t * alpha * slope - (next.logdet - loc.logdet);
                    if change <= -0.25 * alpha * decrement {
                        accepted = Some((cand, next));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some((cand, next)) = accepted else { break };
            x = cand;
            loc = next;
            steps += 1;
        }
        if (m as f64) / t < opts.gap_tol {
            return Ok(Outcome { last, halted: false, newton_steps: steps });
        }
        t *= opts.mu;
    }
    Ok(Outcome { last, halted: false, newton_steps: steps })
}

/// Real basis of the `d×d` Hermitian matrices: diagonal units, then
/// `|j⟩⟨k| + |k⟩⟨j|` and `i|j⟩⟨k| − i|k⟩⟨j|` for `j < k`.
pub fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(k, k)] = c(1.0, 0.0);
        out.push(m);
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut m = ComplexMatrix::zeros(d, d);
            m[(j, k)] = c(1.0, 0.0);
            m[(k, j)] = c(1.0, 0.0);
            out.push(m);
            let mut m = ComplexMatrix::zeros(d, d);
            m[(j, k)] = c(0.0, 1.0);
            m[(k, j)] = c(0.0, -1.0);
            out.push(m);
        }
    }
    out
}

/// Coordinates of a Hermitian matrix in [`hermitian_basis`].
pub fn hermitian_coords(m: &ComplexMatrix) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        out.push(m[(k, k)].re);
    }
    for j in 0..d {
        for k in j + 1..d {
            out.push(m[(j, k)].re);
            out.push(m[(j, k)].im);
        }
    }
    out
}

/// Inverse of [`hermitian_coords`].
pub fn hermitian_from_coords(d: usize, x: &[f64]) -> ComplexMatrix {
    let basis = hermitian_basis(d);
    let mut m = ComplexMatrix::zeros(d, d);
    for (b, &xi) in basis.iter().zip(x) {
        m += b * c(xi, 0.0);
    }
    m
}
