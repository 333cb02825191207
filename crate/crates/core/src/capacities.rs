//! One-shot and asymptotic capacity bounds from the projective mutual information.
//!
//! With `x = ε/(1−ε)·2^{I_Ω} + 1`, the one-shot quantum capacity lies in
//! `[log₂⌈√x − 1⌉, log₂⌊√x⌋]` and the classical one in `[log₂⌈√x − 1⌉², log₂⌊x⌋]`.
//! Asymptotically `C = I_Ω` and `Q = I_Ω/2`, strong converses included.
//!
//! Floors and ceilings are taken in log space. An argument within [`GUARD_BITS`]
//! of an integer is snapped onto it (so `⌊k⌋ = ⌈k⌉ = k`) and the result is
//! flagged as an edge case, since the solver bracket cannot tell which side the
//! exact value falls on.

use crate::channels::{tensor_channels, Channel};
use crate::divergences::{check_eps, Bits};
use crate::error::Result;
use crate::projective::{iomega_channel, IomegaResult};
use crate::hermkernel::PSD_TOL;

/// Half-width of the band around integers, in bits, inside which floors and
/// ceilings are snapped and flagged.
pub const GUARD_BITS: f64 = 1e-9;

/// Above this many bits an `f64` argument has no fractional part left.
const EXACT_LIMIT_BITS: f64 = 52.0;

/// `log₂(ε/(1−ε)·2^{I} + 1)`, stable for large `I`.
fn log2_argument(iomega: Bits, eps: f64) -> f64 {
    let lx = (eps / (1.0 - eps)).log2() + iomega.0;
    if lx > 0.0 {
        lx + (-lx).exp2().ln_1p() / std::f64::consts::LN_2
    } else {
        lx.exp2().ln_1p() / std::f64::consts::LN_2
    }
}

/// `log₂⌊y⌋` for `y = 2^{ly} ≥ 1`, with the edge flag.
fn log2_floor(ly: f64) -> (f64, bool) {
    if ly >= EXACT_LIMIT_BITS {
        return (ly, false);
    }
    let y = ly.exp2();
    let k = y.round();
    if k >= 1.0 && (ly - k.log2()).abs() <= GUARD_BITS {
        return (k.log2(), true);
    }
    (y.floor().max(1.0).log2(), false)
}

/// `log₂⌈y⌉` for `y ≥ 0` (`−∞` when `y = 0`), with the edge flag.
fn log2_ceil(y: f64) -> (f64, bool) {
    if y <= 0.0 {
        return (f64::NEG_INFINITY, false);
    }
    let ly = y.log2();
    if ly >= EXACT_LIMIT_BITS {
        return (ly, false);
    }
    let k = y.round();
    if k >= 1.0 && (ly - k.log2()).abs() <= GUARD_BITS {
        return (k.log2(), true);
    }
    (y.ceil().log2(), false)
}

/// `⌈√x − 1⌉` in bits, clamped at zero.
fn quantum_lower(iomega: Bits, eps: f64) -> (f64, bool) {
    let lx = log2_argument(iomega, eps);
    let root_minus_one = if lx / 2.0 >= EXACT_LIMIT_BITS {
        // √x − 1 is indistinguishable from √x here
        return (lx / 2.0, false);
    } else {
        (lx / 2.0).exp2() - 1.0
    };
    let (v, edge) = log2_ceil(root_minus_one);
    (v.max(0.0), edge)
}

fn quantum_upper(iomega: Bits, eps: f64) -> (f64, bool) {
    log2_floor(log2_argument(iomega, eps) / 2.0)
}

/// One-shot pEA/pNA quantum capacity bounds `(lower, upper)` in bits.
pub fn oneshot_quantum_bounds(iomega: Bits, eps: f64) -> Result<(Bits, Bits)> {
    check_eps(eps)?;
    if !iomega.is_finite() {
        return Ok((Bits::INF, Bits::INF));
    }
    Ok((Bits(quantum_lower(iomega, eps).0), Bits(quantum_upper(iomega, eps).0)))
}

/// One-shot pEA/pNA classical capacity bounds `(lower, upper)` in bits.
pub fn oneshot_classical_bounds(iomega: Bits, eps: f64) -> Result<(Bits, Bits)> {
    check_eps(eps)?;
    if !iomega.is_finite() {
        return Ok((Bits::INF, Bits::INF));
    }
    let lower = 2.0 * quantum_lower(iomega, eps).0;
    let upper = log2_floor(log2_argument(iomega, eps)).0;
    Ok((Bits(lower), Bits(upper)))
}

/// Whether `k² < x < k² + 1` for some integer `k`, where the classical bounds coincide.
pub fn classical_bounds_tight(iomega: Bits, eps: f64) -> Result<bool> {
    check_eps(eps)?;
    if !iomega.is_finite() {
        return Ok(true);
    }
    let lx = log2_argument(iomega, eps);
    if lx >= EXACT_LIMIT_BITS {
        return Ok(false);
    }
    let x = lx.exp2();
    let k = x.sqrt().floor();
    let below = k * k;
    let guard = |a: f64| a > 0.0 && (lx - a.log2()).abs() <= GUARD_BITS;
    Ok(x > below && x < below + 1.0 && !guard(below) && !guard(below + 1.0))
}

/// Whether the quantum bounds coincide, i.e. `√x` is not an integer.
pub fn quantum_bounds_tight(iomega: Bits, eps: f64) -> Result<bool> {
    let (lo, hi) = oneshot_quantum_bounds(iomega, eps)?;
    Ok(lo == hi)
}

/// Capacity bounds for one channel at one error level.
///
/// Lower bounds are evaluated at the certified lower end of the `I_Ω` bracket
/// and upper bounds at its upper end, so the reported intervals contain the
/// exact ones.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    pub eps: f64,
    /// Midpoint of the certified bracket.
    pub iomega_bits: Bits,
    pub iomega_lower: Bits,
    pub iomega_upper: Bits,
    pub q_lower_bits: Bits,
    pub q_upper_bits: Bits,
    pub c_lower_bits: Bits,
    pub c_upper_bits: Bits,
    pub asymptotic_c_bits: Bits,
    pub asymptotic_q_bits: Bits,
    pub quantum_tight: bool,
    pub classical_tight: bool,
    /// Some floor or ceiling argument fell inside the guard band around an integer.
    pub edge_case: bool,
}

impl CapacityReport {
    /// Builds a report from a certified bracket `[lower, upper]` on `I_Ω`.
    pub fn from_bracket(lower: Bits, upper: Bits, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let finite = lower.is_finite() && upper.is_finite();
        let mid = if finite { Bits(0.5 * (lower.0 + upper.0)) } else { Bits::INF };
        if !finite {
            return Ok(Self {
                eps,
                iomega_bits: Bits::INF,
                iomega_lower: lower,
                iomega_upper: upper,
                q_lower_bits: Bits::INF,
                q_upper_bits: Bits::INF,
                c_lower_bits: Bits::INF,
                c_upper_bits: Bits::INF,
                asymptotic_c_bits: Bits::INF,
                asymptotic_q_bits: Bits::INF,
                quantum_tight: true,
                classical_tight: true,
                edge_case: false,
            });
        }
        let (ql, e1) = quantum_lower(lower, eps);
        let (qu, e2) = quantum_upper(upper, eps);
        let (cu, e3) = log2_floor(log2_argument(upper, eps));
        Ok(Self {
            eps,
            iomega_bits: mid,
            iomega_lower: lower,
            iomega_upper: upper,
            q_lower_bits: Bits(ql),
            q_upper_bits: Bits(qu),
            c_lower_bits: Bits(2.0 * ql),
            c_upper_bits: Bits(cu),
            asymptotic_c_bits: mid,
            asymptotic_q_bits: Bits(mid.0 / 2.0),
            quantum_tight: ql == qu,
            classical_tight: classical_bounds_tight(lower, eps)? && classical_bounds_tight(upper, eps)?,
            edge_case: e1 || e2 || e3,
        })
    }

    pub fn from_iomega(res: &IomegaResult, eps: f64) -> Result<Self> {
        Self::from_bracket(res.lower, res.upper, eps)
    }
}

/// Computes `I_Ω(N)` and assembles the one-shot bounds at `eps` together with
/// the asymptotic capacities.
pub fn capacity_report(n: &Channel, eps: f64, gap_bits: f64) -> Result<CapacityReport> {
    check_eps(eps)?;
    let res = iomega_channel(n, gap_bits, PSD_TOL)?;
    CapacityReport::from_iomega(&res, eps)
}

/// Asymptotic report; the one-shot fields are filled at `ε = 1/2`.
pub fn asymptotic_report(n: &Channel, gap_bits: f64) -> Result<CapacityReport> {
    capacity_report(n, 0.5, gap_bits)
}

/// `N^{⊗n}`.
pub fn tensor_power(n: &Channel, k: usize) -> Channel {
    let mut out = n.clone();
    for _ in 1..k.max(1) {
        out = tensor_channels(&out, n);
    }
    out
}

/// Both sides of the finite-`n` sandwich around the asymptotic classical capacity:
/// `(1/n)log₂(ε/(4(1−ε))) + I_Ω ≤ (1/n)·c_lower(N^{⊗n})` and
/// `(1/n)·c_upper(N^{⊗n}) ≤ (1/n)log₂(1/(1−ε)) + I_Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichCheck {
    pub n: usize,
    pub iomega: Bits,
    /// `I_Ω(N^{⊗n})`, from the SDP for `n ≤ 2` and by additivity for `n = 3`.
    pub iomega_n: Bits,
    pub floor_rate: f64,
    pub c_lower_rate: f64,
    pub c_upper_rate: f64,
    pub ceiling_rate: f64,
    pub holds: bool,
}

pub fn asymptotic_sandwich_check(n: &Channel, eps: f64, blocks: usize, gap_bits: f64) -> Result<SandwichCheck> {
    check_eps(eps)?;
    if !(1..=3).contains(&blocks) {
        return Err(crate::error::Error::ParamOutOfRange { name: "n".into(), value: blocks as f64 });
    }
    let single = iomega_channel(n, gap_bits, PSD_TOL)?;
    if !single.finite {
        return Err(crate::error::Error::SolverFailure("sandwich check needs a finite I_Omega".into()));
    }
    let (lo_n, hi_n) = match blocks {
        1 => (single.lower, single.upper),
        2 => {
            let r = iomega_channel(&tensor_power(n, 2), gap_bits, PSD_TOL)?;
            (r.lower, r.upper)
        }
        _ => (Bits(3.0 * single.lower.0), Bits(3.0 * single.upper.0)),
    };
    let report = CapacityReport::from_bracket(lo_n, hi_n, eps)?;
    let k = blocks as f64;
    let iomega = single.estimate();
    let floor_rate = (eps / (4.0 * (1.0 - eps))).log2() / k + iomega.0;
    let ceiling_rate = (1.0 / (1.0 - eps)).log2() / k + iomega.0;
    let c_lower_rate = report.c_lower_bits.0 / k;
    let c_upper_rate = report.c_upper_bits.0 / k;
    // slack for the solver brackets of both the single-letter and the block value
    let slack = 1e-9 + single.gap() + (hi_n.0 - lo_n.0) / k;
    let holds = floor_rate <= c_lower_rate + slack && c_upper_rate <= ceiling_rate + slack;
    Ok(SandwichCheck {
        n: blocks,
        iomega,
        iomega_n: Bits(0.5 * (lo_n.0 + hi_n.0)),
        floor_rate,
        c_lower_rate,
        c_upper_rate,
        ceiling_rate,
        holds,
    })
}
