//! Builtin channel families.

use std::collections::BTreeMap;

use super::Channel;
use crate::error::{Error, Result};
use crate::hermkernel::{c, diag, identity, max_entangled, pauli_z, unit, ComplexMatrix};

/// Named channel families with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    /// `ρ ↦ (1−p)ρ + p·Tr[ρ]·I/d`, `p ∈ [0, 1]`.
    Depolarizing { p: f64, d: usize },
    /// Qubit phase flip with probability `q ∈ [0, 1]`.
    Dephasing { q: f64 },
    /// Qubit amplitude damping with decay probability `gamma ∈ [0, 1]`.
    AmplitudeDamping { gamma: f64 },
    /// Qubit erasure into a qutrit flag `|2⟩` with probability `p ∈ [0, 1]`.
    Erasure { p: f64 },
    /// Measure in the computational basis and flip the outcome with probability `f ∈ [0, 1]`.
    BscEmbed { f: f64 },
    Identity { d: usize },
    /// `ρ ↦ Tr[ρ]σ`.
    Replacement { d_in: usize, sigma: ComplexMatrix },
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || v.is_nan() {
        return Err(Error::ParamOutOfRange { name: name.into(), value: v });
    }
    Ok(())
}

fn check_dim(name: &str, d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::ParamOutOfRange { name: name.into(), value: 0.0 });
    }
    Ok(())
}

impl Builtin {
    pub fn build(&self) -> Result<Channel> {
        match self {
            Builtin::Depolarizing { p, d } => {
                check_prob("p", *p)?;
                check_dim("d", *d)?;
                let d2 = (*d * *d) as f64;
                let choi = max_entangled(*d) * c(1.0 - p, 0.0) + identity(d * d) * c(p / d2, 0.0);
                Channel::from_choi(choi, *d, *d)
            }
            Builtin::Dephasing { q } => {
                check_prob("q", *q)?;
                Channel::from_kraus(vec![identity(2) * c((1.0 - q).sqrt(), 0.0), pauli_z() * c(q.sqrt(), 0.0)], 2, 2)
            }
            Builtin::AmplitudeDamping { gamma } => {
                check_prob("gamma", *gamma)?;
                let k0 = diag(&[1.0, (1.0 - gamma).sqrt()]);
                let k1 = unit(2, 0, 1) * c(gamma.sqrt(), 0.0);
                Channel::from_kraus(vec![k0, k1], 2, 2)
            }
            Builtin::Erasure { p } => {
                check_prob("p", *p)?;
                let mut keep = ComplexMatrix::zeros(3, 2);
                keep[(0, 0)] = c((1.0 - p).sqrt(), 0.0);
                keep[(1, 1)] = c((1.0 - p).sqrt(), 0.0);
                let mut e0 = ComplexMatrix::zeros(3, 2);
                e0[(2, 0)] = c(p.sqrt(), 0.0);
                let mut e1 = ComplexMatrix::zeros(3, 2);
                e1[(2, 1)] = c(p.sqrt(), 0.0);
                Channel::from_kraus(vec![keep, e0, e1], 2, 3)
            }
            Builtin::BscEmbed { f } => {
                check_prob("f", *f)?;
                let keep = (1.0 - f).sqrt();
                let flip = f.sqrt();
                let ks = vec![
                    unit(2, 0, 0) * c(keep, 0.0),
                    unit(2, 1, 1) * c(keep, 0.0),
                    unit(2, 1, 0) * c(flip, 0.0),
                    unit(2, 0, 1) * c(flip, 0.0),
                ];
                Channel::from_kraus(ks, 2, 2)
            }
            Builtin::Identity { d } => {
                check_dim("d", *d)?;
                Ok(Channel::identity(*d))
            }
            Builtin::Replacement { d_in, sigma } => {
                check_dim("d_in", *d_in)?;
                Channel::replacement(sigma, *d_in)
            }
        }
    }

    /// Parses a family name and a parameter map.
    ///
    /// Recognized names and parameters:
    /// `depolarizing {p, d=2}`, `dephasing {q}`, `amplitude_damping {gamma}`,
    /// `erasure {p}`, `bsc_embed {f}`, `identity {d=2}`,
    /// `replacement {d_in=2, d_out=2, sigma_0.. (diagonal of σ, default uniform)}`.
    pub fn parse(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str| -> Result<f64> {
            params.get(key).copied().ok_or_else(|| Error::ParamOutOfRange { name: key.into(), value: f64::NAN })
        };
        let dim = |key: &str, default: usize| -> Result<usize> {
            match params.get(key) {
                None => Ok(default),
                Some(&v) if v >= 1.0 && v.fract() == 0.0 && v <= 1024.0 => Ok(v as usize),
                Some(&v) => Err(Error::ParamOutOfRange { name: key.into(), value: v }),
            }
        };
        Ok(match name {
            "depolarizing" => Builtin::Depolarizing { p: get("p")?, d: dim("d", 2)? },
            "dephasing" => Builtin::Dephasing { q: get("q")? },
            "amplitude_damping" => Builtin::AmplitudeDamping { gamma: get("gamma")? },
            "erasure" => Builtin::Erasure { p: get("p")? },
            "bsc_embed" => Builtin::BscEmbed { f: get("f")? },
            "identity" => Builtin::Identity { d: dim("d", 2)? },
            "replacement" => {
                let d_in = dim("d_in", 2)?;
                let d_out = dim("d_out", 2)?;
                let mut entries = Vec::with_capacity(d_out);
                for i in 0..d_out {
                    let key = format!("sigma_{i}");
                    let v = params.get(&key).copied().unwrap_or(1.0 / d_out as f64);
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::ParamOutOfRange { name: key, value: v });
                    }
                    entries.push(v);
                }
                let total: f64 = entries.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::ParamOutOfRange { name: "sigma".into(), value: total });
                }
                Builtin::Replacement { d_in, sigma: diag(&entries) }
            }
            other => return Err(Error::UnknownName(other.to_string())),
        })
    }
}

/// Builds a builtin channel from its name and parameter map.
pub fn make_builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Channel> {
    Builtin::parse(name, params)?.build()
}

pub fn depolarizing(p: f64) -> Result<Channel> {
    Builtin::Depolarizing { p, d: 2 }.build()
}

pub fn dephasing(q: f64) -> Result<Channel> {
    Builtin::Dephasing { q }.build()
}

pub fn amplitude_damping(gamma: f64) -> Result<Channel> {
    Builtin::AmplitudeDamping { gamma }.build()
}

pub fn erasure(p: f64) -> Result<Channel> {
    Builtin::Erasure { p }.build()
}

pub fn bsc_embed(f: f64) -> Result<Channel> {
    Builtin::BscEmbed { f }.build()
}

/// Replacement channel on qubits with output `I/2`.
pub fn qubit_trash() -> Channel {
    Channel::replacement(&(identity(2) / c(2.0, 0.0)), 2).expect("maximally mixed state")
}

/// Diagonal of the Choi operator (the full operator for classical channels).
pub fn choi_diagonal(ch: &Channel) -> Vec<f64> {
    (0..ch.choi().nrows()).map(|i| ch.choi()[(i, i)].re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermkernel::{eigvalsh, kron, max_abs_diff};

    fn classical_choi(rows: &[Vec<f64>]) -> ComplexMatrix {
        let d_in = rows.len();
        let d_out = rows[0].len();
        let mut out = ComplexMatrix::zeros(d_in * d_out, d_in * d_out);
        for (i, row) in rows.iter().enumerate() {
            let col = diag(row);
            out += kron(&unit(d_in, i, i), &col);
        }
        out / c(d_in as f64, 0.0)
    }

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn full_depolarization_is_replacement() {
        let a = depolarizing(1.0).unwrap();
        let b = qubit_trash();
        assert!(max_abs_diff(a.choi(), b.choi()) < 1e-15);
    }

    #[test]
    fn depolarizing_choi_formula() {
        let p = 0.37;
        let ch = depolarizing(p).unwrap();
        let expect = max_entangled(2) * c(1.0 - p, 0.0) + identity(4) * c(p / 4.0, 0.0);
        assert!(max_abs_diff(ch.choi(), &expect) < 1e-15);
        let out = ch.apply(&unit(2, 0, 0)).unwrap();
        assert!(max_abs_diff(&out, &diag(&[1.0 - p / 2.0, p / 2.0])) < 1e-14);
    }

    #[test]
    fn noiseless_bsc_is_classical_identity() {
        let ch = bsc_embed(0.0).unwrap();
        assert!(max_abs_diff(ch.choi(), &diag(&[0.5, 0.0, 0.0, 0.5])) < 1e-15);
        let ch = bsc_embed(0.2).unwrap();
        assert!(max_abs_diff(ch.choi(), &classical_choi(&[vec![0.8, 0.2], vec![0.2, 0.8]])) < 1e-15);
    }

    #[test]
    fn amplitude_damping_kraus() {
        let ch = amplitude_damping(0.3).unwrap();
        let ks = ch.stored_kraus().unwrap();
        assert!(max_abs_diff(&ks[0], &diag(&[1.0, 0.7f64.sqrt()])) < 1e-15);
        assert!((ks[1][(0, 1)].re - 0.3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn erasure_output_dimension() {
        let ch = erasure(0.25).unwrap();
        assert_eq!((ch.d_in(), ch.d_out()), (2, 3));
        let out = ch.apply(&unit(2, 1, 1)).unwrap();
        assert!(max_abs_diff(&out, &diag(&[0.0, 0.75, 0.25])) < 1e-15);
    }

    #[test]
    fn parse_and_errors() {
        let ch = make_builtin("depolarizing", &params(&[("p", 0.5)])).unwrap();
        assert_eq!(ch.d_in(), 2);
        assert!(matches!(make_builtin("nope", &params(&[])), Err(Error::UnknownName(_))));
        assert!(matches!(
            make_builtin("dephasing", &params(&[("q", 1.5)])),
            Err(Error::ParamOutOfRange { .. })
        ));
        let rep = make_builtin("replacement", &params(&[("d_in", 3.0), ("sigma_0", 0.25), ("sigma_1", 0.75)])).unwrap();
        assert_eq!((rep.d_in(), rep.d_out()), (3, 2));
        assert!(matches!(
            make_builtin("replacement", &params(&[("sigma_0", 0.5), ("sigma_1", 0.6)])),
            Err(Error::ParamOutOfRange { .. })
        ));
    }

    #[test]
    fn every_member_is_cptp() {
        for ch in [
            depolarizing(0.3).unwrap(),
            dephasing(0.3).unwrap(),
            amplitude_damping(0.3).unwrap(),
            erasure(0.4).unwrap(),
            bsc_embed(0.1).unwrap(),
            Channel::identity(3),
            qubit_trash(),
        ] {
            let e = eigvalsh(ch.choi()).unwrap();
            assert!(e.last().unwrap() > &-1e-12);
            assert!((ch.choi().trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn depolarizing_product_spectrum() {
        let prod = super::super::tensor_channels(&depolarizing(0.5).unwrap(), &depolarizing(0.8).unwrap());
        let mut e = eigvalsh(prod.choi()).unwrap();
        let mut expect = vec![];
        for a in [0.625, 0.125, 0.125, 0.125] {
            for b in [0.4, 0.2, 0.2, 0.2] {
                expect.push(a * b);
            }
        }
        expect.sort_by(|x: &f64, y| y.total_cmp(x));
        e.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in e.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
