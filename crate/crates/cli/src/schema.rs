//! JSON file formats: channel descriptions, supermap descriptions and reports.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested arrays.
//! Infinite bit values are written as the string `"+inf"`.

use std::collections::BTreeMap;
use std::io;

use postsel::channels::{make_builtin, Supermap};
use postsel::hermkernel::c;
use postsel::{Channel, ComplexMatrix, Subchannel};
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::CliError;

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<ComplexMatrix, CliError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(CliError::Input("ragged matrix rows".into()));
    }
    Ok(ComplexMatrix::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiNormalization {
    /// Trace-one Choi state with the input reference first.
    #[default]
    State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Representation {
    Kraus {
        operators: Vec<MatrixJson>,
    },
    Choi {
        matrix: MatrixJson,
        #[serde(default)]
        normalization: ChoiNormalization,
    },
    Builtin {
        builtin_name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

/// A channel description: explicit Kraus operators, a Choi state, or a builtin family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpecFile {
    pub name: String,
    pub d_in: usize,
    pub d_out: usize,
    pub rep: Representation,
}

impl ChannelSpecFile {
    /// Reads a description from a JSON file, or from the inline form
    /// `builtin:NAME[:key=value,...]`.
    pub fn load(arg: &str) -> Result<Self, CliError> {
        if let Some(rest) = arg.strip_prefix("builtin:") {
            return Self::from_shorthand(rest);
        }
        let text = std::fs::read_to_string(arg).map_err(|e| CliError::Input(format!("cannot read {arg}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("malformed channel file {arg}: {e}")))
    }

    fn from_shorthand(rest: &str) -> Result<Self, CliError> {
        let (name, list) = rest.split_once(':').unwrap_or((rest, ""));
        let mut params = BTreeMap::new();
        for item in list.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("parameter `{item}` is not key=value")))?;
            let v: f64 = v.trim().parse().map_err(|_| CliError::Input(format!("parameter `{k}` is not a number")))?;
            params.insert(k.trim().to_string(), v);
        }
        let ch = make_builtin(name, &params)?;
        Ok(Self {
            name: name.to_string(),
            d_in: ch.d_in(),
            d_out: ch.d_out(),
            rep: Representation::Builtin { builtin_name: name.to_string(), params },
        })
    }

    pub fn build(&self) -> Result<Channel, CliError> {
        let ch = match &self.rep {
            Representation::Kraus { operators } => {
                let ks = operators.iter().map(matrix_from_json).collect::<Result<Vec<_>, _>>()?;
                Channel::from_kraus(ks, self.d_in, self.d_out)?
            }
            Representation::Choi { matrix, .. } => Channel::from_choi(matrix_from_json(matrix)?, self.d_in, self.d_out)?,
            Representation::Builtin { builtin_name, params } => make_builtin(builtin_name, params)?,
        };
        self.check_dims(ch.d_in(), ch.d_out())?;
        Ok(ch)
    }

    /// Like [`build`](Self::build) but only requires a trace-nonincreasing map.
    pub fn build_subchannel(&self) -> Result<Subchannel, CliError> {
        let sub = match &self.rep {
            Representation::Kraus { operators } => {
                let ks = operators.iter().map(matrix_from_json).collect::<Result<Vec<_>, _>>()?;
                Subchannel::from_kraus(ks, self.d_in, self.d_out)?
            }
            Representation::Choi { matrix, .. } => Subchannel::from_choi(matrix_from_json(matrix)?, self.d_in, self.d_out)?,
            Representation::Builtin { .. } => self.build()?.as_subchannel(),
        };
        self.check_dims(sub.d_in(), sub.d_out())?;
        Ok(sub)
    }

    fn check_dims(&self, d_in: usize, d_out: usize) -> Result<(), CliError> {
        if (d_in, d_out) != (self.d_in, self.d_out) {
            return Err(CliError::Input(format!(
                "declared dims {}->{} but the map is {d_in}->{d_out}",
                self.d_in, self.d_out
            )));
        }
        Ok(())
    }
}

/// A supermap given by its pre-processing `M → A ⊗ E` and post-processing `B ⊗ E → M̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupermapFile {
    pub d_a: usize,
    pub d_b: usize,
    pub pre: ChannelSpecFile,
    pub post: ChannelSpecFile,
}

impl SupermapFile {
    pub fn load(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("malformed supermap file {path}: {e}")))
    }

    pub fn build(&self) -> Result<Supermap, CliError> {
        Ok(Supermap::new(self.pre.build()?, self.post.build_subchannel()?, self.d_a, self.d_b)?)
    }
}

/// Serializes `f64::INFINITY` as `"+inf"`.
pub mod bits_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("+inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if t == "+inf" => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"+inf\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub gap_bits: f64,
    pub psd_tol: f64,
    pub rank_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IomegaSummary {
    #[serde(with = "bits_serde")]
    pub lower: f64,
    #[serde(with = "bits_serde")]
    pub upper: f64,
    pub finite: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalJson {
    pub xi: f64,
    pub s: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualJson {
    pub p: MatrixJson,
    pub q: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub primal: Option<PrimalJson>,
    pub dual: DualJson,
}

/// One row of capacity bounds, all in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub eps: f64,
    #[serde(with = "bits_serde")]
    pub q_lower: f64,
    #[serde(with = "bits_serde")]
    pub q_upper: f64,
    #[serde(with = "bits_serde")]
    pub c_lower: f64,
    #[serde(with = "bits_serde")]
    pub c_upper: f64,
    #[serde(with = "bits_serde")]
    pub asym_c: f64,
    #[serde(with = "bits_serde")]
    pub asym_q: f64,
    pub edge_case: bool,
}

/// Report written by `iomega --json` and `capacity --json`; `verify` re-checks it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch; omitted under `--deterministic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub tolerances: Tolerances,
    pub channel: ChannelSpecFile,
    pub iomega: IomegaSummary,
    pub certificates: Certificates,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub capacity: Vec<CapacityRow>,
}

/// Writes every float with 17 significant digits.
struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// A float in scientific notation with 17 significant digits; `inf`/`-inf`/`nan` otherwise.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Compact JSON with 17-significant-digit floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    value.serialize(&mut ser).map_err(|e| CliError::Input(e.to_string()))?;
    let mut s = String::from_utf8(buf).expect("serde_json writes UTF-8");
    s.push('\n');
    Ok(s)
}
