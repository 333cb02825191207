//! The subcommands. Each returns the text to emit or a [`CliError`].

use std::time::{SystemTime, UNIX_EPOCH};

use postsel::capacities::CapacityReport;
use postsel::channels::Supermap;
use postsel::divergences::{check_eps, Bits};
use postsel::projective::{
    iomega_channel_with, validate_channel_dual, validate_channel_primal, DualCertificate, IomegaOptions, IomegaResult,
    PrimalCertificate,
};
use postsel::protocols::{
    build_pea_supermap, build_pna_achiever, build_teleport, check_nonsignalling, check_replacement_preserving,
    conditional_error_quantum, ctc_counterexample, teleport_error_bound, Direction, TeleportProtocol,
};
use postsel::{Channel, Error};
use serde::Serialize;

use crate::error::CliError;
use crate::schema::{
    fmt17, matrix_from_json, matrix_to_json, to_json, CapacityRow, Certificates, ChannelSpecFile, DualJson,
    IomegaSummary, PrimalJson, ReportFile, SupermapFile, Tolerances,
};

/// Output format selected by `--json` / `--csv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// Settings shared by all subcommands.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub gap_bits: f64,
    pub psd_tol: f64,
    pub rank_tol: f64,
    pub format: Format,
    pub deterministic: bool,
}

impl Settings {
    fn options(&self) -> IomegaOptions {
        IomegaOptions { gap_bits: self.gap_bits, psd_tol: self.psd_tol, rank_tol: self.rank_tol, ..Default::default() }
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances { gap_bits: self.gap_bits, psd_tol: self.psd_tol, rank_tol: self.rank_tol }
    }
}

/// Restarts used by the worst-case input search in `simulate`.
const SEARCH_RESTARTS: usize = 4;

/// Encoder reconstruction tolerance for the teleportation-based code.
const ENCODER_TOL: f64 = 1e-7;

fn load_channel(arg: &str) -> Result<(ChannelSpecFile, Channel), CliError> {
    let spec = ChannelSpecFile::load(arg)?;
    let ch = spec.build()?;
    Ok((spec, ch))
}

fn build_report(
    spec: ChannelSpecFile,
    res: &IomegaResult,
    settings: &Settings,
    capacity: Vec<CapacityRow>,
) -> ReportFile {
    let timestamp = if settings.deterministic {
        None
    } else {
        SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
    };
    ReportFile {
        tool: "postsel".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: None,
        timestamp,
        tolerances: settings.tolerances(),
        channel: spec,
        iomega: IomegaSummary { lower: res.lower.0, upper: res.upper.0, finite: res.finite, iterations: res.iterations },
        certificates: Certificates {
            primal: res.primal.as_ref().map(|p| PrimalJson { xi: p.xi, s: matrix_to_json(&p.s) }),
            dual: DualJson { p: matrix_to_json(&res.dual.p), q: matrix_to_json(&res.dual.q) },
        },
        capacity,
    }
}

/// `[lower, upper]` rounded outward to six decimals, so the printed bracket stays valid.
fn outward6(lower: f64, upper: f64) -> (String, String) {
    let lo = (lower * 1e6).floor() / 1e6;
    let hi = (upper * 1e6).ceil() / 1e6;
    (format!("{lo:.6}"), format!("{hi:.6}"))
}

const INFINITE_LINE: &str = "I_omega = +inf (support obstruction): unbounded (postselected CTC regime)";

pub fn iomega(channel: &str, settings: &Settings) -> Result<String, CliError> {
    let (spec, n) = load_channel(channel)?;
    let res = iomega_channel_with(&n, &settings.options())?;
    match settings.format {
        Format::Json => to_json(&build_report(spec, &res, settings, Vec::new())),
        Format::Csv => Ok(format!(
            "lower,upper,finite,iterations\n{},{},{},{}\n",
            fmt17(res.lower.0),
            fmt17(res.upper.0),
            res.finite,
            res.iterations
        )),
        Format::Text => {
            let mut s = String::new();
            if res.finite {
                let (lo, hi) = outward6(res.lower.0, res.upper.0);
                s.push_str(&format!("I_omega in [{lo}, {hi}] bits\n"));
                if let Some(p) = &res.primal {
                    s.push_str(&format!("primal certificate: xi = {:.9}\n", p.xi));
                }
                s.push_str(&format!("dual certificate: ratio = {:.9}\n", res.lower.ratio()));
                s.push_str(&format!("bisection steps: {}\n", res.iterations));
            } else {
                s.push_str(INFINITE_LINE);
                s.push('\n');
            }
            Ok(s)
        }
    }
}

/// Parses `A:B:STEP` into the grid `A, A+STEP, …, ≤ B`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::Input(format!("eps grid `{text}` is not A:B:STEP"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || b < a || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(CliError::Input("eps grid has too many points".into()));
    }
    Ok((0..count).map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12).collect())
}

fn capacity_row(r: &CapacityReport) -> CapacityRow {
    CapacityRow {
        eps: r.eps,
        q_lower: r.q_lower_bits.0,
        q_upper: r.q_upper_bits.0,
        c_lower: r.c_lower_bits.0,
        c_upper: r.c_upper_bits.0,
        asym_c: r.asymptotic_c_bits.0,
        asym_q: r.asymptotic_q_bits.0,
        edge_case: r.edge_case,
    }
}

pub const CSV_HEADER: [&str; 7] = ["eps", "q_lower", "q_upper", "c_lower", "c_upper", "asym_c", "asym_q"];

pub fn capacity(channel: &str, eps: Option<f64>, grid: Option<&str>, settings: &Settings) -> Result<String, CliError> {
    let mut values = match (eps, grid) {
        (Some(e), None) => vec![e],
        (None, Some(g)) => parse_grid(g)?,
        _ => return Err(CliError::Input("give exactly one of --eps and --eps-grid".into())),
    };
    for &e in &values {
        check_eps(e)?;
    }
    values.sort_by(f64::total_cmp);
    let (spec, n) = load_channel(channel)?;
    let res = iomega_channel_with(&n, &settings.options())?;
    let rows = values
        .iter()
        .map(|&e| CapacityReport::from_bracket(res.lower, res.upper, e).map(|r| capacity_row(&r)))
        .collect::<Result<Vec<_>, _>>()?;
    match settings.format {
        Format::Json => to_json(&build_report(spec, &res, settings, rows)),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER).map_err(|e| CliError::Input(e.to_string()))?;
            for r in &rows {
                let fields = [r.eps, r.q_lower, r.q_upper, r.c_lower, r.c_upper, r.asym_c, r.asym_q].map(fmt17);
                w.write_record(&fields).map_err(|e| CliError::Input(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
        }
        Format::Text => {
            let mut s = String::new();
            if res.finite {
                let (lo, hi) = outward6(res.lower.0, res.upper.0);
                s.push_str(&format!("I_omega in [{lo}, {hi}] bits\n"));
            } else {
                s.push_str(INFINITE_LINE);
                s.push('\n');
            }
            for r in &rows {
                s.push_str(&format!(
                    "eps {}: quantum [{}, {}] classical [{}, {}] asymptotic C {} Q {}{}\n",
                    r.eps,
                    short(r.q_lower),
                    short(r.q_upper),
                    short(r.c_lower),
                    short(r.c_upper),
                    short(r.asym_c),
                    short(r.asym_q),
                    if r.edge_case { " (at an integer boundary)" } else { "" }
                ));
            }
            Ok(s)
        }
    }
}

fn short(v: f64) -> String {
    if v.is_infinite() {
        "+inf".into()
    } else {
        format!("{:.6}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Which code `simulate` and `check` build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Teleport,
    Pna,
}

#[derive(Debug, Clone, Serialize)]
struct SimulateReport {
    scheme: &'static str,
    d_m: usize,
    eps: f64,
    #[serde(with = "crate::schema::bits_serde")]
    iomega_lower: f64,
    #[serde(with = "crate::schema::bits_serde")]
    iomega_upper: f64,
    /// Certified conditional error bound of the teleportation code, or the design target of the nonsignalling one.
    error_bound: f64,
    /// Conditional error at the maximally entangled input.
    me_error: f64,
    /// Largest conditional error found by the input search.
    searched_error: f64,
    /// Conclusive probability with the maximally mixed message.
    conclusive_probability: f64,
    meets_target: bool,
    seed: u64,
}

fn certified(n: &Channel, settings: &Settings) -> Result<IomegaResult, CliError> {
    Ok(iomega_channel_with(n, &settings.options())?)
}

fn rate_gate(res: &IomegaResult, d_m: usize, eps: f64) -> Result<(), CliError> {
    if !res.finite {
        return Ok(());
    }
    let msgs = (d_m * d_m) as f64;
    let threshold = eps / (1.0 - eps) * res.lower.ratio() + 1.0;
    if msgs >= threshold {
        return Err(Error::InfeasibleRate { dm_sq: msgs, threshold }.into());
    }
    Ok(())
}

fn build_scheme(n: &Channel, res: &IomegaResult, scheme: Scheme, d_m: usize, eps: f64) -> Result<(Supermap, f64), CliError> {
    match scheme {
        Scheme::Teleport => {
            let proto = TeleportProtocol::from_dual(n, d_m, &res.dual, ENCODER_TOL)?;
            let bound = teleport_error_bound(n, &proto)?;
            Ok((build_teleport(n, &proto)?, bound))
        }
        Scheme::Pna => {
            let primal = res.primal.as_ref().ok_or_else(|| {
                CliError::Input("the nonsignalling code needs a finite I_omega; use --scheme teleport".into())
            })?;
            let ach = build_pna_achiever(n, d_m, eps, &res.dual, primal)?;
            Ok((ach.supermap, eps))
        }
    }
}

pub fn simulate(
    channel: &str,
    d_m: usize,
    eps: f64,
    scheme: Scheme,
    seed: u64,
    settings: &Settings,
) -> Result<String, CliError> {
    check_eps(eps)?;
    if d_m == 0 {
        return Err(CliError::Input("--dm must be positive".into()));
    }
    let (_, n) = load_channel(channel)?;
    let res = certified(&n, settings)?;
    rate_gate(&res, d_m, eps)?;
    let (theta, bound) = build_scheme(&n, &res, scheme, d_m, eps)?;
    let out = theta.apply(&n)?;
    let est = conditional_error_quantum(&out, SEARCH_RESTARTS, seed)?;
    let meets = match scheme {
        Scheme::Teleport => bound <= eps,
        Scheme::Pna => est.heuristic_worst <= eps + 1e-6,
    };
    let report = SimulateReport {
        scheme: match scheme {
            Scheme::Teleport => "teleport",
            Scheme::Pna => "pna",
        },
        d_m,
        eps,
        iomega_lower: res.lower.0,
        iomega_upper: res.upper.0,
        error_bound: bound,
        me_error: est.me_value,
        searched_error: est.heuristic_worst,
        conclusive_probability: out.choi().trace().re,
        meets_target: meets,
        seed,
    };
    match settings.format {
        Format::Json => to_json(&report),
        Format::Csv => Ok(format!(
            "scheme,d_m,eps,error_bound,me_error,searched_error,conclusive_probability\n{},{},{},{},{},{},{}\n",
            report.scheme,
            d_m,
            fmt17(eps),
            fmt17(bound),
            fmt17(est.me_value),
            fmt17(est.heuristic_worst),
            fmt17(report.conclusive_probability)
        )),
        Format::Text => {
            let label = match scheme {
                Scheme::Teleport => "conditional error bound",
                Scheme::Pna => "conditional error target",
            };
            Ok(format!(
                "{} code, d_M = {d_m}, eps = {eps}\n{label}: {bound:.9}\nerror at maximally entangled input: {:.9}\nlargest error found by search: {:.9}\nconclusive probability: {:.9}\n{}\n",
                report.scheme,
                est.me_value,
                est.heuristic_worst,
                report.conclusive_probability,
                if meets { "meets target" } else { "does NOT meet target" }
            ))
        }
    }
}

/// Supermaps that `check` can build without a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckScheme {
    Teleport,
    Pna,
    Ctc,
    Depolarizing,
}

/// Which properties `check` evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckDirection {
    Ab,
    Ba,
    Replacement,
    All,
}

#[derive(Debug, Clone, Default, Serialize)]
struct CheckReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    a_to_b_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_to_a_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    replacement_preserving_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale_c: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn check(
    supermap: Option<&str>,
    scheme: Option<CheckScheme>,
    channel: Option<&str>,
    d_m: usize,
    eps: f64,
    direction: CheckDirection,
    samples: usize,
    seed: u64,
    settings: &Settings,
) -> Result<String, CliError> {
    let theta = match (supermap, scheme) {
        (Some(path), None) => SupermapFile::load(path)?.build()?,
        (None, Some(CheckScheme::Ctc)) => build_pea_supermap(&ctc_counterexample(2)?)?,
        (None, Some(CheckScheme::Depolarizing)) => {
            let (d_a, d_b) = match channel {
                Some(ch) => {
                    let (_, n) = load_channel(ch)?;
                    (n.d_in(), n.d_out())
                }
                None => (2, 2),
            };
            Supermap::completely_depolarizing(d_m, d_a, d_b, d_m)
        }
        (None, Some(s)) => {
            let ch = channel.ok_or_else(|| CliError::Input("this scheme needs --channel".into()))?;
            let (_, n) = load_channel(ch)?;
            let res = certified(&n, settings)?;
            let scheme = if s == CheckScheme::Teleport { Scheme::Teleport } else { Scheme::Pna };
            if scheme == Scheme::Pna {
                check_eps(eps)?;
                rate_gate(&res, d_m, eps)?;
            }
            build_scheme(&n, &res, scheme, d_m, eps)?.0
        }
        _ => return Err(CliError::Input("give exactly one of --supermap and --scheme".into())),
    };
    let mut report = CheckReport::default();
    let want = |d: CheckDirection| direction == d || direction == CheckDirection::All;
    if want(CheckDirection::Ab) {
        report.a_to_b_violation = Some(check_nonsignalling(&theta, Direction::AliceToBob, samples, seed)?);
    }
    if want(CheckDirection::Ba) {
        report.b_to_a_violation = Some(check_nonsignalling(&theta, Direction::BobToAlice, samples, seed)?);
    }
    if want(CheckDirection::Replacement) {
        let fit = check_replacement_preserving(&theta, samples, seed)?;
        report.replacement_preserving_violation = Some(fit.violation);
        report.scale_c = Some(fit.p);
    }
    match settings.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let cell = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
            Ok(format!(
                "a_to_b_violation,b_to_a_violation,replacement_preserving_violation,scale_c\n{},{},{},{}\n",
                cell(report.a_to_b_violation),
                cell(report.b_to_a_violation),
                cell(report.replacement_preserving_violation),
                cell(report.scale_c)
            ))
        }
        Format::Text => {
            let mut s = String::new();
            if let Some(v) = report.a_to_b_violation {
                s.push_str(&format!("Alice-to-Bob signalling: {v:.3e}\n"));
            }
            if let Some(v) = report.b_to_a_violation {
                s.push_str(&format!("Bob-to-Alice signalling: {v:.3e}\n"));
            }
            if let (Some(v), Some(p)) = (report.replacement_preserving_violation, report.scale_c) {
                s.push_str(&format!("replacement preservation residual: {v:.3e} (p = {p:.9})\n"));
            }
            Ok(s)
        }
    }
}

/// Slack allowed between a reported bound and the re-validated certificate.
const VERIFY_SLACK: f64 = 1e-9;

pub fn verify(path: &str, settings: &Settings) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?;
    let report: ReportFile =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("malformed report {path}: {e}")))?;
    let n = report.channel.build()?;
    let psd_tol = report.tolerances.psd_tol;
    let fail = |msg: String| Err(CliError::Input(format!("verification failed: {msg}")));

    let dual = DualCertificate {
        p: matrix_from_json(&report.certificates.dual.p)?,
        q: matrix_from_json(&report.certificates.dual.q)?,
    };
    let lower = match validate_channel_dual(&n, &dual, psd_tol)? {
        Some(b) => b,
        None => return fail("dual certificate is not feasible".into()),
    };
    if report.iomega.lower > lower.0 + VERIFY_SLACK {
        return fail(format!("reported lower bound {} exceeds the certified {}", report.iomega.lower, lower.0));
    }
    let upper = match &report.certificates.primal {
        Some(pj) => {
            let primal = PrimalCertificate { xi: pj.xi, s: matrix_from_json(&pj.s)? };
            if !validate_channel_primal(&n, &primal, psd_tol)? {
                return fail("primal certificate is not feasible".into());
            }
            primal.bits()
        }
        None if lower == Bits::INF => Bits::INF,
        None => return fail("finite report without a primal certificate".into()),
    };
    if report.iomega.upper < upper.0 - VERIFY_SLACK {
        return fail(format!("reported upper bound {} is below the certified {}", report.iomega.upper, upper.0));
    }
    if report.iomega.finite != upper.is_finite() {
        return fail("finiteness flag disagrees with the certificates".into());
    }
    for row in &report.capacity {
        let again = capacity_row(&CapacityReport::from_bracket(
            Bits(report.iomega.lower),
            Bits(report.iomega.upper),
            row.eps,
        )?);
        if again != *row {
            return fail(format!("capacity row at eps = {} does not follow from the bracket", row.eps));
        }
    }
    let bracket = if upper.is_finite() {
        let (lo, hi) = outward6(lower.0, upper.0);
        format!("I_omega in [{lo}, {hi}] bits")
    } else {
        "I_omega = +inf".to_string()
    };
    let msg = format!("report verified: {bracket}, {} capacity rows\n", report.capacity.len());
    match settings.format {
        Format::Json => to_json(&serde_json::json!({ "verified": true, "lower": fmt17(lower.0), "upper": fmt17(upper.0) })),
        _ => Ok(msg),
    }
}
