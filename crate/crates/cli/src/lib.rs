//! Command-line front end for the postselected capacity toolkit.
//!
//! `run` parses arguments, dispatches to a subcommand and returns the exit code:
//! 0 success, 1 input error, 2 solver failure, 3 infeasible rate.

pub mod commands;
pub mod error;
pub mod schema;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use postsel::hermkernel::{PSD_TOL, RANK_TOL};

use commands::{CheckDirection, CheckScheme, Format, Scheme, Settings};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "postsel", version, about = "Postselected communication capacities of quantum channels")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Target width of the I_omega bracket, in bits.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub gap: f64,
    /// Eigenvalue slack when validating certificates.
    #[arg(long, global = true, default_value_t = PSD_TOL)]
    pub psd_tol: f64,
    /// Relative eigenvalue cutoff for supports.
    #[arg(long, global = true, default_value_t = RANK_TOL)]
    pub rank_tol: f64,
    #[arg(long, global = true, conflicts_with = "csv")]
    pub json: bool,
    #[arg(long, global = true)]
    pub csv: bool,
    /// Write the output to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Omit the timestamp so identical inputs give identical bytes.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certified bracket on the projective mutual information of a channel.
    Iomega {
        /// Channel JSON file, or `builtin:NAME[:key=value,...]`.
        #[arg(long)]
        channel: String,
    },
    /// One-shot and asymptotic capacity bounds.
    Capacity {
        #[arg(long)]
        channel: String,
        #[arg(long, conflicts_with = "eps_grid", required_unless_present = "eps_grid")]
        eps: Option<f64>,
        /// Grid `A:B:STEP`.
        #[arg(long)]
        eps_grid: Option<String>,
    },
    /// Builds a code for the channel and evaluates its conditional error.
    Simulate {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        dm: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = SchemeArg::Teleport)]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Signalling and replacement-preservation checks on a supermap.
    Check {
        /// Supermap JSON file with `d_a`, `d_b`, `pre` and `post` channel descriptions.
        #[arg(long, conflicts_with = "scheme", required_unless_present = "scheme")]
        supermap: Option<String>,
        #[arg(long, value_enum)]
        scheme: Option<CheckSchemeArg>,
        #[arg(long)]
        channel: Option<String>,
        #[arg(long, default_value_t = 2)]
        dm: usize,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = DirectionArg::All)]
        direction: DirectionArg,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-validates the certificates in a JSON report.
    Verify {
        #[arg(long)]
        report: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    Teleport,
    Pna,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CheckSchemeArg {
    Teleport,
    Pna,
    Ctc,
    Depolarizing,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Ab,
    Ba,
    Replacement,
    All,
}

fn settings(g: &GlobalOpts) -> Settings {
    let format = if g.json {
        Format::Json
    } else if g.csv {
        Format::Csv
    } else {
        Format::Text
    };
    Settings { gap_bits: g.gap, psd_tol: g.psd_tol, rank_tol: g.rank_tol, format, deterministic: g.deterministic }
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    let s = settings(&cli.global);
    if !(s.gap_bits > 0.0 && s.psd_tol >= 0.0 && s.rank_tol >= 0.0) {
        return Err(CliError::Input("tolerances must be nonnegative and the gap positive".into()));
    }
    match &cli.command {
        Command::Iomega { channel } => commands::iomega(channel, &s),
        Command::Capacity { channel, eps, eps_grid } => commands::capacity(channel, *eps, eps_grid.as_deref(), &s),
        Command::Simulate { channel, dm, eps, scheme, seed } => {
            let scheme = match scheme {
                SchemeArg::Teleport => Scheme::Teleport,
                SchemeArg::Pna => Scheme::Pna,
            };
            commands::simulate(channel, *dm, *eps, scheme, *seed, &s)
        }
        Command::Check { supermap, scheme, channel, dm, eps, direction, samples, seed } => {
            let scheme = scheme.map(|x| match x {
                CheckSchemeArg::Teleport => CheckScheme::Teleport,
                CheckSchemeArg::Pna => CheckScheme::Pna,
                CheckSchemeArg::Ctc => CheckScheme::Ctc,
                CheckSchemeArg::Depolarizing => CheckScheme::Depolarizing,
            });
            let direction = match direction {
                DirectionArg::Ab => CheckDirection::Ab,
                DirectionArg::Ba => CheckDirection::Ba,
                DirectionArg::Replacement => CheckDirection::Replacement,
                DirectionArg::All => CheckDirection::All,
            };
            commands::check(supermap.as_deref(), scheme, channel.as_deref(), *dm, *eps, direction, *samples, *seed, &s)
        }
        Command::Verify { report } => commands::verify(report, &s),
    }
}

/// Runs the command line `args` (program name first), writing to `out` and `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(text) => {
            if let Some(path) = &cli.global.out {
                if let Err(e) = std::fs::write(path, &text) {
                    let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
                    return 1;
                }
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
