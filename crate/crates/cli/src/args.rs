use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sharpbounds_core::verify::Suite;
use sharpbounds_core::{FormulaId, Side, Target};

/// Sharp bounds on the probability that at least (or exactly) r of n events
/// occur, computed from binomial moments.
#[derive(Debug, Parser)]
#[command(name = "sharpbounds", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Compute with exact rationals instead of f64.
    #[arg(long, global = true)]
    pub exact_arithmetic: bool,

    /// Slack for validity checks in f64 mode (ignored with exact arithmetic).
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tolerance: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact p_r and P_r by enumeration of a system file.
    Exact {
        #[arg(long)]
        input: PathBuf,
    },
    /// One bound certificate.
    Bound {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        request: RequestArgs,
    },
    /// Best bounds for every r, d, ell, side and target.
    Sweep {
        #[arg(long)]
        input: PathBuf,
    },
    /// A bound certificate together with its per-tuple sharpness witnesses.
    Witness {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        request: RequestArgs,
    },
    /// Per-block bounds under a partition and their weighted aggregate.
    Conditional {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[command(flatten)]
        request: RequestArgs,
    },
    /// Randomized property suites against the enumeration oracle.
    Verify {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Restrict to these suites (repeatable).
        #[arg(long, value_parser = parse_suite)]
        suite: Vec<Suite>,
        #[arg(long, hide = true, value_enum)]
        mutation: Option<MutationArg>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Event-system file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Moment file; no exact value is available in this mode.
    #[arg(long)]
    pub moments: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RequestArgs {
    #[arg(long)]
    pub r: usize,
    /// Tuple order; taken from the file with --moments.
    #[arg(long)]
    pub d: Option<usize>,
    /// Moments per tuple; defaults to 3, or the file's count with --moments.
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long, value_enum, default_value_t = TargetArg::AtLeast)]
    pub target: TargetArg,
    #[arg(long, value_enum, default_value_t = SideArg::Upper)]
    pub side: SideArg,
    /// Fixed m for families with an m parameter; chosen per tuple when absent.
    #[arg(long)]
    pub m: Option<usize>,
    /// A specific family (u1, u2, l1, l2, ub1, ub2, ub3, lb1, lb2, lb3, engine, jordan, ...).
    #[arg(long, value_parser = parse_formula)]
    pub formula: Option<FormulaId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    AtLeast,
    Exactly,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Target {
        match t {
            TargetArg::AtLeast => Target::AtLeast,
            TargetArg::Exactly => Target::Exactly,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SideArg {
    Upper,
    Lower,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Upper => Side::Upper,
            SideArg::Lower => Side::Lower,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MutationArg {
    U1OffByOne,
}

fn parse_formula(s: &str) -> Result<FormulaId, String> {
    s.parse().map_err(|e: sharpbounds_core::Error| e.to_string())
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    Suite::ALL.into_iter().find(|suite| suite.name() == s).ok_or_else(|| {
        let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
        format!("unknown suite `{s}` (expected one of {})", names.join(", "))
    })
}
