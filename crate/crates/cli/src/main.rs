mod args;
mod commands;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use sharpbounds_core::{Rational, Scalar};

use args::{Cli, Command};
use commands::VerifyArgs;

/// An invalid combination of command-line parameters.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

const VERIFY_FAILED: u8 = 5;

fn run<T: Scalar>(cli: Cli) -> anyhow::Result<ExitCode> {
    let (format, tol) = (cli.format, cli.tolerance);
    let out = match cli.command {
        Command::Exact { input } => commands::exact::<T>(&input, format)?,
        Command::Bound { source, request } => commands::bound::<T>(&source, &request, format, tol)?,
        Command::Sweep { input } => commands::sweep::<T>(&input, format, tol)?,
        Command::Witness { source, request } => commands::witness::<T>(&source, &request, format)?,
        Command::Conditional { input, partition, request } => {
            commands::conditional::<T>(&input, &partition, &request, format, tol)?
        }
        Command::Verify { trials, n_min, n_max, seed, suite, mutation } => {
            let args = VerifyArgs { trials, n_min, n_max, seed, suites: suite, mutation };
            let (out, summary, passed) = commands::verify(args, format)?;
            print!("{out}");
            eprint!("{summary}");
            return Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(VERIFY_FAILED) });
        }
    };
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !(cli.tolerance >= 0.0 && cli.tolerance.is_finite()) {
        eprintln!("error: --tolerance must be a nonnegative number");
        return ExitCode::from(2);
    }
    let result = if cli.exact_arithmetic { run::<Rational>(cli) } else { run::<f64>(cli) };
    result.unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        ExitCode::from(commands::exit_code(&err))
    })
}
