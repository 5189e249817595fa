//! `qhyper`: series evaluation, residual suites and measure tabulation.
//!
//! Exit codes: 0 pass, 1 tolerance failure, 2 domain or regime error, 64 usage.

mod args;
mod commands;
mod error;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use qhyper::ToleranceConfig;

use args::{Cli, Command, Format, MeasureCommand};
use commands::RunReport;
use error::CliError;

const MAX_TERMS_VAR: &str = "QHYPER_MAX_TERMS";

fn tolerance() -> Result<ToleranceConfig, CliError> {
    let mut tol = ToleranceConfig::default();
    if let Ok(raw) = std::env::var(MAX_TERMS_VAR) {
        let n: usize = raw.trim().parse().map_err(|_| CliError::Usage(format!("{MAX_TERMS_VAR}=`{raw}` is not a positive integer")))?;
        tol = ToleranceConfig::new(tol.abs_tol, n).map_err(|e| CliError::Usage(format!("{MAX_TERMS_VAR}: {e}")))?;
    }
    Ok(tol)
}

fn dispatch(cli: &Cli) -> Result<RunReport, CliError> {
    let tol = tolerance()?;
    match &cli.command {
        Command::Eval(a) => commands::eval::run(a, &tol),
        Command::Check(a) => commands::check::run(a, &tol),
        Command::Measure(MeasureCommand::Spectral(a)) => commands::measure::spectral(a, &tol),
        Command::Measure(MeasureCommand::Aw(a)) => commands::measure::askey_wilson(a, &tol),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    let started = std::time::Instant::now();
    match dispatch(&cli) {
        Ok(report) => {
            match cli.format {
                Format::Json => println!("{}", output::render(&report.json)),
                Format::Text => print!("{}", report.text),
            }
            // Wall time goes to stderr so the JSON stays byte-identical across runs.
            eprintln!("elapsed {:.3} s", started.elapsed().as_secs_f64());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("qhyper: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("run `qhyper --help` for usage");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
