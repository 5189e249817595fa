//! Flag definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qhyper::C64;

#[derive(Debug, Parser)]
#[command(name = "qhyper", version, about = "Basic hypergeometric series, residual suites and spectral measures")]
pub struct Cli {
    /// Output format on stdout.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate an r-phi-s series.
    Eval(EvalArgs),
    /// Run a seeded residual suite.
    Check(CheckArgs),
    /// Tabulate a spectral or Askey-Wilson measure.
    #[command(subcommand)]
    Measure(MeasureCommand),
}

/// Complex numbers are written `0.3`, `0.3+0.2i` or `-1.5i`.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    s.trim().parse::<C64>().map_err(|_| format!("`{s}` is not a complex number"))
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EvalArgs {
    /// Series shape such as `2phi1`; it must match the parameter counts.
    #[arg(long)]
    pub series: String,
    /// Generic numerator parameters, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_complex)]
    pub num: Vec<C64>,
    /// Denominator parameters, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_complex)]
    pub den: Vec<C64>,
    #[arg(long)]
    pub q: f64,
    #[arg(long, value_parser = parse_complex)]
    pub z: C64,
    /// Prepend the numerator q^{-n}, making the series a polynomial of degree n.
    #[arg(long)]
    pub terminating: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteName {
    Identities,
    Bhde,
    Lqjacobi,
    Spectral,
    Transmutation,
    AskeyWilson,
    Matrix,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(value_enum)]
    pub suite: SuiteName,
    /// Random points (or triples) per check.
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Matrix dimension for `matrix`.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Little q-Jacobi parameters for `lqjacobi`.
    #[arg(long, default_value_t = 0.6)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    /// Largest degree in the Gram matrix.
    #[arg(long, default_value_t = 10)]
    pub nmax: u32,
}

#[derive(Debug, Subcommand)]
pub enum MeasureCommand {
    /// Spectral measure of the doubly infinite Jacobi operator.
    Spectral(SpectralArgs),
    /// Askey-Wilson function transform measure.
    Aw(AwArgs),
}

#[derive(Debug, Args)]
pub struct MeasureOut {
    /// Measure JSON destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Density and atom table; defaults to the JSON path with a `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Density samples strictly inside (0, pi).
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SpectralArgs {
    #[arg(long)]
    pub q: f64,
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub d: f64,
    #[command(flatten)]
    pub out: MeasureOut,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct AwArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub d: f64,
    #[arg(short = 't', long = "t")]
    pub t: f64,
    #[arg(long)]
    pub q: f64,
    #[command(flatten)]
    pub out: MeasureOut,
}
