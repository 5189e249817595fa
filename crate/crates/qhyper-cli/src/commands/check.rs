use std::fmt::Write;

use qhyper::suites::{run_suite, Bound, Suite, SuiteOptions};
use qhyper::ToleranceConfig;
use serde_json::json;

use super::RunReport;
use crate::args::{CheckArgs, SuiteName};
use crate::error::CliError;
use crate::output::sci;

fn suite(name: SuiteName) -> Suite {
    match name {
        SuiteName::Identities => Suite::Identities,
        SuiteName::Bhde => Suite::Bhde,
        SuiteName::Lqjacobi => Suite::LqJacobi,
        SuiteName::Spectral => Suite::Spectral,
        SuiteName::Transmutation => Suite::Transmutation,
        SuiteName::AskeyWilson => Suite::AskeyWilson,
        SuiteName::Matrix => Suite::Matrix,
    }
}

pub fn run(args: &CheckArgs, tol: &ToleranceConfig) -> Result<RunReport, CliError> {
    if args.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let opts =
        SuiteOptions { count: args.count, seed: args.seed, n: args.n, alpha: args.alpha, beta: args.beta, q: args.q, nmax: args.nmax };
    let report = run_suite(suite(args.suite), &opts, tol)?;
    let passed = report.passed();

    let checks: Vec<_> = report
        .checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "points": c.points,
                "worst": c.worst,
                "threshold": c.threshold,
                "bound": match c.bound { Bound::Below => "below", Bound::Above => "above" },
                "pass": c.passed(),
            })
        })
        .collect();
    let json = json!({
        "command": "check",
        "params": {
            "suite": report.suite.name(),
            "count": args.count,
            "seed": args.seed,
            "n": args.n,
            "alpha": args.alpha,
            "beta": args.beta,
            "q": args.q,
            "nmax": args.nmax,
        },
        "provenance": format!("suites::run_suite({})", report.suite),
        "checks": checks,
        "pass": passed,
    });

    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut text = format!("suite {}  seed {}  count {}\n", report.suite, args.seed, args.count);
    for c in &report.checks {
        let op = if c.bound == Bound::Below { "<" } else { ">" };
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(text, "  {:<width$}  {:>5} pts  {:>10} {op} {:<9}  {verdict}", c.name, c.points, sci(c.worst), sci(c.threshold));
    }
    let _ = writeln!(text, "{}", if passed { "PASS" } else { "FAIL" });
    Ok(RunReport { json, text, passed })
}
