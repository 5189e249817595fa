use qhyper::series::{classify, eval_rphis, Param, SeriesSpec};
use qhyper::{Base, ToleranceConfig};
use serde_json::json;

use super::RunReport;
use crate::args::EvalArgs;
use crate::error::CliError;
use crate::output::{complex, complex_text, truncated};

/// `"2phi1"` -> `(2, 1)`.
fn parse_shape(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--series `{s}` is not of the form <r>phi<s>"));
    let (r, s) = s.split_once("phi").ok_or_else(bad)?;
    Ok((r.parse().map_err(|_| bad())?, s.parse().map_err(|_| bad())?))
}

pub fn run(args: &EvalArgs, tol: &ToleranceConfig) -> Result<RunReport, CliError> {
    let (r, s) = parse_shape(&args.series)?;
    let mut nums: Vec<Param> = args.terminating.map(Param::TerminatingPower).into_iter().collect();
    nums.extend(args.num.iter().copied().map(Param::Generic));
    if nums.len() != r || args.den.len() != s {
        return Err(CliError::Usage(format!(
            "--series {} expects {r} numerator and {s} denominator parameters, got {} and {}",
            args.series,
            nums.len(),
            args.den.len()
        )));
    }
    let q = Base::new(args.q)?;
    let spec = SeriesSpec::new(nums, args.den.iter().copied().map(Param::Generic).collect(), q, args.z);
    let class = classify(&spec);
    let v = eval_rphis(&spec, tol)?;

    let json = json!({
        "command": "eval",
        "params": {
            "series": args.series,
            "num": args.num.iter().map(|&z| complex(z)).collect::<Vec<_>>(),
            "den": args.den.iter().map(|&z| complex(z)).collect::<Vec<_>>(),
            "q": args.q,
            "z": complex(args.z),
            "terminating": args.terminating,
        },
        "class": class.to_string(),
        "result": truncated(&v),
        "provenance": "series::eval_rphis",
        "pass": true,
    });
    let text = format!(
        "{}  class {class}\nvalue       {}\ntail bound  {:e}\nterms used  {}\n",
        args.series,
        complex_text(v.value),
        v.tail_bound,
        v.terms_used
    );
    Ok(RunReport { json, text, passed: true })
}
