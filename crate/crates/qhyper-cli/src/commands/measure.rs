use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qhyper::askeywilson::{aw_measure, AwParams};
use qhyper::spectral::{check_orthogonality, spectral_measure, SpectralParams};
use qhyper::ToleranceConfig;
use serde_json::{json, Value};

use super::RunReport;
use crate::args::{AwArgs, MeasureOut, SpectralArgs};
use crate::error::CliError;
use crate::output::{render, sci};

/// Tolerance on `<E(R) e_0, e_0> = 1`.
const COMPLETENESS_TOL: f64 = 1e-6;

/// Density samples and atoms in a family-independent shape.
struct Tabulated {
    samples: Vec<(f64, f64)>,
    atoms: Vec<(f64, f64)>,
}

fn artifact(family: Option<&str>, params: &Value, t: &Tabulated) -> Value {
    let mut v = json!({
        "density_samples": t.samples.iter().map(|&(x, y)| json!([x, y])).collect::<Vec<_>>(),
        "atoms": t.atoms.iter().map(|&(x, m)| json!([x, m])).collect::<Vec<_>>(),
        "params": params,
    });
    if let Some(f) = family {
        v["family"] = json!(f);
    }
    v
}

fn write_csv(path: &Path, t: &Tabulated) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["kind", "x", "value"])?;
    for &(x, y) in &t.samples {
        w.write_record(["density", &x.to_string(), &y.to_string()])?;
    }
    for &(x, m) in &t.atoms {
        w.write_record(["atom", &x.to_string(), &m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the JSON artifact and its CSV companion; returns the paths written.
fn write_outputs(out: &MeasureOut, artifact: &Value, t: &Tabulated) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    if let Some(path) = &out.out {
        fs::write(path, render(artifact) + "\n")?;
        written.push(path.clone());
    }
    let csv_path = out.csv.clone().or_else(|| out.out.as_ref().map(|p| p.with_extension("csv")));
    if let Some(path) = csv_path {
        write_csv(&path, t)?;
        written.push(path);
    }
    Ok(written)
}

fn atom_table(label: &str, atoms: &[(f64, f64)]) -> String {
    let mut s = format!("{} atoms\n  {:>24}  {:>24}\n", atoms.len(), label, "mass");
    for &(x, m) in atoms {
        let _ = writeln!(s, "  {x:>24.16e}  {m:>24.16e}");
    }
    s
}

fn check_samples(n: usize) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    Ok(())
}

fn paths_json(paths: &[PathBuf]) -> Value {
    json!(paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>())
}

pub fn spectral(args: &SpectralArgs, tol: &ToleranceConfig) -> Result<RunReport, CliError> {
    check_samples(args.out.samples)?;
    let p = SpectralParams::new(args.q, args.c, args.r, args.d)?;
    let m = spectral_measure(&p)?;
    let t = Tabulated { samples: m.density_samples(args.out.samples)?, atoms: m.atoms.iter().map(|a| (a.point, a.mass)).collect() };
    let params = json!({"q": args.q, "c": args.c, "r": args.r, "d": args.d});
    let written = write_outputs(&args.out, &artifact(None, &params, &t), &t)?;
    let completeness = check_orthogonality(0, 0, &p, tol)?;
    let passed = completeness < COMPLETENESS_TOL;

    let json = json!({
        "command": "measure spectral",
        "params": params,
        "provenance": "spectral::spectral_measure",
        "atoms": t.atoms.len(),
        "samples": t.samples.len(),
        "completeness_residual": completeness,
        "completeness_tolerance": COMPLETENESS_TOL,
        "written": paths_json(&written),
        "pass": passed,
    });
    let mut text = atom_table("point", &t.atoms);
    let _ = writeln!(text, "completeness |<E(R) e_0, e_0> - 1| = {}  ({})", sci(completeness), if passed { "PASS" } else { "FAIL" });
    for p in &written {
        let _ = writeln!(text, "wrote {}", p.display());
    }
    Ok(RunReport { json, text, passed })
}

pub fn askey_wilson(args: &AwArgs, tol: &ToleranceConfig) -> Result<RunReport, CliError> {
    check_samples(args.out.samples)?;
    // `transform` rejects parameters outside V before any numerics run.
    let p = AwParams::transform(args.a, args.b, args.c, args.d, args.t, args.q)?;
    let m = aw_measure(&p, tol)?;
    let n = args.out.samples;
    let samples = (1..=n)
        .map(|i| {
            let theta = std::f64::consts::PI * i as f64 / (n + 1) as f64;
            Ok((theta, m.density(theta)?))
        })
        .collect::<qhyper::Result<Vec<_>>>()?;
    let t = Tabulated { samples, atoms: m.atoms().map(|a| (a.x, a.mass)).collect() };
    let params = json!({"a": args.a, "b": args.b, "c": args.c, "d": args.d, "t": args.t, "q": args.q});
    let written = write_outputs(&args.out, &artifact(Some("askey-wilson"), &params, &t), &t)?;
    let positive = t.samples.iter().all(|&(_, v)| v > 0.0) && t.atoms.iter().all(|&(_, m)| m > 0.0);

    let json = json!({
        "command": "measure aw",
        "params": params,
        "provenance": "askeywilson::aw_measure",
        "atoms": t.atoms.len(),
        "samples": t.samples.len(),
        "normalization": m.k_norm,
        "positive": positive,
        "written": paths_json(&written),
        "pass": positive,
    });
    let mut text = atom_table("x", &t.atoms);
    let _ = writeln!(text, "normalization K = {:.16e}", m.k_norm);
    let _ = writeln!(text, "density and masses positive: {}", if positive { "PASS" } else { "FAIL" });
    for p in &written {
        let _ = writeln!(text, "wrote {}", p.display());
    }
    Ok(RunReport { json, text, passed: positive })
}
