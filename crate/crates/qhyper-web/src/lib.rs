//! WebAssembly bindings behind `www/index.html`.
//!
//! Every export returns a JSON string: the result object on success, or
//! `{"error": "..."}`. Keeping errors in-band avoids constructing JS values,
//! so the same functions run and test natively.

use qhyper::series::{phi21_auto, Identity};
use qhyper::spectral::{spectral_measure, SpectralParams};
use qhyper::suites::{run_suite, Suite, SuiteOptions};
use qhyper::{Base, ToleranceConfig, C64};
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn pair(z: C64) -> Value {
    json!([z.re, z.im])
}

fn eval_inner(a: f64, b: f64, c: f64, q: f64, z_re: f64, z_im: f64) -> Result<Value, String> {
    let q = Base::new(q).map_err(|e| e.to_string())?;
    let z = C64::new(z_re, z_im);
    let v =
        phi21_auto(C64::new(a, 0.0), C64::new(b, 0.0), C64::new(c, 0.0), q, z, &ToleranceConfig::default()).map_err(|e| e.to_string())?;
    Ok(json!({ "value": pair(v.value), "tail_bound": v.tail_bound, "terms_used": v.terms_used }))
}

/// `2phi1(a, b; c; q, z)`, continued analytically outside the unit disc where possible.
#[wasm_bindgen]
pub fn eval_2phi1(a: f64, b: f64, c: f64, q: f64, z_re: f64, z_im: f64) -> String {
    respond(eval_inner(a, b, c, q, z_re, z_im))
}

fn suite_inner(count: u32, seed: u32) -> Result<Value, String> {
    if !(1..=200).contains(&count) {
        return Err("count must lie in 1..=200".into());
    }
    let opts = SuiteOptions { count: count as usize, seed: seed as u64, ..SuiteOptions::default() };
    let report = run_suite(Suite::Identities, &opts, &ToleranceConfig::default()).map_err(|e| e.to_string())?;
    let rows: Vec<Value> = report
        .checks
        .iter()
        .map(|c| json!({ "name": c.name, "points": c.points, "worst": c.worst, "threshold": c.threshold, "pass": c.passed() }))
        .collect();
    Ok(json!({ "checks": rows, "pass": report.passed() }))
}

/// Seeded residual run over the named identities.
#[wasm_bindgen]
pub fn check_identities(count: u32, seed: u32) -> String {
    respond(suite_inner(count, seed))
}

/// Names accepted by the identity suite, as a JSON array.
#[wasm_bindgen]
pub fn identity_names() -> String {
    json!(Identity::ALL.iter().map(|i| i.name()).collect::<Vec<_>>()).to_string()
}

fn measure_inner(q: f64, c: f64, r: f64, d: f64, samples: u32) -> Result<Value, String> {
    if !(1..=2000).contains(&samples) {
        return Err("samples must lie in 1..=2000".into());
    }
    let p = SpectralParams::new(q, c, r, d).map_err(|e| e.to_string())?;
    let m = spectral_measure(&p).map_err(|e| e.to_string())?;
    let density = m.density_samples(samples as usize).map_err(|e| e.to_string())?;
    Ok(json!({
        "density_samples": density.iter().map(|&(x, y)| json!([x, y])).collect::<Vec<_>>(),
        "atoms": m.atoms.iter().map(|a| json!([a.point, a.mass])).collect::<Vec<_>>(),
        "params": { "q": q, "c": c, "r": r, "d": d },
    }))
}

/// Density samples and atoms of the Jacobi operator's spectral measure.
#[wasm_bindgen]
pub fn spectral_density(q: f64, c: f64, r: f64, d: f64, samples: u32) -> String {
    respond(measure_inner(q, c, r, d, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn eval_inside_and_outside_the_disc() {
        let v = parse(&eval_2phi1(0.3, 0.7, 0.45, 0.5, 0.2, 0.0));
        assert!((v["value"][0].as_f64().unwrap() - 1.188_883_410_518_156_3).abs() < 1e-13);
        let far = parse(&eval_2phi1(0.8, 0.9, 0.12, 0.5, -2.0, 0.0));
        assert!(far.get("error").is_none(), "{far}");
        let bad = parse(&eval_2phi1(0.3, 0.7, 0.45, 1.5, 0.2, 0.0));
        assert!(bad["error"].as_str().unwrap().contains("q"));
    }

    #[test]
    fn identities_pass() {
        let v = parse(&check_identities(5, 1));
        assert_eq!(v["pass"], true);
        assert_eq!(v["checks"].as_array().unwrap().len(), parse(&identity_names()).as_array().unwrap().len());
        assert!(parse(&check_identities(0, 1)).get("error").is_some());
    }

    #[test]
    fn spectral_density_shape() {
        let v = parse(&spectral_density(0.5, 0.2, -1.0, 0.4, 10));
        assert_eq!(v["density_samples"].as_array().unwrap().len(), 10);
        assert!(v["atoms"].as_array().unwrap().iter().all(|a| a[1].as_f64().unwrap() > 0.0));
        let bad = parse(&spectral_density(0.5, 0.3, -1.0, 0.4, 10));
        assert!(bad["error"].as_str().unwrap().contains("c must satisfy"));
    }
}
