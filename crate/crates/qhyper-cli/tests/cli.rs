use std::process::{Command, Output};

use qhyper::series::phi21;
use qhyper::{Base, ToleranceConfig, C64};
use serde_json::Value;

fn qhyper(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhyper")).args(args).env_remove("QHYPER_MAX_TERMS").output().unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const EVAL_2PHI1: [&str; 11] = ["eval", "--series", "2phi1", "--num", "0.3,0.7", "--den", "0.45", "--q", "0.5", "--z", "0.2"];

#[test]
fn eval_matches_the_library() {
    let mut args = vec!["--format", "json"];
    args.extend(EVAL_2PHI1);
    let out = qhyper(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json_of(&out);
    let want = phi21(
        C64::new(0.3, 0.0),
        C64::new(0.7, 0.0),
        C64::new(0.45, 0.0),
        Base::new(0.5).unwrap(),
        C64::new(0.2, 0.0),
        &ToleranceConfig::default(),
    )
    .unwrap();
    let got = &v["result"]["value"];
    assert_eq!(got[0].as_f64().unwrap(), want.value.re);
    assert_eq!(got[1].as_f64().unwrap(), want.value.im);
    assert!(v["result"]["tail_bound"].as_f64().unwrap() > 0.0);
    assert_eq!(v["class"], "absolutely-convergent");
}

#[test]
fn terminating_eval_has_zero_tail() {
    let out = qhyper(&[
        "--format",
        "json",
        "eval",
        "--series",
        "2phi1",
        "--terminating",
        "3",
        "--num",
        "0.7",
        "--den",
        "0.45",
        "--q",
        "0.5",
        "--z",
        "0.2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["result"]["tail_bound"].as_f64(), Some(0.0));
    assert_eq!(v["result"]["terms_used"].as_u64(), Some(4));
    assert_eq!(v["class"], "terminating(3)");
}

#[test]
fn chu_vandermonde_through_the_cli() {
    // 2phi1(q^-1, a; c; q, q) = (c/a;q)_1 a^1 / (c;q)_1 = (a - c)/(1 - c)
    let out = qhyper(&[
        "--format",
        "json",
        "eval",
        "--series",
        "2phi1",
        "--terminating",
        "1",
        "--num",
        "0.3",
        "--den",
        "0.7",
        "--q",
        "0.5",
        "--z",
        "0.5",
    ]);
    let v = json_of(&out);
    let got = v["result"]["value"][0].as_f64().unwrap();
    assert!((got - (0.3 - 0.7) / (1.0 - 0.7)).abs() < 1e-15, "{got}");
}

#[test]
fn divergent_eval_exits_2() {
    let mut args = EVAL_2PHI1.to_vec();
    *args.last_mut().unwrap() = "1.5";
    let out = qhyper(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("divergent"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_64() {
    for args in [
        vec!["eval", "--series", "2phi1", "--num", "0.3", "--den", "0.45", "--q", "0.5", "--z", "0.2"],
        vec!["eval", "--series", "twophione", "--q", "0.5", "--z", "0.2"],
        vec!["eval", "--series", "1phi0", "--num", "x", "--q", "0.5", "--z", "0.2"],
        vec!["check", "nonsense"],
        vec!["frobnicate"],
        vec!["check", "bhde", "--count", "0"],
    ] {
        let out = qhyper(&args);
        assert_eq!(out.status.code(), Some(64), "{args:?}: {}", stderr(&out));
    }
    assert_eq!(qhyper(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_base_is_a_domain_error() {
    let out = qhyper(&["eval", "--series", "1phi0", "--num", "0.3", "--q", "1.5", "--z", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn max_terms_env_override() {
    let mut args = EVAL_2PHI1.to_vec();
    *args.last_mut().unwrap() = "0.9";
    let bin = env!("CARGO_BIN_EXE_qhyper");
    let out = Command::new(bin).args(&args).env("QHYPER_MAX_TERMS", "5").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("5 terms"), "{}", stderr(&out));
    let out = Command::new(bin).args(&args).env("QHYPER_MAX_TERMS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(64));
    let out = Command::new(bin).args(&args).env("QHYPER_MAX_TERMS", "100000").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn identity_suite_passes() {
    let out = qhyper(&["--format", "json", "check", "identities", "--count", "20", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json_of(&out);
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 8);
    for c in checks {
        assert!(c["worst"].as_f64().unwrap() < 1e-11);
        assert_eq!(c["points"].as_u64(), Some(20));
    }
}

#[test]
fn every_suite_exits_zero() {
    for suite in ["bhde", "lqjacobi", "spectral", "transmutation", "askey-wilson"] {
        let out = qhyper(&["check", suite, "--count", "5", "--seed", "3"]);
        assert_eq!(out.status.code(), Some(0), "{suite}: {}", String::from_utf8_lossy(&out.stdout));
    }
    let out = qhyper(&["--format", "json", "check", "matrix", "--n", "3", "--count", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["params"]["n"].as_u64(), Some(3));
}

#[test]
fn lqjacobi_flags_reach_the_gram_matrix() {
    let out = qhyper(&["--format", "json", "check", "lqjacobi", "--alpha", "0.6", "--beta", "0.3", "--q", "0.5", "--nmax", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    // 11 x 11 Gram: 110 off-diagonal entries and 11 diagonal ones.
    assert_eq!(v["checks"][0]["points"].as_u64(), Some(110));
    assert_eq!(v["checks"][1]["points"].as_u64(), Some(11));
    let bad = qhyper(&["check", "lqjacobi", "--alpha", "2.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn check_output_is_deterministic() {
    let args = ["--format", "json", "check", "transmutation", "--count", "4", "--seed", "11"];
    assert_eq!(qhyper(&args).stdout, qhyper(&args).stdout);
}

#[test]
fn spectral_measure_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let p = path.to_str().unwrap();
    let out = qhyper(&["measure", "spectral", "--q", "0.5", "--c", "0.2", "--r", "-1", "--d", "0.4", "--out", p, "--samples", "16"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("completeness"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["density_samples"].as_array().unwrap().len(), 16);
    assert!(!v["atoms"].as_array().unwrap().is_empty());
    assert_eq!(v["params"]["c"].as_f64(), Some(0.2));
    assert!(v.get("family").is_none());
    let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(csv.starts_with("kind,x,value\n"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("density,")).count(), 16);

    let again = dir.path().join("m2.json");
    qhyper(&[
        "measure",
        "spectral",
        "--q",
        "0.5",
        "--c",
        "0.2",
        "--r",
        "-1",
        "--d",
        "0.4",
        "--out",
        again.to_str().unwrap(),
        "--samples",
        "16",
    ]);
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn spectral_c_out_of_range() {
    let out = qhyper(&["measure", "spectral", "--q", "0.5", "--c", "0.3", "--r", "-1", "--d", "0.4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("c must satisfy 0<c≤q²"), "{}", stderr(&out));
}

#[test]
fn askey_wilson_measure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("aw.json");
    let csv = dir.path().join("table.csv");
    let out = qhyper(&[
        "measure",
        "aw",
        "--a",
        "1.2",
        "--b",
        "0.5",
        "--c",
        "0.6",
        "--d",
        "2.5",
        "-t",
        "-0.3",
        "--q",
        "0.5",
        "--out",
        path.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--samples",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["family"], "askey-wilson");
    assert_eq!(v["density_samples"].as_array().unwrap().len(), 8);
    assert!(v["atoms"].as_array().unwrap().iter().all(|a| a[1].as_f64().unwrap() > 0.0));
    assert!(csv.exists());
}

#[test]
fn askey_wilson_outside_v_is_rejected() {
    let out = qhyper(&["measure", "aw", "--a", "0.3", "--b", "0.5", "--c", "0.6", "--d", "2.5", "-t", "-0.5", "--q", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("outside V"), "{}", stderr(&out));
}
