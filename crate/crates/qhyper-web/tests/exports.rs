use qhyper_web::{check_identities, eval_2phi1, identity_names, spectral_density};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn outputs_are_json_and_deterministic() {
    assert_eq!(check_identities(3, 9), check_identities(3, 9));
    assert_eq!(parse(&identity_names())[0], "q-binomial");
    let v = parse(&spectral_density(0.5, 0.2, -1.0, 0.4, 4));
    assert_eq!(v["params"]["d"].as_f64(), Some(0.4));
}

#[test]
fn divergence_is_reported_in_band() {
    // (z;q)_inf vanishes at z = 1
    let v = parse(&eval_2phi1(0.3, 0.7, 0.45, 0.5, 1.0, 0.0));
    assert!(v["error"].as_str().unwrap().contains("pole"), "{v}");
    let v = parse(&eval_2phi1(0.3, 0.7, 0.45, 0.5, 0.2, 0.1));
    assert!(v["value"][1].as_f64().unwrap() != 0.0);
}
