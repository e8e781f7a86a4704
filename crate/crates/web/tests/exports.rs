use lumpwave_web::{egorov_json, predict_json, spectrum_json, MAX_SPECTRUM_K};
use serde_json::Value;

#[test]
fn predict_matches_the_core_crate() {
    let v: Value = serde_json::from_str(&predict_json(60, 0.5, 0.4, 8).unwrap()).unwrap();
    assert_eq!(v["k"], 60);
    assert!(v["tau_im"].as_f64().unwrap() > 0.0);
    assert!((v["tau_re"].as_f64().unwrap() - 60.0).abs() < 2.0);
}

#[test]
fn spectrum_stays_in_the_damping_band() {
    let v: Value = serde_json::from_str(&spectrum_json(12, 0.5, 0.4, 8).unwrap()).unwrap();
    let sup = v["sup_a"].as_f64().unwrap();
    let eig = v["eigenvalues"].as_array().unwrap();
    assert!(!eig.is_empty());
    for e in eig {
        let im = e["im"].as_f64().unwrap();
        assert!(im >= -1e-8 && im <= sup / 2.0 + 1e-8);
    }
    assert!(spectrum_json(MAX_SPECTRUM_K + 1, 0.5, 0.4, 8).is_err());
}

#[test]
fn egorov_rotates_the_centre() {
    let t = 0.5f64;
    let v: Value = serde_json::from_str(&egorov_json(0.05, 1.0, 0.0, t).unwrap()).unwrap();
    assert!(v["residual"].as_f64().unwrap() < 1e-8);
    let c = v["center"].as_array().unwrap();
    assert!((c[0].as_f64().unwrap() - t.cos()).abs() < 1e-6);
    assert!((c[1].as_f64().unwrap() - t.sin()).abs() < 1e-6);
}

#[test]
fn bad_damping_is_rejected() {
    assert!(predict_json(60, -1.0, 0.4, 8).is_err());
}
