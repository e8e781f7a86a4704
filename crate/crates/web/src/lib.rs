//! WebAssembly bindings for the browser demo. Every export returns a JSON string.

use lumpwave::geometry::{DampingProfile, SurfaceProfile};
use lumpwave::hfio::{coherent_state, egorov_check, fio_apply, HermiteBasisGrid};
use lumpwave::quantize::{quasi_eigenvalue, FRule};
use lumpwave::spectral_oracle::{assemble_mode, grid_size, qep_spectrum, QepOptions, Window};
use lumpwave::{Error, Result};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest mode the page may ask the eigensolver for.
pub const MAX_SPECTRUM_K: u32 = 80;
const EPS: f64 = 0.3;

fn damping(z_a: f64, width: f64, k_van: u32) -> Result<DampingProfile> {
    if !(z_a > 0.0 && width > 0.0 && z_a + width < std::f64::consts::PI) || k_van == 0 {
        return Err(Error::Domain(format!("damping ramp ({z_a}, {width}, {k_van}) out of range")));
    }
    Ok(DampingProfile::ramp(z_a, width, k_van))
}

pub fn predict_json(k: u32, z_a: f64, width: f64, k_van: u32) -> Result<String> {
    let a = damping(z_a, width, k_van)?;
    let q = quasi_eigenvalue(k, &SurfaceProfile::default(), &a, EPS, FRule::Balanced)?;
    Ok(json!({
        "k": k, "m": q.m, "e": q.e, "f": q.f,
        "tau_re": q.tau.re, "tau_im": q.tau.im, "scaled_im": q.scaled_im(),
    })
    .to_string())
}

pub fn spectrum_json(k: u32, z_a: f64, width: f64, k_van: u32) -> Result<String> {
    if k == 0 || k > MAX_SPECTRUM_K {
        return Err(Error::Domain(format!("k must lie in 1..={MAX_SPECTRUM_K}")));
    }
    let a = damping(z_a, width, k_van)?;
    let op = assemble_mode(k, &SurfaceProfile::default(), &a, grid_size(k, 24))?;
    let spec = qep_spectrum(&op, &Window::around(k), &QepOptions::default())?;
    let pts: Vec<_> = spec.iter().map(|e| json!({ "re": e.tau.re, "im": e.tau.im, "residual": e.residual })).collect();
    Ok(json!({ "k": k, "sup_a": op.a_sup, "eigenvalues": pts }).to_string())
}

pub fn egorov_json(h: f64, x0: f64, xi0: f64, t: f64) -> Result<String> {
    let basis = HermiteBasisGrid::new(256, h)?;
    let f = basis.sample(coherent_state(x0, xi0, h));
    let residual = egorov_check(&f, &basis)?;
    let g = fio_apply(t, &f, &basis)?;
    let (x1, xi1) = basis.phase_space_center(&g);
    Ok(json!({
        "residual": residual,
        "norm_defect": (basis.norm(&g) - basis.norm(&f)).abs(),
        "center": [x1, xi1],
        "x": basis.x.iter().step_by(4).collect::<Vec<_>>(),
        "before": f.iter().step_by(4).map(|c| c.norm()).collect::<Vec<_>>(),
        "after": g.iter().step_by(4).map(|c| c.norm()).collect::<Vec<_>>(),
    })
    .to_string())
}

fn js(r: Result<String>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Quantized quasi-eigenvalue at mode `k` for a ramp damping.
#[wasm_bindgen]
pub fn predict(k: u32, z_a: f64, width: f64, k_van: u32) -> std::result::Result<String, JsValue> {
    js(predict_json(k, z_a, width, k_van))
}

/// Damped eigenvalues with `Re tau` within 2 of `k`.
#[wasm_bindgen]
pub fn spectrum(k: u32, z_a: f64, width: f64, k_van: u32) -> std::result::Result<String, JsValue> {
    js(spectrum_json(k, z_a, width, k_van))
}

/// Propagate a coherent state by the oscillator flow for time `t`.
#[wasm_bindgen]
pub fn egorov(h: f64, x0: f64, xi0: f64, t: f64) -> std::result::Result<String, JsValue> {
    js(egorov_json(h, x0, xi0, t))
}
