//! Bohr–Sommerfeld quantization of the outer loop and the imaginary shift `F` it forces.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geometry::{DampingProfile, SurfaceProfile};
use crate::wkb::{action_b, coeff_c0, coeff_c1, delta_b};
use crate::{Error, Result};

/// Margin above `B(0)` that keeps the quantized energy strictly positive.
pub const ETA: f64 = 1e-8;
pub const E_MAX: f64 = 0.5;
pub const K_MIN: u32 = 50;

/// Which amplitude balance fixes `F`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FRule {
    /// `F = 2 h c1 / |log E|`, the small-`E` limit.
    Asymptotic,
    /// `F = h sqrt(1+E) c1 / (L_eps(E) + c0(E))`, keeping the finite parts of the barrier
    /// crossing and of the outer loop.
    #[default]
    Balanced,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuasiEigenvalue {
    pub k: u32,
    pub h: f64,
    pub m: u64,
    pub e: f64,
    pub f: f64,
    /// The small-`E` rule, kept for comparison whatever rule produced `f`.
    pub f_asymptotic: f64,
    pub mu: Complex64,
    pub tau: Complex64,
}

impl QuasiEigenvalue {
    pub fn from_parts(k: u32, m: u64, e: f64, f: f64, f_asymptotic: f64) -> Self {
        let h = 1.0 / k as f64;
        let s = (1.0 + e).sqrt();
        let mu = Complex64::new(s, f / (2.0 * s));
        Self { k, h, m, e, f, f_asymptotic, mu, tau: mu / h }
    }

    /// `Im mu log(1/h) / h`.
    pub fn scaled_im(&self) -> f64 {
        self.mu.im * (1.0 / self.h).ln() / self.h
    }
}

/// Bisection for an increasing function: the root of `g` in `[lo, hi]` to `|g| <= tol`.
pub fn bisect_increasing(mut g: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (glo, ghi) = (g(lo), g(hi));
    if glo > 0.0 || ghi < 0.0 {
        return Err(Error::NoRoot(format!("no sign change on [{lo}, {hi}]: {glo}, {ghi}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if gm > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Quantization against an arbitrary increment `delta_b(E) = B(E) - B(0)`.
pub fn bohr_sommerfeld_with(
    k: u32,
    b0: f64,
    delta_b: impl Fn(f64) -> f64,
    e_max: f64,
) -> Result<(u64, f64)> {
    let kf = k as f64;
    let m = (kf * (b0 + ETA) / (2.0 * PI)).ceil() as u64;
    let target = 2.0 * PI * m as f64 / kf - b0;
    if target > delta_b(e_max) {
        return Err(Error::NoRoot(format!("2 pi m / k beyond B(E_max) at k = {k}")));
    }
    let e = bisect_increasing(|e| delta_b(e) - target, 0.0, e_max, 1e-12)?;
    Ok((m, e))
}

/// Smallest admissible `m` and the energy solving `B(E) = 2 pi m / k`.
pub fn bohr_sommerfeld(k: u32, profile: &SurfaceProfile) -> Result<(u64, f64)> {
    let b0 = action_b(profile, 0.0)?;
    if 2.0 * PI / k as f64 >= delta_b(profile, E_MAX)? {
        return Err(Error::Domain(format!("k = {k} too small for the quantization window")));
    }
    bohr_sommerfeld_with(k, b0, |e| delta_b(profile, e).unwrap_or(f64::NAN), E_MAX)
}

/// `F = 2 h c1(a, E) / |log E|`.
pub fn determine_f(e: f64, h: f64, a: &DampingProfile, profile: &SurfaceProfile) -> Result<f64> {
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::Domain(format!("determine_f needs 0 < E < 1 (got {e})")));
    }
    Ok(2.0 * h * coeff_c1(profile, a, e)? / e.ln().abs())
}

/// `log((eps + sqrt(eps^2 + E))/sqrt E)`, half the barrier-crossing integral of `1/phi'`.
pub fn crossing_log(e: f64, eps: f64) -> f64 {
    ((eps + (eps * eps + e).sqrt()) / e.sqrt()).ln()
}

/// Amplitude balance over one period: barrier crossing plus outer loop against damping gain.
pub fn determine_f_balanced(
    e: f64,
    h: f64,
    eps: f64,
    a: &DampingProfile,
    profile: &SurfaceProfile,
) -> Result<f64> {
    if e <= 0.0 {
        return Err(Error::Domain(format!("determine_f_balanced needs E > 0 (got {e})")));
    }
    let c1 = coeff_c1(profile, a, e)?;
    let c0 = coeff_c0(profile, e, eps)?;
    Ok(h * (1.0 + e).sqrt() * c1 / (crossing_log(e, eps) + c0))
}

pub fn quasi_eigenvalue(
    k: u32,
    profile: &SurfaceProfile,
    a: &DampingProfile,
    eps: f64,
    rule: FRule,
) -> Result<QuasiEigenvalue> {
    if k < K_MIN {
        return Err(Error::Domain(format!("k = {k} below k_min = {K_MIN}")));
    }
    let h = 1.0 / k as f64;
    let (m, e) = bohr_sommerfeld(k, profile)?;
    let fa = determine_f(e, h, a, profile)?;
    let f = match rule {
        FRule::Asymptotic => fa,
        FRule::Balanced => determine_f_balanced(e, h, eps, a, profile)?,
    };
    Ok(QuasiEigenvalue::from_parts(k, m, e, f, fa))
}

pub fn quasi_eigenvalue_sequence(
    k_list: &[u32],
    profile: &SurfaceProfile,
    a: &DampingProfile,
    eps: f64,
    rule: FRule,
) -> Result<Vec<QuasiEigenvalue>> {
    crate::par_map(k_list, |&k| quasi_eigenvalue(k, profile, a, eps, rule)).into_iter().collect()
}

/// Largest admissible energy at parameter `h` (one full level above `B(0)`), and the imaginary
/// part of `tau` the balanced rule assigns there.
///
/// `F` grows with `E`, so this overestimates the decay rate of the level actually selected.
/// It works for any `h > 0`, far below the range where `m` fits an integer.
pub fn gap_bound_im_tau(
    h: f64,
    profile: &SurfaceProfile,
    a: &DampingProfile,
    eps: f64,
) -> Result<(f64, f64)> {
    let target = 2.0 * PI * h;
    if target >= delta_b(profile, E_MAX)? {
        return Err(Error::Domain(format!("h = {h} too large for the quantization window")));
    }
    // bisection on log E keeps relative accuracy when E is astronomically small
    let g = |le: f64| delta_b(profile, le.exp()).unwrap_or(f64::NAN) - target;
    let le = bisect_increasing(g, -1400.0, E_MAX.ln(), 0.0)?;
    let e = le.exp();
    let c1 = coeff_c1(profile, a, e)?;
    let c0 = coeff_c0(profile, e, eps)?;
    // Im tau = F / (2 h sqrt(1 + E)) with the balanced F
    Ok((e, c1 / (2.0 * (crossing_log(e, eps) + c0))))
}
