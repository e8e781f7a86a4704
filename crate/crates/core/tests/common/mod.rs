#![allow(dead_code)]

use lumpwave::geometry::{DampingProfile, SurfaceProfile};
use lumpwave::wkb::{phase_slope, SpectralSplit};
use num_complex::Complex64 as C64;

/// Adaptive Simpson quadrature with Richardson correction.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn rk4(rhs: impl Fn(f64, C64) -> C64, z0: f64, z1: f64, steps: usize) -> C64 {
    let dz = (z1 - z0) / steps as f64;
    let mut s = C64::new(1.0, 0.0);
    let mut z = z0;
    for _ in 0..steps {
        let k1 = rhs(z, s);
        let k2 = rhs(z + dz / 2.0, s + k1 * (dz / 2.0));
        let k3 = rhs(z + dz / 2.0, s + k2 * (dz / 2.0));
        let k4 = rhs(z + dz, s + k3 * dz);
        s += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dz / 6.0);
        z += dz;
    }
    s
}

/// RK4 for `2 phi' s' + (phi'' + F/h - mu a) s = 0` from `eps`, with `s(eps) = 1`.
pub fn transport_oracle(split: &SpectralSplit, a: &DampingProfile, p: &SurfaceProfile, z_end: f64, steps: usize) -> C64 {
    let rhs = |z: f64, s: C64| {
        let (d1, d2) = phase_slope(p, split.e, z);
        -(d2 + split.f / split.h - split.mu * a.eval(z)) / (2.0 * d1) * s
    };
    rk4(rhs, split.eps, z_end, steps)
}

/// Barrier-top transport over `[0, eps]` where `phi' = sqrt(E + z^2)` and the damping vanishes,
/// with the geometric factor `sqrt(phi'(eps) / phi'(0))` divided out.
pub fn crossing_oracle(e: f64, f: f64, h: f64, eps: f64, steps: usize) -> f64 {
    let rhs = |z: f64, s: C64| {
        let d1 = (e + z * z).sqrt();
        -(z / d1 + f / h) / (2.0 * d1) * s
    };
    let s = rk4(rhs, 0.0, eps, steps);
    s.re * ((e + eps * eps).sqrt() / e.sqrt()).sqrt()
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>()
}
