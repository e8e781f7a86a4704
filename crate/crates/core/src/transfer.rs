//! The scalar connection coefficient across the hyperbolic barrier top and its large-parameter
//! expansion.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::geometry::{DampingProfile, SurfaceProfile};
use crate::wkb::{action_a, action_b, coeff_c0, coeff_c1, sigma_eps, SpectralSplit};
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

// B_{2j} / (2j (2j - 1)) for j = 1..=10
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
];

/// Log-gamma on the analytic branch that is continuous off the negative real axis.
///
/// Shifts the argument to `|z| >= 17` by the recurrence and sums the Stirling series there.
/// The left half-plane goes through the reflection formula, which fixes the value only
/// modulo `2 pi i`.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // ln Gamma(z) = ln pi - ln sin(pi z) - ln Gamma(1 - z)
        let s = (PI * z).sin();
        return PI.ln() - s.ln() - ln_gamma(1.0 - z);
    }
    let mut shift = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.norm() < 17.0 {
        shift += w.ln();
        w += 1.0;
    }
    let w2 = w * w;
    let mut series = Complex64::new(0.0, 0.0);
    let mut wp = w;
    for c in STIRLING {
        series += c / wp;
        wp *= w2;
    }
    (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln() + series - shift
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferEvaluation {
    pub phi: Complex64,
    pub stirling_arg: f64,
    pub stirling_re_exp: f64,
    pub e: f64,
    pub f: f64,
    pub h: f64,
}

/// `log Phi(t)`, with `Phi(t) = (2pi)^{-1/2} Gamma(1/2 - it) e^{t pi/2} e^{-it ln h} e^{i pi/4}`.
pub fn ln_phi_exact(t: Complex64, h: f64) -> Result<Complex64> {
    let g = Complex64::new(0.5, 0.0) - I * t;
    if g.im.abs() < 1e-14 && g.re <= 0.0 && (g.re - g.re.round()).abs() < 1e-14 {
        return Err(Error::Pole(format!("t = {t}")));
    }
    Ok(-0.5 * (2.0 * PI).ln() + ln_gamma(g) + t * (PI / 2.0) - I * t * h.ln() + I * (PI / 4.0))
}

pub fn phi_exact(t: Complex64, h: f64) -> Result<Complex64> {
    Ok(ln_phi_exact(t, h)?.exp())
}

/// Two-term Stirling expansion of `Arg Phi((E + iF)/2h)` and the leading real exponent
/// `(F/2h) log(E/2)`.
pub fn phi_stirling(e: f64, f: f64, h: f64) -> (f64, f64) {
    let t = Complex64::new(e, f) / (2.0 * h);
    let lead = I * t * (1.0 - (t * h).ln());
    let arg = lead.im + PI / 4.0 - (1.0 / (24.0 * t)).re;
    let re_exp = f / (2.0 * h) * (e / 2.0).ln();
    (arg, re_exp)
}

pub fn evaluate(e: f64, f: f64, h: f64) -> Result<TransferEvaluation> {
    let phi = phi_exact(Complex64::new(e, f) / (2.0 * h), h)?;
    let (stirling_arg, stirling_re_exp) = phi_stirling(e, f, h);
    Ok(TransferEvaluation { phi, stirling_arg, stirling_re_exp, e, f, h })
}

/// Reduce an angle to `[-pi, pi)` by the nearest multiple of `2pi`.
pub fn reduce_angle(x: f64) -> f64 {
    x - 2.0 * PI * (x / (2.0 * PI)).round()
}

/// Amplitude and phase residuals of the barrier-top matching relations.
pub fn matching_residuals(split: &SpectralSplit, gamma_ratio: f64, rho_diff: f64) -> Result<(f64, f64)> {
    let t = Complex64::new(split.e, split.f) / (2.0 * split.h);
    let lt = ln_phi_exact(t, split.h)?;
    let amp = (lt.re.exp() * gamma_ratio - sigma_eps(split)).abs();
    let phase = reduce_angle(lt.im + rho_diff - action_a(split.e, split.eps)? / split.h).abs();
    Ok((amp, phase))
}

/// Connection data `(gamma_ratio, rho_diff)` predicted from the Stirling expansion alone.
pub fn leading_order_connection(split: &SpectralSplit) -> Result<(f64, f64)> {
    let (arg, re_exp) = phi_stirling(split.e, split.f, split.h);
    let gamma_ratio = sigma_eps(split) * (-re_exp).exp();
    let rho_diff = action_a(split.e, split.eps)? / split.h - arg;
    Ok((gamma_ratio, rho_diff))
}

/// Principal part of the monodromy along the outer loop:
/// `exp(i(B - A)/h) exp(-c0 F/h + mu c1)`.
pub fn monodromy_factor(
    split: &SpectralSplit,
    a: &DampingProfile,
    profile: &SurfaceProfile,
) -> Result<Complex64> {
    let b = action_b(profile, split.e)?;
    let aa = action_a(split.e, split.eps)?;
    let c0 = coeff_c0(profile, split.e, split.eps)?;
    let c1 = coeff_c1(profile, a, split.e)?;
    Ok((I * (b - aa) / split.h).exp() * (-c0 * split.f / split.h + split.mu * c1).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_at_known_points() {
        assert!((ln_gamma(Complex64::new(1.0, 0.0))).norm() < 1e-13);
        let g = ln_gamma(Complex64::new(0.5, 0.0)).re;
        assert!((g - 0.5 * PI.ln()).abs() < 1e-13 * g, "{}", g - 0.5 * PI.ln());
        // Gamma(5) = 24
        assert!((ln_gamma(Complex64::new(5.0, 0.0)).re - 24f64.ln()).abs() < 1e-13);
        // |Gamma(1/2 + iy)|^2 = pi / cosh(pi y)
        for y in [-3.0, 0.3, 2.0, 11.0] {
            let g = ln_gamma(Complex64::new(0.5, y));
            let expect = 0.5 * (PI / (PI * y).cosh()).ln();
            assert!((g.re - expect).abs() < 1e-13 * (1.0 + expect.abs()), "{y}");
        }
        // reflection branch against the recurrence: Gamma(z+1) = z Gamma(z)
        let z = Complex64::new(-2.3, 0.7);
        let lhs = ln_gamma(z + 1.0).exp();
        let rhs = z * ln_gamma(z).exp();
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm());
    }

    #[test]
    fn poles_are_reported() {
        assert!(phi_exact(Complex64::new(0.0, -0.5), 0.1).is_err());
        assert!(phi_exact(Complex64::new(0.0, -2.5), 0.1).is_err());
        assert!(phi_exact(Complex64::new(0.0, 0.5), 0.1).is_ok());
    }

    #[test]
    fn definitional_inputs_zero_the_residuals() {
        let s = SpectralSplit::new(0.05, 0.002, 0.01, 0.3);
        let lt = ln_phi_exact(Complex64::new(s.e, s.f) / (2.0 * s.h), s.h).unwrap();
        let gr = sigma_eps(&s) / lt.re.exp();
        let rd = action_a(s.e, s.eps).unwrap() / s.h - lt.im;
        let (a, p) = matching_residuals(&s, gr, rd).unwrap();
        assert!(a < 1e-14 && p < 1e-9, "{a} {p}");
    }

    #[test]
    fn undamped_monodromy_is_a_phase() {
        let p = SurfaceProfile::default();
        let s = SpectralSplit::new(0.05, 0.0, 0.01, 0.3);
        let m = monodromy_factor(&s, &DampingProfile::zero(), &p).unwrap();
        assert!((m.norm() - 1.0).abs() < 1e-14);
    }
}
