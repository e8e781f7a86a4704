//! Eikonal phases, actions and first-order transport amplitudes.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::geometry::{DampingProfile, DampingShape, SurfaceProfile};
use crate::quad::{integrate_split, kronrod15};
use crate::{Error, Result};

/// Absolute tolerance for the adaptive quadratures of this module.
pub const QUAD_TOL: f64 = 1e-12;

/// Below this energy the closed forms switch to their limit expressions.
const E_LIMIT: f64 = 1e-12;

/// Energy split `mu^2 = 1 + E + iF` at semiclassical parameter `h` with gluing abscissa `eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralSplit {
    pub e: f64,
    pub f: f64,
    pub h: f64,
    pub mu: Complex64,
    pub eps: f64,
}

impl SpectralSplit {
    pub fn new(e: f64, f: f64, h: f64, eps: f64) -> Self {
        let mu = Complex64::new(1.0 + e, f).sqrt();
        Self { e, f, h, mu, eps }
    }

    pub fn nu(&self) -> Complex64 {
        Complex64::new(self.e, self.f)
    }

    /// `h/2i - E/2 - iF/2`.
    pub fn rho(&self) -> Complex64 {
        Complex64::new(-self.e / 2.0, -self.h / 2.0 - self.f / 2.0)
    }
}

/// `A(E) = int_{-eps}^{eps} sqrt(E + z^2) dz` in closed form.
pub fn action_a(e: f64, eps: f64) -> Result<f64> {
    if e <= 0.0 || eps <= 0.0 {
        return Err(Error::Domain(format!("action_a needs E > 0, eps > 0 (E = {e}, eps = {eps})")));
    }
    if e < E_LIMIT {
        // eps^2 + E/2 + E log(2 eps / sqrt E) + O(E^2)
        return Ok(eps * eps + e * (0.5 + (2.0 * eps / e.sqrt()).ln()));
    }
    let r = (eps * eps + e).sqrt();
    Ok(eps * r + e * ((eps + r) / e.sqrt()).ln())
}

fn profile_breaks(profile: &SurfaceProfile, extra: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut b = vec![lo, hi, profile.z_g, profile.z_g + profile.blend];
    b.extend_from_slice(extra);
    b.retain(|x| *x >= lo && *x <= hi);
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    b
}

fn damping_breaks(a: &DampingProfile) -> Vec<f64> {
    match a.shape {
        DampingShape::Ramp { z_a, w } => vec![z_a, z_a + w],
        DampingShape::Bump { center, half, w } => {
            vec![center - half, center - half + w, center + half - w, center + half]
        }
        _ => vec![],
    }
}

/// `B(E) = int_0^{2pi} sqrt(1 + E - W) dz`.
pub fn action_b(profile: &SurfaceProfile, e: f64) -> Result<f64> {
    if e < 0.0 {
        return Err(Error::Domain(format!("action_b needs E >= 0 (got {e})")));
    }
    let b = profile_breaks(profile, &[], 0.0, PI);
    Ok(2.0 * integrate_split(|z| (1.0 + e - profile.w(z)).max(0.0).sqrt(), &b, QUAD_TOL / 2.0))
}

/// `B(E) - B(0)` through the cancellation-free form `E int 1/(sqrt(1+E-W) + sqrt(1-W))`.
///
/// On `[0, z_g]`, where `1 - W = z^2`, the integral is done in closed form so that energies far
/// below any quadrature resolution stay accurate.
pub fn delta_b(profile: &SurfaceProfile, e: f64) -> Result<f64> {
    if e < 0.0 {
        return Err(Error::Domain(format!("delta_b needs E >= 0 (got {e})")));
    }
    if e == 0.0 {
        return Ok(0.0);
    }
    let zg = profile.z_g;
    // int_0^zg dz / (sqrt(E + z^2) + z) = asinh(zg/sqrt E)/2 + zg / (2 (sqrt(E + zg^2) + zg))
    let core = 0.5 * (zg / e.sqrt()).asinh() + 0.5 * zg / ((e + zg * zg).sqrt() + zg);
    let b = profile_breaks(profile, &[], zg, PI);
    let f = |z: f64| {
        let w = profile.w(z);
        1.0 / ((1.0 + e - w).max(0.0).sqrt() + (1.0 - w).max(0.0).sqrt())
    };
    Ok(2.0 * e * (core + integrate_split(f, &b, 1e-14)))
}

/// `dB/dE = int_0^{2pi} dz / (2 sqrt(1 + E - W))`.
pub fn db_de(profile: &SurfaceProfile, e: f64) -> Result<f64> {
    if e <= 0.0 {
        return Err(Error::Domain("dB/dE diverges at E = 0".into()));
    }
    let s = e.sqrt();
    let mut b = profile_breaks(profile, &[s, 10.0 * s], 0.0, PI);
    b.dedup();
    Ok(2.0 * integrate_split(|z| 0.5 / (1.0 + e - profile.w(z)).sqrt(), &b, QUAD_TOL))
}

/// `c0(E) = int_eps^{2pi - eps} ds / (2 phi')`.
pub fn coeff_c0(profile: &SurfaceProfile, e: f64, eps: f64) -> Result<f64> {
    if e <= 0.0 {
        return Err(Error::Domain(format!("c0 needs E > 0 (got {e})")));
    }
    let b = profile_breaks(profile, &[], eps, PI);
    Ok(2.0 * integrate_split(|z| 0.5 / (1.0 + e - profile.w(z)).sqrt(), &b, QUAD_TOL))
}

/// `c1(a, E) = int_0^{2pi} a(s) ds / (2 phi')`.
pub fn coeff_c1(profile: &SurfaceProfile, a: &DampingProfile, e: f64) -> Result<f64> {
    if a.is_zero() {
        return Ok(0.0);
    }
    let flat = a.flat_halfwidth();
    if flat <= 0.0 {
        return Err(Error::Domain("c1 needs a to vanish near z = 0".into()));
    }
    if e < 0.0 {
        return Err(Error::Domain(format!("c1 needs E >= 0 (got {e})")));
    }
    let b = profile_breaks(profile, &damping_breaks(a), flat, PI);
    let f = |z: f64| a.eval(z) * 0.5 / (1.0 + e - profile.w(z)).sqrt();
    Ok(2.0 * integrate_split(f, &b, QUAD_TOL))
}

/// `exp(-(F/2h) log((eps + sqrt(eps^2 + E))/sqrt E))`.
pub fn sigma_eps(split: &SpectralSplit) -> f64 {
    if split.f == 0.0 {
        return 1.0;
    }
    let (e, eps) = (split.e, split.eps);
    let l = ((eps + (eps * eps + e).sqrt()) / e.sqrt()).ln();
    (-(split.f / (2.0 * split.h)) * l).exp()
}

/// `phi' = sqrt(1 + E - W)` and `phi'' = -W'/(2 phi')`.
pub fn phase_slope(profile: &SurfaceProfile, e: f64, z: f64) -> (f64, f64) {
    let w = profile.w_jet(z);
    let p = (1.0 + e - w.v).sqrt();
    (p, -w.d1 / (2.0 * p))
}

/// Cumulative integrals `phi`, `int 1/phi'`, `int a/phi'` from `eps` to each point of a sorted
/// list inside `[eps, 2pi - eps]`, one Kronrod panel per gap.
#[derive(Clone, Debug)]
pub struct OuterIntegrals {
    pub z: Vec<f64>,
    pub phi: Vec<f64>,
    pub inv: Vec<f64>,
    pub damp: Vec<f64>,
}

impl OuterIntegrals {
    pub fn new(profile: &SurfaceProfile, a: &DampingProfile, e: f64, eps: f64, zs: &[f64]) -> Self {
        let n = zs.len();
        let (mut phi, mut inv, mut damp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut acc = [0.0f64; 3];
        let mut prev = eps;
        for (i, &z) in zs.iter().enumerate() {
            // panels no longer than 0.02 keep K15 at round-off for these smooth integrands
            let m = (((z - prev) / 0.02).ceil() as usize).max(1);
            for j in 0..m {
                let lo = prev + (z - prev) * j as f64 / m as f64;
                let hi = prev + (z - prev) * (j + 1) as f64 / m as f64;
                acc[0] += kronrod15(&mut |s| (1.0 + e - profile.w(s)).sqrt(), lo, hi).0;
                acc[1] += kronrod15(&mut |s| 1.0 / (1.0 + e - profile.w(s)).sqrt(), lo, hi).0;
                acc[2] +=
                    kronrod15(&mut |s| a.eval(s) / (1.0 + e - profile.w(s)).sqrt(), lo, hi).0;
            }
            phi[i] = acc[0];
            inv[i] = acc[1];
            damp[i] = acc[2];
            prev = z;
        }
        Self { z: zs.to_vec(), phi, inv, damp }
    }
}

/// Transport amplitude of the `+` branch normalized to one at `eps`.
pub fn transport_amplitude(
    z: f64,
    split: &SpectralSplit,
    a: &DampingProfile,
    profile: &SurfaceProfile,
) -> Result<Complex64> {
    let eps = split.eps;
    if z < eps - 1e-14 || z > 2.0 * PI - eps + 1e-14 {
        return Err(Error::Domain(format!("z = {z} outside [eps, 2pi - eps]")));
    }
    let ints = OuterIntegrals::new(profile, a, split.e, eps, &[z]);
    Ok(amplitude_from(&ints, 0, split, profile, 1.0))
}

/// `sigma_{+/-}` at sample `i` of precomputed integrals; `sign = +1` for `e^{+i phi/h}`.
pub fn amplitude_from(
    ints: &OuterIntegrals,
    i: usize,
    split: &SpectralSplit,
    profile: &SurfaceProfile,
    sign: f64,
) -> Complex64 {
    let p0 = phase_slope(profile, split.e, split.eps).0;
    let p = phase_slope(profile, split.e, ints.z[i]).0;
    let geo = (p0 / p).sqrt();
    let expo = sign * (-(split.f / (2.0 * split.h)) * ints.inv[i] + 0.5 * split.mu * ints.damp[i]);
    geo * expo.exp()
}

/// Logarithmic derivative `sigma'/sigma` of the `sign` branch at `z`.
pub fn amplitude_log_derivative(
    z: f64,
    split: &SpectralSplit,
    a: &DampingProfile,
    profile: &SurfaceProfile,
    sign: f64,
) -> Complex64 {
    let (p, pp) = phase_slope(profile, split.e, z);
    (sign * (split.mu * a.eval(z) - split.f / split.h) - pp) / (2.0 * p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flow {
    In,
    Out,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BranchTag {
    pub flow: Flow,
    /// `+1` or `-1`.
    pub sign: i8,
}

#[derive(Clone, Debug, Serialize)]
pub struct WkbBranch {
    pub tag: BranchTag,
    pub z: Vec<f64>,
    pub phase: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    pub gauge: f64,
}

/// Antiderivative of `sqrt(E + z^2)`.
fn inner_antiderivative(e: f64, z: f64) -> f64 {
    if e < E_LIMIT {
        return 0.5 * z * z.abs();
    }
    0.5 * (z * (z * z + e).sqrt() + e * (z / e.sqrt()).asinh())
}

impl WkbBranch {
    /// Branch of the model problem `zeta^2 = z^2 + E` across `[-eps, eps]`.
    pub fn inner(tag: BranchTag, split: &SpectralSplit, zs: &[f64]) -> Self {
        let gauge = match (tag.flow, tag.sign) {
            (Flow::In, 1) | (Flow::Out, -1) => -split.eps,
            _ => split.eps,
        };
        let s = tag.sign as f64;
        let g0 = inner_antiderivative(split.e, gauge);
        let sq = (split.e + split.eps * split.eps).sqrt();
        let phase: Vec<f64> =
            zs.iter().map(|&z| s * (inner_antiderivative(split.e, z) - g0)).collect();
        let amplitude = zs
            .iter()
            .map(|&z| {
                let p = (split.e + z * z).sqrt();
                let flow = s * (inner_antiderivative_inv(split.e, z) - inner_antiderivative_inv(split.e, gauge));
                Complex64::from((sq / p).sqrt() * (-(split.f / (2.0 * split.h)) * flow).exp())
            })
            .collect();
        Self { tag, z: zs.to_vec(), phase, amplitude, gauge }
    }

    /// Outgoing `sign` branch along `[eps, 2pi - eps]`.
    pub fn outer(
        sign: i8,
        split: &SpectralSplit,
        profile: &SurfaceProfile,
        a: &DampingProfile,
        zs: &[f64],
    ) -> Self {
        let ints = OuterIntegrals::new(profile, a, split.e, split.eps, zs);
        let s = sign as f64;
        let phase = ints.phi.iter().map(|p| s * p).collect();
        let amplitude = (0..zs.len()).map(|i| amplitude_from(&ints, i, split, profile, s)).collect();
        Self { tag: BranchTag { flow: Flow::Out, sign }, z: zs.to_vec(), phase, amplitude, gauge: split.eps }
    }
}

/// Antiderivative of `1/sqrt(E + z^2)`.
fn inner_antiderivative_inv(e: f64, z: f64) -> f64 {
    (z / e.sqrt()).asinh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    #[test]
    fn action_a_limits() {
        let v = action_a(1e-12, 0.5).unwrap();
        assert!((v - 0.25).abs() < 1e-6);
        assert!(action_a(0.0, 0.5).is_err());
        let q = integrate(|z| (0.1 + z * z).sqrt(), -0.5, 0.5, 1e-13);
        assert!((action_a(0.1, 0.5).unwrap() - q).abs() < 1e-12);
    }

    #[test]
    fn b_is_increasing_and_difference_form_agrees() {
        let p = SurfaceProfile::default();
        let b0 = action_b(&p, 0.0).unwrap();
        let b1 = action_b(&p, 0.1).unwrap();
        let b2 = action_b(&p, 0.2).unwrap();
        assert!(b2 > b1 && b1 > b0 && b0 > 0.0);
        assert!((delta_b(&p, 0.1).unwrap() - (b1 - b0)).abs() < 1e-10);
    }

    #[test]
    fn c1_vanishes_without_damping() {
        let p = SurfaceProfile::default();
        assert_eq!(coeff_c1(&p, &DampingProfile::zero(), 0.0).unwrap(), 0.0);
        assert!(coeff_c1(&p, &DampingProfile::default(), 0.0).unwrap() > 0.0);
        assert!(coeff_c1(&p, &DampingProfile::constant(1.0), 0.0).is_err());
    }

    #[test]
    fn sigma_eps_trivial_cases() {
        assert_eq!(sigma_eps(&SpectralSplit::new(0.05, 0.0, 0.01, 0.3)), 1.0);
        let s1 = sigma_eps(&SpectralSplit::new(0.05, 0.001, 0.01, 0.3)).ln();
        let s2 = sigma_eps(&SpectralSplit::new(0.05, 0.002, 0.01, 0.3)).ln();
        assert!((s2 - 2.0 * s1).abs() < 1e-14);
    }

    #[test]
    fn transport_endpoint_values() {
        let p = SurfaceProfile::default();
        let a = DampingProfile::default();
        let s = SpectralSplit::new(0.02, 0.003, 0.01, 0.3);
        let at_eps = transport_amplitude(s.eps, &s, &a, &p).unwrap();
        assert!((at_eps - Complex64::from(1.0)).norm() < 1e-15);
        let end = transport_amplitude(2.0 * PI - s.eps, &s, &a, &p).unwrap();
        let c0 = coeff_c0(&p, s.e, s.eps).unwrap();
        let c1 = coeff_c1(&p, &a, s.e).unwrap();
        let expect = (-c0 * s.f / s.h + s.mu * c1).exp();
        assert!((end - expect).norm() < 1e-9 * expect.norm(), "{end} {expect}");
    }

    #[test]
    fn gauge_symmetry_of_inner_branches() {
        let s = SpectralSplit::new(0.03, 0.0, 0.01, 0.3);
        let zs: Vec<f64> = (0..30).map(|i| 0.01 * i as f64).collect();
        let neg: Vec<f64> = zs.iter().map(|z| -z).collect();
        let po = WkbBranch::inner(BranchTag { flow: Flow::Out, sign: 1 }, &s, &zs);
        let mo = WkbBranch::inner(BranchTag { flow: Flow::Out, sign: -1 }, &s, &neg);
        for i in 0..zs.len() {
            assert!((po.phase[i] - mo.phase[i]).abs() < 1e-14);
        }
        let at = WkbBranch::inner(BranchTag { flow: Flow::Out, sign: 1 }, &s, &[s.eps]);
        assert_eq!(at.phase[0], 0.0);
    }
}
