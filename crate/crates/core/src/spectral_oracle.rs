//! Discretized stationary damped-wave spectrum for one angular mode.
//!
//! With `psi = R^{1/2} u` the mode operator `-R^-1 d(R d) + k^2/R^2` becomes the flat
//! Schrodinger operator `M = -d^2 + V1 + k^2 W`, symmetric for `dz`. It is discretized by
//! periodic twelfth-order differences. The pencil `M + i tau a - tau^2` is linearized as
//! `C = [[0, I], [M, iA]]` acting on `(psi, tau psi)`; eigenvalues in a window come from
//! shift-invert Arnoldi on `C` followed by Rayleigh-functional refinement on the pencil.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

use crate::geometry::{DampingProfile, SurfaceProfile};
use crate::linalg::{bilinear, dot, norm, PeriodicBand, PeriodicLu};
use crate::{Error, Result};

const I: C64 = C64::new(0.0, 1.0);

/// Half-width of the difference stencil (order `2 FD_HALF`).
pub const FD_HALF: usize = 6;
/// Points per angular wavelength required by `assemble_mode`.
pub const MIN_PPW: usize = 20;
pub const DEFAULT_PPW: usize = 40;
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Weights of the centered second difference of order `2p` on unit spacing, offsets `0..=p`.
pub fn second_difference_weights(p: usize) -> Vec<f64> {
    // w_j = 2 (-1)^{j+1} (p!)^2 / (j^2 (p-j)! (p+j)!)
    let mut w = vec![0.0; p + 1];
    for j in 1..=p {
        let mut ratio = 1.0;
        // (p!)^2 / ((p-j)! (p+j)!) = prod_{i=1..j} (p - j + i)/(p + i)
        for i in 1..=j {
            ratio *= (p - j + i) as f64 / (p + i) as f64;
        }
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        w[j] = 2.0 * sign * ratio / (j * j) as f64;
    }
    w[0] = -2.0 * w[1..].iter().sum::<f64>();
    w
}

/// Grid size for mode `k` at a given number of points per wavelength.
pub fn grid_size(k: u32, ppw: usize) -> usize {
    (ppw * k.max(1) as usize).max(64)
}

#[derive(Clone, Debug)]
pub struct ModeOperator {
    pub k: u32,
    pub n: usize,
    pub dz: f64,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub v1: Vec<f64>,
    /// `R(z)`, for mapping between `psi` and `u`.
    pub r: Vec<f64>,
    pub a: Vec<f64>,
    pub a_sup: f64,
    /// The conjugated operator `M`.
    pub m: PeriodicBand,
}

impl ModeOperator {
    /// Build from sampled coefficients on the uniform grid of `[0, 2pi)`.
    pub fn from_parts(k: u32, w: Vec<f64>, v1: Vec<f64>, r: Vec<f64>, a: Vec<f64>) -> Self {
        let n = w.len();
        let dz = 2.0 * PI / n as f64;
        let z = (0..n).map(|i| i as f64 * dz).collect();
        let wts = second_difference_weights(FD_HALF);
        let mut m = PeriodicBand::zeros(n, FD_HALF);
        let kk = (k as f64).powi(2);
        let s = 1.0 / (dz * dz);
        for i in 0..n {
            for j in 1..=FD_HALF {
                let c = C64::new(-wts[j] * s, 0.0);
                m.add(i, j as isize, c);
                m.add(i, -(j as isize), c);
            }
            m.add(i, 0, C64::new(-wts[0] * s + v1[i] + kk * w[i], 0.0));
        }
        let a_sup = a.iter().cloned().fold(0.0, f64::max);
        Self { k, n, dz, z, w, v1, r, a, a_sup, m }
    }

    /// `Q(tau) = M + i tau A - tau^2`.
    pub fn pencil(&self, tau: C64) -> PeriodicBand {
        let mut q = self.m.clone();
        q.add_diagonal(|i| I * tau * self.a[i] - tau * tau);
        q
    }

    pub fn pencil_apply(&self, tau: C64, x: &[C64]) -> Vec<C64> {
        let mut y = self.m.apply(x);
        for i in 0..self.n {
            y[i] += (I * tau * self.a[i] - tau * tau) * x[i];
        }
        y
    }

    /// `||Q(tau) psi|| / ||psi||`.
    pub fn residual(&self, tau: C64, psi: &[C64]) -> f64 {
        norm(&self.pencil_apply(tau, psi)) / norm(psi)
    }

    /// `<a psi, psi> / (2 ||psi||^2)`, the imaginary part forced on an eigenpair.
    pub fn damping_quotient(&self, psi: &[C64]) -> f64 {
        let num: f64 = psi.iter().zip(&self.a).map(|(p, a)| a * p.norm_sqr()).sum();
        num / (2.0 * norm(psi).powi(2))
    }

    /// Map a conjugated profile `psi` back to `u = R^{-1/2} psi`.
    pub fn to_u(&self, psi: &[C64]) -> Vec<C64> {
        psi.iter().zip(&self.r).map(|(p, r)| p / r.sqrt()).collect()
    }
}

/// Sample the profile and damping and assemble `M` for mode `k` on `n` points.
pub fn assemble_mode(
    k: u32,
    profile: &SurfaceProfile,
    a: &DampingProfile,
    n: usize,
) -> Result<ModeOperator> {
    if n < MIN_PPW * k.max(1) as usize || n <= 4 * FD_HALF {
        return Err(Error::Resolution(format!(
            "n = {n} below {MIN_PPW} points per wavelength at k = {k}"
        )));
    }
    let dz = 2.0 * PI / n as f64;
    let (mut w, mut v1, mut r, mut av) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let z = i as f64 * dz;
        let s = profile.eval(z);
        w.push(s.w);
        v1.push(s.r2 / (2.0 * s.r) - s.r1 * s.r1 / (4.0 * s.r * s.r));
        r.push(s.r);
        av.push(a.eval(z));
    }
    Ok(ModeOperator::from_parts(k, w, v1, r, av))
}

/// Rectangle in the complex `tau` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Window {
    /// `[k - 2, k + 2] x [-0.1, 1.1]`.
    pub fn around(k: u32) -> Self {
        let k = k as f64;
        Self { re: (k - 2.0, k + 2.0), im: (-0.1, 1.1) }
    }

    pub fn contains(&self, t: C64) -> bool {
        t.re >= self.re.0 && t.re <= self.re.1 && t.im >= self.im.0 && t.im <= self.im.1
    }

    /// Grid of shifts with spacing at most `step`, centred in the window.
    fn shifts(&self, step: f64) -> Vec<C64> {
        let nr = ((self.re.1 - self.re.0) / step).ceil().max(1.0) as usize;
        let ni = ((self.im.1 - self.im.0) / step).ceil().max(1.0) as usize;
        let (dr, di) = ((self.re.1 - self.re.0) / nr as f64, (self.im.1 - self.im.0) / ni as f64);
        let mut out = Vec::new();
        for a in 0..=nr {
            for b in 0..ni {
                out.push(C64::new(self.re.0 + a as f64 * dr, self.im.0 + (b as f64 + 0.5) * di));
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Eigenpair {
    pub tau: C64,
    /// Conjugated eigenvector, unit `l2` norm.
    #[serde(skip)]
    pub psi: Vec<C64>,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct QepOptions {
    pub krylov_dim: usize,
    /// Spacing of the shift grid.
    pub shift_step: f64,
    /// Ritz values farther than this from their shift are discarded.
    pub trust_radius: f64,
    pub seed: u64,
}

impl Default for QepOptions {
    fn default() -> Self {
        Self { krylov_dim: 48, shift_step: 0.6, trust_radius: 0.7, seed: 7 }
    }
}

/// Ritz values of `(C - sigma)^{-1}` from `m` Arnoldi steps, mapped back to `tau`.
fn arnoldi_ritz(op: &ModeOperator, lu: &PeriodicLu, sigma: C64, m: usize, seed: u64) -> Vec<C64> {
    let n = op.n;
    let m = m.min(2 * n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    let mut start: Vec<C64> =
        (0..2 * n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let s = norm(&start);
    start.iter_mut().for_each(|x| *x /= s);
    v.push(start);
    let mut h = DMatrix::<C64>::zeros(m + 1, m);
    let mut steps = m;
    for j in 0..m {
        let (b1, b2) = v[j].split_at(n);
        // (M + i sigma A - sigma^2) x1 = b2 - (iA - sigma) b1, x2 = b1 + sigma x1
        let mut x1: Vec<C64> = (0..n).map(|i| b2[i] - (I * op.a[i] - sigma) * b1[i]).collect();
        lu.solve(&mut x1);
        let x2: Vec<C64> = (0..n).map(|i| b1[i] + sigma * x1[i]).collect();
        let mut w = x1;
        w.extend(x2);
        for _pass in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let c = dot(vi, &w);
                h[(i, j)] += c;
                w.iter_mut().zip(vi).for_each(|(wk, vk)| *wk -= c * vk);
            }
        }
        let beta = norm(&w);
        h[(j + 1, j)] = C64::new(beta, 0.0);
        if beta < 1e-12 * h.column(j).norm() {
            steps = j + 1;
            break;
        }
        w.iter_mut().for_each(|x| *x /= beta);
        v.push(w);
    }
    let hm = h.view((0, 0), (steps, steps)).into_owned();
    let theta = hm.schur().eigenvalues().map(|e| e.iter().copied().collect::<Vec<_>>()).unwrap_or_default();
    theta.into_iter().filter(|t| t.norm() > 1e-14).map(|t| sigma + 1.0 / t).collect()
}

/// Refine an approximate eigenvalue by Rayleigh-functional iteration on the pencil.
///
/// The pencil is complex symmetric, so the unconjugated form `x^T Q(tau) x` gives a
/// quadratically convergent update.
pub fn refine(op: &ModeOperator, tau0: C64, seed: u64) -> Result<Eigenpair> {
    let n = op.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    let mut tau = tau0;
    for it in 0..30 {
        let lu = match op.pencil(tau).factor() {
            Ok(lu) => lu,
            // exact hit: keep the previous vector
            Err(_) if it > 0 => break,
            Err(e) => return Err(e),
        };
        lu.solve(&mut x);
        let s = norm(&x);
        x.iter_mut().for_each(|v| *v /= s);
        let q = bilinear(&x, &op.pencil_apply(tau, &x));
        let dq: C64 = x.iter().zip(&op.a).map(|(v, a)| v * v * (I * a - 2.0 * tau)).sum();
        let step = q / dq;
        tau -= step;
        if step.norm() <= 1e-14 * tau.norm().max(1.0) {
            break;
        }
    }
    let mut lu_last = op.pencil(tau).factor();
    if let Ok(lu) = lu_last.as_mut() {
        // one more inverse step at the final tau sharpens the vector
        let mut y = x.clone();
        lu.solve(&mut y);
        let s = norm(&y);
        if s.is_finite() && s > 0.0 {
            x = y.into_iter().map(|v| v / s).collect();
        }
    }
    let residual = op.residual(tau, &x);
    Ok(Eigenpair { tau, psi: x, residual, converged: residual <= RESIDUAL_TOL * tau.norm().max(1.0) })
}

/// Eigenvalues of the pencil inside `window`, deduplicated at `1e-6 k`.
pub fn qep_spectrum(op: &ModeOperator, window: &Window, opts: &QepOptions) -> Result<Vec<Eigenpair>> {
    let shifts = window.shifts(opts.shift_step);
    let seeds: Vec<(usize, C64)> = shifts.into_iter().enumerate().collect();
    let per_shift = crate::par_map(&seeds, |&(j, sigma)| -> Result<Vec<C64>> {
        let lu = op.pencil(sigma).factor()?;
        let ritz = arnoldi_ritz(op, &lu, sigma, opts.krylov_dim, opts.seed ^ (j as u64 + 1));
        Ok(ritz.into_iter().filter(|t| (t - sigma).norm() <= opts.trust_radius).collect())
    });
    let mut candidates = Vec::new();
    for r in per_shift {
        candidates.extend(r?);
    }
    let tol = 1e-6 * (op.k.max(1) as f64);
    // merge Ritz values that already agree before the costly refinement
    let mut seeds_tau: Vec<C64> = Vec::new();
    for c in candidates {
        if !seeds_tau.iter().any(|s| (s - c).norm() < 1e-3) {
            seeds_tau.push(c);
        }
    }
    let refined = crate::par_map(&seeds_tau, |&t| refine(op, t, opts.seed));
    let mut out: Vec<Eigenpair> = Vec::new();
    for r in refined {
        let ep = r?;
        if !window.contains(ep.tau) {
            continue;
        }
        if out.iter().any(|o| (o.tau - ep.tau).norm() < tol) {
            continue;
        }
        out.push(ep);
    }
    out.sort_by(|a, b| a.tau.re.partial_cmp(&b.tau.re).unwrap());
    Ok(out)
}

/// All `2n` eigenvalues of the companion matrix by a dense Schur decomposition.
pub fn qep_dense(op: &ModeOperator) -> Vec<C64> {
    let n = op.n;
    let mut c = DMatrix::<C64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        c[(i, n + i)] = C64::new(1.0, 0.0);
        for j in 0..n {
            c[(n + i, j)] = op.m.entry(i, j);
        }
        c[(n + i, n + i)] = I * op.a[i];
    }
    c.schur().eigenvalues().map(|e| e.iter().copied().collect()).unwrap_or_default()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleMatch {
    pub distance: f64,
    pub nearest: C64,
    /// `h |tau - tau_pred|`.
    pub scaled: f64,
}

pub fn match_quasimode(pred_tau: C64, h: f64, spec: &[C64]) -> Result<OracleMatch> {
    let nearest = spec
        .iter()
        .copied()
        .min_by(|a, b| (a - pred_tau).norm().partial_cmp(&(b - pred_tau).norm()).unwrap())
        .ok_or(Error::EmptyWindow)?;
    let distance = (nearest - pred_tau).norm();
    Ok(OracleMatch { distance, nearest, scaled: h * distance })
}

/// Smallest positive imaginary part among eigenvalues with `|Re tau - k| <= 1`.
pub fn least_damped_near(k: u32, spec: &[C64]) -> Option<C64> {
    spec.iter()
        .copied()
        .filter(|t| (t.re - k as f64).abs() <= 1.0 && t.im > 0.0)
        .min_by(|a, b| a.im.partial_cmp(&b.im).unwrap())
}

/// Fit `Im tau = c / log k`: returns the mean of `Im tau log k` and its relative spread
/// `(max - min) / mean`.
pub fn fit_log_law(samples: &[(u32, f64)]) -> (f64, f64) {
    let v: Vec<f64> = samples.iter().map(|&(k, im)| im * (k as f64).ln()).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    (mean, (hi - lo) / mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize, k: u32, a: f64) -> ModeOperator {
        ModeOperator::from_parts(k, vec![1.0; n], vec![0.0; n], vec![1.0; n], vec![a; n])
    }

    #[test]
    fn weights_annihilate_low_powers_and_match_second_derivative() {
        let w = second_difference_weights(FD_HALF);
        let moment = |q: i32| -> f64 {
            (1..=FD_HALF).map(|j| 2.0 * w[j] * (j as f64).powi(q)).sum::<f64>()
                + if q == 0 { w[0] } else { 0.0 }
        };
        assert!(moment(0).abs() < 1e-13);
        assert!((moment(2) - 2.0).abs() < 1e-12);
        for q in (4..=12).step_by(2) {
            assert!(moment(q).abs() < 1e-8 * 6f64.powi(q), "q = {q}");
        }
    }

    #[test]
    fn flat_circle_spectrum() {
        let op = flat(64, 0, 0.0);
        let mut d = DMatrix::<f64>::from_fn(op.n, op.n, |i, j| op.m.entry(i, j).re);
        d = (d.clone() + d.transpose()) * 0.5;
        let mut e: Vec<f64> = d.symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in e.iter().zip([0.0, 1.0, 1.0, 4.0, 4.0]) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn symmetry_and_potential_floor() {
        let p = SurfaceProfile::default();
        let op = assemble_mode(20, &p, &DampingProfile::default(), 800).unwrap();
        assert!(op.m.symmetry_defect() <= 1e-10 * op.m.get(0, 0).norm());
        let wmin = op.w.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((400.0 * wmin - 400.0 * p.w_min()).abs() < 1e-3);
        assert!(assemble_mode(20, &p, &DampingProfile::default(), 300).is_err());
    }

    #[test]
    fn conjugated_operator_is_nonnegative() {
        let p = SurfaceProfile::default();
        let op = assemble_mode(3, &p, &DampingProfile::zero(), 128).unwrap();
        let d = DMatrix::<f64>::from_fn(op.n, op.n, |i, j| op.m.entry(i, j).re);
        let lo = d.symmetric_eigen().eigenvalues.min();
        assert!(lo >= -1e-8 * 9.0, "{lo}");
    }

    #[test]
    fn arnoldi_agrees_with_dense_solve() {
        let p = SurfaceProfile::default();
        let k = 4;
        let op = assemble_mode(k, &p, &DampingProfile::default(), 96).unwrap();
        let win = Window::around(k);
        let dense: Vec<C64> = qep_dense(&op).into_iter().filter(|t| win.contains(*t)).collect();
        let it = qep_spectrum(&op, &win, &QepOptions::default()).unwrap();
        assert!(!dense.is_empty());
        assert_eq!(dense.len(), it.len(), "{dense:?} vs {:?}", it.iter().map(|e| e.tau).collect::<Vec<_>>());
        for d in dense {
            let m = match_quasimode(d, 1.0, &it.iter().map(|e| e.tau).collect::<Vec<_>>()).unwrap();
            assert!(m.distance < 1e-8, "{d} {}", m.distance);
        }
    }

    #[test]
    fn imaginary_part_identity_and_band() {
        let p = SurfaceProfile::default();
        let k = 30;
        let op = assemble_mode(k, &p, &DampingProfile::default(), grid_size(k, DEFAULT_PPW)).unwrap();
        let spec = qep_spectrum(&op, &Window::around(k), &QepOptions::default()).unwrap();
        assert!(spec.len() > 3);
        for e in &spec {
            assert!(e.converged, "{} {}", e.tau, e.residual);
            assert!((e.tau.im - op.damping_quotient(&e.psi)).abs() < 1e-6);
            assert!(e.tau.im >= -1e-6 && e.tau.im <= op.a_sup / 2.0 + 1e-6);
        }
    }

    #[test]
    fn undamped_spectrum_is_real_and_symmetric() {
        let p = SurfaceProfile::default();
        let k = 12;
        let op = assemble_mode(k, &p, &DampingProfile::zero(), 480).unwrap();
        let spec = qep_spectrum(&op, &Window::around(k), &QepOptions::default()).unwrap();
        let d = DMatrix::<f64>::from_fn(op.n, op.n, |i, j| op.m.entry(i, j).re);
        let lam = d.symmetric_eigen().eigenvalues;
        for e in &spec {
            assert!(e.tau.im.abs() < 1e-8);
            // tau^2 is an eigenvalue of M, so -tau is in the spectrum too
            let best = lam.iter().map(|l| (l - e.tau.re.powi(2)).abs()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-7 * e.tau.re.powi(2), "{best}");
        }
    }

    #[test]
    fn exact_prediction_has_zero_distance() {
        let spec = [C64::new(10.0, 0.1), C64::new(11.0, 0.2)];
        let m = match_quasimode(spec[1], 0.1, &spec).unwrap();
        assert_eq!(m.distance, 0.0);
        assert!(match_quasimode(spec[0], 0.1, &[]).is_err());
    }

    #[test]
    fn flat_damped_pencil_has_known_roots() {
        // constant a: tau^2 - i a tau - j^2 = 0 for Fourier index j
        let (n, a) = (64, 0.4);
        let op = flat(n, 0, a);
        let win = Window { re: (2.0, 4.0), im: (-0.1, 1.1) };
        let spec = qep_spectrum(&op, &win, &QepOptions::default()).unwrap();
        let j = 3.0f64;
        let root = (I * a + (C64::new(4.0 * j * j - a * a, 0.0)).sqrt()) / 2.0;
        assert!(spec.iter().any(|e| (e.tau - root).norm() < 1e-6), "{spec:?}");
    }
}
