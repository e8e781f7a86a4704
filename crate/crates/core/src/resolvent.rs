//! Semiclassical resolvent norms of damped operators on a circle and on a line with absorbing ends.
//!
//! `P(z, h) = h^2 G^T (1 + i h^-1 sqrt(z) a) G + V - z` in the viscous variants, with `G` the
//! forward difference and `a` sampled at half points, or `h^2 G^T G + i h sqrt(z) a + V - z` with
//! multiplicative damping. Pairing `P u = g` with `u` then gives the energy identities exactly.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geometry::{DampingProfile, SurfaceProfile};
use crate::jet::step;
use crate::linalg::{PeriodicBand, PeriodicLu};
use crate::{Error, Result};

/// Minimum points per semiclassical wavelength `2 pi h`.
pub const MIN_PPW: f64 = 30.0;
pub const SMIN_TOL: f64 = 1e-6;
const MAX_ITERS: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    ViscousFlat,
    ViscousBarrier,
    MultiplicativeBarrier,
}

impl Variant {
    pub fn all() -> [Variant; 3] {
        [Variant::ViscousFlat, Variant::ViscousBarrier, Variant::MultiplicativeBarrier]
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::ViscousFlat => "viscous_flat",
            Variant::ViscousBarrier => "viscous_barrier",
            Variant::MultiplicativeBarrier => "multiplicative_barrier",
        }
    }

    fn barrier(self) -> bool {
        !matches!(self, Variant::ViscousFlat)
    }

    fn viscous(self) -> bool {
        !matches!(self, Variant::MultiplicativeBarrier)
    }
}

/// Discrete `P(z, h)` on `n` points of `[-pi, pi)`.
#[derive(Clone, Debug)]
pub struct SemiclassicalOperator {
    pub variant: Variant,
    pub z: C64,
    pub h: f64,
    pub n: usize,
    pub dx: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Damping at the nodes.
    pub a_node: Vec<f64>,
    /// Damping at `x_i + dx/2`.
    pub a_mid: Vec<f64>,
    pub matrix: PeriodicBand,
}

/// Principal `sqrt(z)`; the scanned box keeps `Re z > 0`.
fn root(z: C64) -> C64 {
    z.sqrt()
}

pub fn grid_points(h: f64, ppw: f64) -> usize {
    (ppw / h).ceil() as usize
}

pub fn assemble_semiclassical(
    variant: Variant,
    z: C64,
    h: f64,
    a: &DampingProfile,
    profile: &SurfaceProfile,
    ppw: f64,
) -> Result<SemiclassicalOperator> {
    if ppw < MIN_PPW || !(h > 0.0) {
        return Err(Error::Resolution(format!("{ppw} points per wavelength, need {MIN_PPW}")));
    }
    if z.re <= 0.0 {
        return Err(Error::Domain(format!("Re z = {} must be positive", z.re)));
    }
    let n = grid_points(h, ppw);
    let dx = 2.0 * PI / n as f64;
    let x: Vec<f64> = (0..n).map(|i| -PI + i as f64 * dx).collect();
    let v: Vec<f64> = x.iter().map(|&s| if variant.barrier() { profile.w(s) } else { 0.0 }).collect();
    let a_node: Vec<f64> = x.iter().map(|&s| a.eval(s)).collect();
    let a_mid: Vec<f64> = x.iter().map(|&s| a.eval(s + 0.5 * dx)).collect();
    let sq = root(z);
    let s = h * h / (dx * dx);
    let mut m = PeriodicBand::zeros(n, 1);
    for i in 0..n {
        let im = (i + n - 1) % n;
        let (cm, cp) = if variant.viscous() {
            let c = |av: f64| C64::new(1.0, 0.0) + C64::new(-sq.im, sq.re) / h * av;
            (c(a_mid[im]), c(a_mid[i]))
        } else {
            (C64::new(1.0, 0.0), C64::new(1.0, 0.0))
        };
        m.add(i, -1, -cm * s);
        m.add(i, 0, (cm + cp) * s + v[i] - z);
        m.add(i, 1, -cp * s);
        if !variant.viscous() {
            m.add(i, 0, C64::new(0.0, h) * sq * a_node[i]);
        }
    }
    Ok(SemiclassicalOperator { variant, z, h, n, dx, x, v, a_node, a_mid, matrix: m })
}

/// `sum conj(u) g dx`, i.e. `<g, u>`.
fn pair(g: &[C64], u: &[C64], dx: f64) -> C64 {
    g.iter().zip(u).map(|(a, b)| a * b.conj()).sum::<C64>() * dx
}

fn norm(u: &[C64], dx: f64) -> f64 {
    (u.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx).sqrt()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Smin {
    pub value: f64,
    pub iterations: usize,
}

impl SemiclassicalOperator {
    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        self.matrix.apply(u)
    }

    pub fn factor(&self) -> Result<PeriodicLu> {
        self.matrix.factor()
    }

    pub fn solve(&self, g: &[C64]) -> Result<Vec<C64>> {
        let mut u = g.to_vec();
        self.factor()?.solve(&mut u);
        Ok(u)
    }

    fn grad(&self, u: &[C64]) -> Vec<C64> {
        let n = self.n;
        (0..n).map(|i| (u[(i + 1) % n] - u[i]) / self.dx).collect()
    }

    /// Left minus right sides of the real and imaginary parts of `<P u, u> = <g, u>`, each built
    /// from its own quadratic pieces rather than from the matrix.
    pub fn apriori(&self, u: &[C64], g: &[C64]) -> (f64, f64) {
        let dx = self.dx;
        let sq = root(self.z);
        let du = self.grad(u);
        let grad2: f64 = du.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx;
        let l2: f64 = u.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx;
        let pot: f64 = u.iter().zip(&self.v).map(|(c, v)| (v - self.z.re) * c.norm_sqr()).sum::<f64>() * dx;
        let damp: f64 = if self.variant.viscous() {
            du.iter().zip(&self.a_mid).map(|(c, a)| a * c.norm_sqr()).sum::<f64>() * dx / self.h
        } else {
            u.iter().zip(&self.a_node).map(|(c, a)| a * c.norm_sqr()).sum::<f64>() * dx * self.h
        };
        let h2 = self.h * self.h;
        let gu = pair(g, u, dx);
        let lhs_re = h2 * grad2 + pot - sq.im * damp * if self.variant.viscous() { h2 } else { 1.0 };
        let lhs_im = sq.re * damp * if self.variant.viscous() { h2 } else { 1.0 } - self.z.im * l2;
        (lhs_re - gu.re, lhs_im - gu.im)
    }

    /// Smallest singular value by power iteration on `P^-1 P^-*`.
    pub fn s_min(&self, tol: f64, seed: u64) -> Result<Smin> {
        let lu = self.factor()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<C64> = (0..self.n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let mut prev = 0.0;
        for it in 1..=MAX_ITERS {
            let nx = norm(&x, 1.0);
            x.iter_mut().for_each(|c| *c /= nx);
            lu.solve_adjoint(&mut x);
            let est = norm(&x, 1.0);
            lu.solve(&mut x);
            if it > 2 && (est - prev).abs() <= tol * est {
                return Ok(Smin { value: 1.0 / est, iterations: it });
            }
            prev = est;
        }
        Err(Error::Convergence(format!("singular value iteration stalled after {MAX_ITERS} steps")))
    }
}

/// Fitted `nu` in `s_min^-1 ~ h^-nu` with a 95% interval half-width.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExponentFit {
    pub nu: f64,
    pub ci95: f64,
    /// Exponent after dividing out one power of `log(1/h)`.
    pub nu_log_corrected: f64,
    pub rms: f64,
}

fn student_t975(dof: usize) -> f64 {
    const T: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    if dof == 0 {
        f64::INFINITY
    } else {
        T.get(dof - 1).copied().unwrap_or(1.96)
    }
}

/// Fit `log(norm) = c + nu log(1/h)`.
pub fn fit_exponent(hs: &[f64], norms: &[f64]) -> ExponentFit {
    let x: Vec<f64> = hs.iter().map(|h| (1.0 / h).ln()).collect();
    let y: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let (_, nu, rms) = crate::evolution::linear_fit(&x, &y);
    let ycorr: Vec<f64> = y.iter().zip(&x).map(|(v, l)| v - l.ln()).collect();
    let (_, nu_corr, _) = crate::evolution::linear_fit(&x, &ycorr);
    let m = x.len();
    let mx = x.iter().sum::<f64>() / m as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let se = if m > 2 { (rms * rms * m as f64 / (m - 2) as f64 / sxx).sqrt() } else { f64::INFINITY };
    ExponentFit { nu, ci95: student_t975(m.saturating_sub(2)) * se, nu_log_corrected: nu_corr, rms }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScanPoint {
    pub re: f64,
    pub im: f64,
    pub h: f64,
    pub s_min: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolventScan {
    pub variant: Variant,
    pub h_list: Vec<f64>,
    /// `s_min` at `z = 1` for each `h`.
    pub s_line: Vec<f64>,
    pub fit: ExponentFit,
    pub points: Vec<ScanPoint>,
    /// Largest growth of `1/s_min` when moving up one `Im z` row of the box.
    pub smoothness_factor: f64,
    /// Worst `a priori` residual relative to `|g| |u|` over the line solves.
    pub apriori_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanBox {
    pub alpha: f64,
    pub n_re: usize,
    /// `Im z` rows in units of `h`.
    pub im_over_h: Vec<f64>,
}

impl Default for ScanBox {
    fn default() -> Self {
        Self { alpha: 0.2, n_re: 5, im_over_h: vec![-1.0, -0.5, 0.0, 0.25] }
    }
}

fn random_rhs(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
}

/// Solve `P u = g` for random `g` and return the relative a priori residual.
pub fn apriori_solve_check(op: &SemiclassicalOperator, seed: u64) -> Result<f64> {
    let g = random_rhs(op.n, seed);
    let u = op.solve(&g)?;
    let (r, i) = op.apriori(&u, &g);
    Ok(r.abs().max(i.abs()) / (norm(&g, op.dx) * norm(&u, op.dx)))
}

pub fn scan_inverse_norm(
    variant: Variant,
    a: &DampingProfile,
    profile: &SurfaceProfile,
    h_list: &[f64],
    bx: &ScanBox,
    ppw: f64,
    seed: u64,
) -> Result<ResolventScan> {
    let per_h = crate::par_map(h_list, |&h| -> Result<(f64, f64, Vec<ScanPoint>, f64)> {
        let line = assemble_semiclassical(variant, C64::new(1.0, 0.0), h, a, profile, ppw)?;
        let s = line.s_min(SMIN_TOL, seed)?.value;
        let ap = apriori_solve_check(&line, seed)?;
        let mut pts = Vec::new();
        let mut factor = 1.0f64;
        for j in 0..bx.n_re {
            let re = 1.0 - bx.alpha + 2.0 * bx.alpha * j as f64 / (bx.n_re.max(2) - 1) as f64;
            let mut below: Option<f64> = None;
            for &im in &bx.im_over_h {
                let op = assemble_semiclassical(variant, C64::new(re, im * h), h, a, profile, ppw)?;
                let sm = op.s_min(1e-3, seed)?.value;
                if let Some(b) = below {
                    factor = factor.max(b / sm);
                }
                below = Some(sm);
                pts.push(ScanPoint { re, im: im * h, h, s_min: sm });
            }
        }
        Ok((s, ap, pts, factor))
    });
    let mut s_line = Vec::new();
    let mut points = Vec::new();
    let (mut smooth, mut ap) = (1.0f64, 0.0f64);
    for r in per_h {
        let (s, a, p, f) = r?;
        s_line.push(s);
        points.extend(p);
        smooth = smooth.max(f);
        ap = ap.max(a);
    }
    let inv: Vec<f64> = s_line.iter().map(|s| 1.0 / s).collect();
    Ok(ResolventScan {
        variant,
        h_list: h_list.to_vec(),
        fit: fit_exponent(h_list, &inv),
        s_line,
        points,
        smoothness_factor: smooth,
        apriori_residual: ap,
    })
}

/// Model for the cutoff estimate: the line `[-L, L)` with absorbing potential beyond `|x| = x_abs`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutoffModel {
    pub barrier: bool,
    pub half_length: f64,
    pub x_abs: f64,
    /// The cutoff is 1 on `|x| <= chi_radius` and 0 beyond `chi_radius + 1`.
    pub chi_radius: f64,
    pub ppw: f64,
}

impl Default for CutoffModel {
    fn default() -> Self {
        Self { barrier: true, half_length: 8.0, x_abs: 5.0, chi_radius: 1.5, ppw: 30.0 }
    }
}

impl CutoffModel {
    fn chi(&self, x: f64) -> f64 {
        if self.chi_radius < 0.0 {
            return 0.0;
        }
        1.0 - step(x.abs() - self.chi_radius)
    }

    /// `sech^2`: a nondegenerate top at energy 1.
    fn potential(&self, x: f64) -> f64 {
        if self.barrier {
            1.0 / x.cosh().powi(2)
        } else {
            0.0
        }
    }

    fn absorber(&self, x: f64) -> f64 {
        step((x.abs() - self.x_abs) / 2.0)
    }

    /// `|| chi Q^-1 chi ||` with `Q = (hD)^2 + V - z + i W`.
    pub fn norm(&self, h: f64, z: f64, seed: u64) -> Result<f64> {
        let len = 2.0 * self.half_length;
        let n = (self.ppw * len / (2.0 * PI * h)).ceil() as usize;
        let dx = len / n as f64;
        let x: Vec<f64> = (0..n).map(|i| -self.half_length + i as f64 * dx).collect();
        let chi: Vec<f64> = x.iter().map(|&s| self.chi(s)).collect();
        if chi.iter().all(|c| *c == 0.0) {
            return Ok(0.0);
        }
        let s = h * h / (dx * dx);
        let mut q = PeriodicBand::zeros(n, 1);
        for (i, &xi) in x.iter().enumerate() {
            q.add(i, -1, C64::new(-s, 0.0));
            q.add(i, 1, C64::new(-s, 0.0));
            q.add(i, 0, C64::new(2.0 * s + self.potential(xi) - z, self.absorber(xi)));
        }
        let lu = q.factor()?;
        let mut v = random_rhs(n, seed);
        let mut prev = 0.0;
        for it in 1..=MAX_ITERS {
            let nv = norm(&v, 1.0);
            v.iter_mut().zip(&chi).for_each(|(c, w)| *c *= w / nv);
            lu.solve(&mut v);
            v.iter_mut().zip(&chi).for_each(|(c, w)| *c *= w);
            let est = norm(&v, 1.0);
            lu.solve_adjoint(&mut v);
            if it > 2 && (est - prev).abs() <= SMIN_TOL * est {
                return Ok(est);
            }
            prev = est;
        }
        Err(Error::Convergence("cutoff norm iteration stalled".into()))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffScan {
    pub model: CutoffModel,
    pub h_list: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: ExponentFit,
}

pub fn cutoff_resolvent_estimate(model: &CutoffModel, h_list: &[f64], seed: u64) -> Result<CutoffScan> {
    let norms = crate::par_map(h_list, |&h| model.norm(h, 1.0, seed)).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CutoffScan { model: model.clone(), h_list: h_list.to_vec(), fit: fit_exponent(h_list, &norms), norms })
}
