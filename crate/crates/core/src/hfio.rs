//! Harmonic-oscillator propagator as an exact phase-space rotation, and the homogeneous model
//! solutions of `x d/dx + i rho/h`.
//!
//! `I(t) = exp(i t H/h)` with `H = ((hD)^2 + x^2)/2` acts diagonally on the normalized oscillator
//! eigenfunctions. At `t = pi/4` it intertwines `(hD)^2 - x^2` with `-2 (x hD + h/2i)` with no
//! remainder, which `egorov_check` measures.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

const I: C64 = C64::new(0.0, 1.0);

/// Tail mass above which an input counts as unresolved.
pub const TAIL_TOL: f64 = 1e-10;

/// Oscillator eigenfunctions sampled on a uniform grid of `[-L, L)`.
#[derive(Clone, Debug)]
pub struct HermiteBasisGrid {
    pub n_modes: usize,
    pub h: f64,
    pub half_width: f64,
    pub dx: f64,
    pub x: Vec<f64>,
    /// `basis[k][j] = H_k(x_j)`.
    pub basis: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl HermiteBasisGrid {
    /// `n_modes` functions on a power-of-two grid fine enough for the highest mode.
    pub fn new(n_modes: usize, h: f64) -> Result<Self> {
        if n_modes < 2 || !(h > 0.0) {
            return Err(Error::Domain(format!("need n_modes >= 2 and h > 0 (got {n_modes}, {h})")));
        }
        let half_width = (6.0 * (n_modes as f64 * h).sqrt()).max(8.0);
        // largest local wavenumber of mode n is sqrt((2n + 1)/h)
        let kmax = ((2 * n_modes + 1) as f64 / h).sqrt();
        let need = (2.0 * half_width * 1.5 * kmax / PI).ceil() as usize;
        let m = need.next_power_of_two().max(256);
        let dx = 2.0 * half_width / m as f64;
        let x: Vec<f64> = (0..m).map(|j| -half_width + j as f64 * dx).collect();
        let basis = hermite_functions(n_modes, h, &x);
        let eigenvalues = (0..n_modes).map(|k| h * (k as f64 + 0.5)).collect();
        Ok(Self { n_modes, h, half_width, dx, x, basis, eigenvalues })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sample(&self, f: impl Fn(f64) -> C64) -> Vec<C64> {
        self.x.iter().map(|&x| f(x)).collect()
    }

    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        f.iter().zip(g).map(|(a, b)| a.conj() * b).sum::<C64>() * self.dx
    }

    pub fn norm(&self, f: &[C64]) -> f64 {
        self.inner(f, f).re.sqrt()
    }

    /// `<H_k, f>` for every mode.
    pub fn coefficients(&self, f: &[C64]) -> Vec<C64> {
        self.basis.iter().map(|hk| hk.iter().zip(f).map(|(a, b)| a * b).sum::<C64>() * self.dx).collect()
    }

    pub fn synthesize(&self, c: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        for (ck, hk) in c.iter().zip(&self.basis) {
            if *ck != C64::new(0.0, 0.0) {
                out.iter_mut().zip(hk).for_each(|(o, v)| *o += ck * v);
            }
        }
        out
    }

    /// `||f - P f|| / ||f||` with `P` the projection on the lower half of the modes.
    pub fn tail_mass(&self, f: &[C64]) -> f64 {
        let mut c = self.coefficients(f);
        c.truncate(self.n_modes / 2);
        let low = self.synthesize(&c);
        let diff: Vec<C64> = f.iter().zip(&low).map(|(a, b)| a - b).collect();
        self.norm(&diff) / self.norm(f)
    }

    fn require_resolved(&self, f: &[C64]) -> Result<()> {
        let t = self.tail_mass(f);
        if t > TAIL_TOL {
            return Err(Error::Resolution(format!("tail mass {t:.2e} above {TAIL_TOL:.0e}")));
        }
        Ok(())
    }

    /// Largest entry of `|G - I|` for the discrete Gram matrix.
    pub fn gram_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_modes {
            for j in 0..=i {
                let g: f64 = self.basis[i].iter().zip(&self.basis[j]).map(|(a, b)| a * b).sum::<f64>() * self.dx;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// `f^(order)` by FFT on the periodic grid.
    pub fn derivative(&self, f: &[C64], order: u32) -> Vec<C64> {
        let m = self.len();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut buf = f.to_vec();
        fwd.process(&mut buf);
        let base = 2.0 * PI / (2.0 * self.half_width);
        for (j, b) in buf.iter_mut().enumerate() {
            let q = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
            // drop the unpaired Nyquist mode for odd derivatives
            let factor = if j == m / 2 && order % 2 == 1 { C64::new(0.0, 0.0) } else { (I * base * q).powu(order) };
            *b *= factor / m as f64;
        }
        inv.process(&mut buf);
        buf
    }

    /// `((hD)^2 - x^2) f`.
    pub fn apply_p(&self, f: &[C64]) -> Vec<C64> {
        let d2 = self.derivative(f, 2);
        (0..self.len()).map(|j| -self.h * self.h * d2[j] - self.x[j] * self.x[j] * f[j]).collect()
    }

    /// `-2 (x hD + h/2i) f`, the Weyl quantization of `-2 x xi`.
    pub fn apply_q(&self, f: &[C64]) -> Vec<C64> {
        let d1 = self.derivative(f, 1);
        let h = self.h;
        (0..self.len()).map(|j| -2.0 * (self.x[j] * (h / I) * d1[j] + h / (2.0 * I) * f[j])).collect()
    }

    /// `(<x>, <hD>)` for a normalized state.
    pub fn phase_space_center(&self, f: &[C64]) -> (f64, f64) {
        let n2 = self.norm(f).powi(2);
        let xm: f64 = f.iter().zip(&self.x).map(|(v, x)| x * v.norm_sqr()).sum::<f64>() * self.dx / n2;
        let d1 = self.derivative(f, 1);
        let hd: Vec<C64> = d1.iter().map(|d| self.h / I * d).collect();
        (xm, self.inner(f, &hd).re / n2)
    }
}

/// Normalized oscillator eigenfunctions `H_0..H_{n-1}` for `((hD)^2 + x^2)/2`.
///
/// The three-term recurrence runs on `y = x/sqrt(h)` without the Gaussian factor, with a
/// running exponent to avoid overflow; the Gaussian is applied at the end.
fn hermite_functions(n: usize, h: f64, x: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; x.len()]; n];
    let norm0 = -0.25 * (PI * h).ln();
    for (j, &xj) in x.iter().enumerate() {
        let y = xj / h.sqrt();
        let mut log_scale = norm0 - 0.5 * y * y;
        let (mut prev, mut cur) = (0.0f64, 1.0f64);
        for k in 0..n {
            out[k][j] = if log_scale < -745.0 { 0.0 } else { cur * log_scale.exp() };
            let next = (2.0 / (k + 1) as f64).sqrt() * y * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
            prev = cur;
            cur = next;
            let big = cur.abs().max(prev.abs());
            if big > 1e100 {
                prev /= big;
                cur /= big;
                log_scale += big.ln();
            }
        }
    }
    out
}

/// `I(t) f = sum_k exp(i t lambda_k / h) <f, H_k> H_k`.
pub fn fio_apply(t: f64, f: &[C64], basis: &HermiteBasisGrid) -> Result<Vec<C64>> {
    basis.require_resolved(f)?;
    Ok(fio_apply_unchecked(t, f, basis))
}

fn fio_apply_unchecked(t: f64, f: &[C64], basis: &HermiteBasisGrid) -> Vec<C64> {
    let c: Vec<C64> = basis
        .coefficients(f)
        .into_iter()
        .zip(&basis.eigenvalues)
        .map(|(c, l)| c * (I * t * l / basis.h).exp())
        .collect();
    basis.synthesize(&c)
}

/// `fio_apply` over several inputs.
pub fn fio_apply_many(t: f64, fs: &[Vec<C64>], basis: &HermiteBasisGrid) -> Result<Vec<Vec<C64>>> {
    crate::par_map(fs, |f| fio_apply(t, f, basis)).into_iter().collect()
}

/// `||I(pi/4) P f - Q I(pi/4) f|| / ||f||` with `P = (hD)^2 - x^2`, `Q = -2(x hD + h/2i)`.
pub fn egorov_check(f: &[C64], basis: &HermiteBasisGrid) -> Result<f64> {
    basis.require_resolved(f)?;
    let t = PI / 4.0;
    let lhs = fio_apply_unchecked(t, &basis.apply_p(f), basis);
    let rhs = basis.apply_q(&fio_apply_unchecked(t, f, basis));
    let diff: Vec<C64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(basis.norm(&diff) / basis.norm(f))
}

/// Coherent state centred at `(x0, xi0)`, unit norm.
pub fn coherent_state(x0: f64, xi0: f64, h: f64) -> impl Fn(f64) -> C64 {
    let c = (PI * h).powf(-0.25);
    move |x| c * C64::new(-(x - x0).powi(2) / (2.0 * h), xi0 * (x - x0) / h).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Position,
    Frequency,
}

/// `1_{s > 0} s^{-i rho/h}` on the half-line selected by `branch`, in the variable `x`
/// (position) or `xi` (frequency). Both representations share the formula.
pub fn model_solution(x: f64, rho: C64, h: f64, branch: Branch, _rep: Representation) -> C64 {
    let s = match branch {
        Branch::Plus => x,
        Branch::Minus => -x,
    };
    if s <= 0.0 {
        return C64::new(0.0, 0.0);
    }
    (-I * rho / h * s.ln()).exp()
}
