//! Time integration of damped second-order systems `q'' + M q + D q' = 0` and decay fits.
//!
//! The integrator is the two-stage Gauss-Legendre collocation method. It conserves the quadratic
//! energy `|p|^2 + <q, M q>` exactly when `D = 0` and, for `D >= 0`, loses exactly
//! `2 dt sum_i b_i <V_i, D V_i>` per step, `V_i` being the stage velocities. The coupled stage
//! system is split by diagonalizing the Butcher matrix, leaving two banded solves with
//! `I + c D + c^2 M` per step.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geometry::DampingProfile;
use crate::linalg::{PeriodicBand, PeriodicLu};
use crate::spectral_oracle::ModeOperator;
use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Relative energy below which samples are not fitted.
pub const NOISE_FLOOR: f64 = 1e-12;
/// Viscous runs on coarse grids settle on slowly decaying grid modes near `1e-9 E(0)`.
pub const OVERDAMPED_FLOOR: f64 = 1e-6;

/// Largest `k dt` accepted by `evolve_mode`.
pub const CFL_MODE: f64 = 0.2;

/// `q'' + M q + D q' = 0` with the discrete inner product `weight * sum conj(x) y`.
#[derive(Clone, Debug)]
pub struct SecondOrderSystem {
    pub stiffness: PeriodicBand,
    pub damping: PeriodicBand,
    pub weight: f64,
}

impl SecondOrderSystem {
    pub fn n(&self) -> usize {
        self.stiffness.n
    }

    fn inner_re(&self, x: &[C64], y: &[C64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * self.weight
    }

    /// `|p|^2 + <q, M q>`.
    pub fn energy(&self, q: &[C64], p: &[C64]) -> f64 {
        self.inner_re(p, p) + self.inner_re(q, &self.stiffness.apply(q))
    }

    /// `<v, D v>`, the instantaneous loss rate divided by two.
    pub fn dissipation(&self, v: &[C64]) -> f64 {
        self.inner_re(v, &self.damping.apply(v))
    }

}

/// Per-mode system in the conjugated variable: `M` from the mode operator, `D = diag(a)`.
pub fn mode_system(op: &ModeOperator) -> SecondOrderSystem {
    let mut damping = PeriodicBand::zeros(op.n, 0);
    damping.add_diagonal(|i| C64::new(op.a[i], 0.0));
    SecondOrderSystem { stiffness: op.m.clone(), damping, weight: op.dz }
}

/// `-d_x^2` and `-d_x (a d_x)` on `n` points of the circle, second order, with `a` taken at
/// half points so that the discrete energy is `|u_t|^2 + |D+ u|^2`.
pub fn viscous_system(a: &DampingProfile, n: usize) -> SecondOrderSystem {
    let dx = 2.0 * PI / n as f64;
    let s = 1.0 / (dx * dx);
    let mut k = PeriodicBand::zeros(n, 1);
    let mut d = PeriodicBand::zeros(n, 1);
    for i in 0..n {
        k.add(i, -1, C64::new(-s, 0.0));
        k.add(i, 0, C64::new(2.0 * s, 0.0));
        k.add(i, 1, C64::new(-s, 0.0));
        let am = a.eval((i as f64 - 0.5) * dx);
        let ap = a.eval((i as f64 + 0.5) * dx);
        d.add(i, -1, C64::new(-am * s, 0.0));
        d.add(i, 0, C64::new((am + ap) * s, 0.0));
        d.add(i, 1, C64::new(-ap * s, 0.0));
    }
    SecondOrderSystem { stiffness: k, damping: d, weight: dx }
}

/// Two-stage Gauss-Legendre stepper with the stage matrices factored once.
pub struct Gl2Stepper<'a> {
    sys: &'a SecondOrderSystem,
    dt: f64,
    /// Eigenvector matrix `S` of the Butcher matrix and `S^-1 1`.
    s: [[C64; 2]; 2],
    w: [C64; 2],
    c: [C64; 2],
    lu: [PeriodicLu; 2],
}

impl<'a> Gl2Stepper<'a> {
    pub fn new(sys: &'a SecondOrderSystem, dt: f64) -> Result<Self> {
        let r3 = 3f64.sqrt();
        let a = [[0.25, 0.25 - r3 / 6.0], [0.25 + r3 / 6.0, 0.25]];
        // eigenvalues 1/4 +/- i/(4 sqrt 3); eigenvectors (a01, lambda - a00)
        let lam = [C64::new(0.25, 1.0 / (4.0 * r3)), C64::new(0.25, -1.0 / (4.0 * r3))];
        let s = [[C64::new(a[0][1], 0.0), C64::new(a[0][1], 0.0)], [lam[0] - a[0][0], lam[1] - a[0][0]]];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        let w = [inv[0][0] + inv[0][1], inv[1][0] + inv[1][1]];
        let c = [lam[0] * dt, lam[1] * dt];
        let build = |c: C64| -> Result<PeriodicLu> {
            let mut m = PeriodicBand::combine(c * c, &sys.stiffness, c, &sys.damping);
            m.add_diagonal(|_| ONE);
            m.factor()
        };
        let lu = [build(c[0])?, build(c[1])?];
        Ok(Self { sys, dt, s, w, c, lu })
    }

    /// Advance `(q, p)` by one step; returns the energy removed by the damping.
    pub fn step(&self, q: &mut [C64], p: &mut [C64]) -> f64 {
        let n = q.len();
        let mq = self.sys.stiffness.apply(q);
        let mp = self.sys.stiffness.apply(p);
        let dp = self.sys.damping.apply(p);
        // (I - c J) x = c w_i J y, with J y = (p, -M q - D p):
        // (I + cD + c^2 M) x2 = c w_i (-M q - D p - c M p), x1 = c w_i p + c x2
        let mut zhat: Vec<(Vec<C64>, Vec<C64>)> = Vec::with_capacity(2);
        for i in 0..2 {
            let c = self.c[i];
            let cw = c * self.w[i];
            let mut x2: Vec<C64> = (0..n).map(|j| cw * (-mq[j] - dp[j] - c * mp[j])).collect();
            self.lu[i].solve(&mut x2);
            let x1: Vec<C64> = (0..n).map(|j| cw * p[j] + c * x2[j]).collect();
            zhat.push((x1, x2));
        }
        // stage increments Z_i = sum_j S_ij zhat_j; collocation gives y1 = y + sqrt3 (Z_2 - Z_1)
        let r3 = 3f64.sqrt();
        let mut lost = 0.0;
        let mut zq = [vec![ZERO; n], vec![ZERO; n]];
        let mut zp = [vec![ZERO; n], vec![ZERO; n]];
        for i in 0..2 {
            for j in 0..n {
                zq[i][j] = self.s[i][0] * zhat[0].0[j] + self.s[i][1] * zhat[1].0[j];
                zp[i][j] = self.s[i][0] * zhat[0].1[j] + self.s[i][1] * zhat[1].1[j];
            }
            let v: Vec<C64> = (0..n).map(|j| p[j] + zp[i][j]).collect();
            lost += self.dt * self.sys.dissipation(&v);
        }
        for j in 0..n {
            q[j] += r3 * (zq[1][j] - zq[0][j]);
            p[j] += r3 * (zp[1][j] - zp[0][j]);
        }
        lost
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DecayRecord {
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    /// Worst `|E_{n+1} - E_n + loss_n|` over all steps.
    pub balance_defect: f64,
    /// Worst per-step increase `max(E_{n+1} - E_n, 0)`.
    pub max_increase: f64,
    pub dt: f64,
    pub steps: usize,
}

impl DecayRecord {
    pub fn e0(&self) -> f64 {
        self.energy[0]
    }
}

/// Integrate to `t_final` with step `dt`, storing about `samples` energies and calling
/// `observe(t, q, p)` at each stored sample.
pub fn evolve_with(
    sys: &SecondOrderSystem,
    q0: &[C64],
    p0: &[C64],
    t_final: f64,
    dt: f64,
    samples: usize,
    mut observe: impl FnMut(f64, &[C64], &[C64]),
) -> Result<(DecayRecord, Vec<C64>, Vec<C64>)> {
    let steps = (t_final / dt).ceil() as usize;
    let dt = t_final / steps as f64;
    let stride = (steps / samples.max(1)).max(1);
    let stepper = Gl2Stepper::new(sys, dt)?;
    let (mut q, mut p) = (q0.to_vec(), p0.to_vec());
    let mut rec = DecayRecord { dt, steps, ..Default::default() };
    let mut e = sys.energy(&q, &p);
    rec.t.push(0.0);
    rec.energy.push(e);
    observe(0.0, &q, &p);
    for s in 1..=steps {
        let lost = stepper.step(&mut q, &mut p);
        let e1 = sys.energy(&q, &p);
        rec.balance_defect = rec.balance_defect.max((e1 - e + lost).abs());
        rec.max_increase = rec.max_increase.max(e1 - e);
        e = e1;
        if s % stride == 0 || s == steps {
            let t = s as f64 * dt;
            rec.t.push(t);
            rec.energy.push(e);
            observe(t, &q, &p);
        }
    }
    Ok((rec, q, p))
}

/// Per-mode damped wave in the conjugated variable, initial data `(psi0, psi1)`.
pub fn evolve_mode(
    op: &ModeOperator,
    psi0: &[C64],
    psi1: &[C64],
    t_final: f64,
    dt: f64,
    samples: usize,
) -> Result<(DecayRecord, Vec<C64>, Vec<C64>)> {
    if op.k as f64 * dt > CFL_MODE {
        return Err(Error::Resolution(format!("k dt = {:.3} above {CFL_MODE}", op.k as f64 * dt)));
    }
    if psi0.len() != op.n || psi1.len() != op.n {
        return Err(Error::Domain("initial data must live on the operator grid".into()));
    }
    evolve_with(&mode_system(op), psi0, psi1, t_final, dt, samples, |_, _, _| {})
}

/// Viscous wave `u_tt - u_xx - (a u_xt)_x = 0` on the circle from `u = 0`, `u_t = f`.
pub fn evolve_overdamped(
    a: &DampingProfile,
    f: &[C64],
    t_final: f64,
    dt: f64,
    samples: usize,
) -> Result<DecayRecord> {
    let sys = viscous_system(a, f.len());
    let zero = vec![ZERO; f.len()];
    Ok(evolve_with(&sys, &zero, f, t_final, dt, samples, |_, _, _| {})?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `log E = alpha - t / C`; the parameter is `C`.
    Exp,
    /// `log E = alpha - 2 c sqrt t`; the parameter is `c`.
    SubexpSqrt,
    /// `log E = alpha - 2 Im(tau) t`; the parameter is `Im tau`.
    Mode,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub param: f64,
    pub intercept: f64,
    /// RMS residual of `log E` divided by the fitted range of `log E`.
    pub residual: f64,
}

/// Least-squares line `y = alpha + beta x`, with the RMS residual.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - alpha - beta * a).powi(2)).sum::<f64>() / n).sqrt();
    (alpha, beta, rms)
}

/// Fit `model` to the samples with `t >= t_min` whose energy stays above `floor * E(0)`.
pub fn fit_decay(rec: &DecayRecord, model: DecayModel, t_min: f64, floor: f64) -> Result<DecayFit> {
    let e0 = rec.e0();
    let last = *rec.energy.last().unwrap();
    if last / e0 > 0.5 {
        return Err(Error::InsufficientDecay(last / e0));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (t, e) in rec.t.iter().zip(&rec.energy) {
        if *t >= t_min && *e > floor * e0 {
            x.push(match model {
                DecayModel::SubexpSqrt => t.sqrt(),
                _ => *t,
            });
            y.push(e.ln());
        }
    }
    if x.len() < 50 {
        return Err(Error::Domain(format!("{} usable samples, need 50", x.len())));
    }
    let (alpha, beta, rms) = linear_fit(&x, &y);
    let range = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);
    let param = match model {
        DecayModel::Exp => -1.0 / beta,
        DecayModel::SubexpSqrt | DecayModel::Mode => -beta / 2.0,
    };
    Ok(DecayFit { model, param, intercept: alpha, residual: rms / range })
}

/// `|| (1 + k^2 + D_z^2)^{s/2} u ||` for samples on the uniform grid of `[0, 2pi)`.
pub fn hs_norm(u: &[C64], s: f64, k: u32) -> f64 {
    let n = u.len();
    let mut buf = u.to_vec();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let kk = (k as f64).powi(2);
    let sum: f64 = buf
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let q = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            (1.0 + kk + q * q).powf(s) * c.norm_sqr()
        })
        .sum();
    // Parseval: sum |u_j|^2 dz = (2 pi / n^2) sum |c_q|^2
    (sum * 2.0 * PI / (n * n) as f64).sqrt()
}

/// `||(u0, u1)||` in `H^{1+s} x H^s` for mode `k`.
pub fn sobolev_norm(u0: &[C64], u1: &[C64], s: f64, k: u32) -> f64 {
    (hs_norm(u0, 1.0 + s, k).powi(2) + hs_norm(u1, s, k).powi(2)).sqrt()
}

/// One member of the family defining the envelope: sampled `log(E(t)/||data||^2)` followed by
/// exponential decay at `rate` beyond the last sample.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub tau_abs: f64,
    pub rate: f64,
    pub t: Vec<f64>,
    pub log_ratio: Vec<f64>,
}

impl Witness {
    /// Pure mode `|tau|^{-2 delta} e^{-rate t}`.
    pub fn modal(tau_abs: f64, rate: f64, delta: f64) -> Self {
        Self { tau_abs, rate, t: vec![0.0], log_ratio: vec![-2.0 * delta * tau_abs.ln()] }
    }

    pub fn log_value(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t >= self.t[n - 1] {
            return self.log_ratio[n - 1] - self.rate * (t - self.t[n - 1]);
        }
        let j = self.t.partition_point(|&s| s <= t).max(1);
        let w = (t - self.t[j - 1]) / (self.t[j] - self.t[j - 1]);
        self.log_ratio[j - 1] * (1.0 - w) + self.log_ratio[j] * w
    }
}

/// `log f(t) = max_j log(E_j(t)/||data_j||^2)` on the given times.
pub fn envelope(witnesses: &[Witness], ts: &[f64]) -> Vec<f64> {
    ts.iter()
        .map(|&t| witnesses.iter().map(|w| w.log_value(t)).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnvelopeFit {
    /// `c` in `f(t) >= C^-1 e^{-c sqrt t}`.
    pub c: f64,
    /// Smallest `log C` making the bound hold on every sample.
    pub log_c_const: f64,
    pub rms_sqrt: f64,
    /// RMS residual of the competing exponential fit.
    pub rms_exp: f64,
}

pub fn fit_envelope(ts: &[f64], log_f: &[f64]) -> EnvelopeFit {
    let st: Vec<f64> = ts.iter().map(|t| t.sqrt()).collect();
    let (_, beta, rms_sqrt) = linear_fit(&st, log_f);
    let (_, _, rms_exp) = linear_fit(ts, log_f);
    let c = -beta;
    let log_c_const = ts.iter().zip(log_f).map(|(t, l)| -c * t.sqrt() - l).fold(f64::NEG_INFINITY, f64::max);
    EnvelopeFit { c, log_c_const, rms_sqrt, rms_exp }
}

/// Log-spaced times between `t0` and `t1`.
pub fn log_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| t0 * (t1 / t0).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Per-mode run started from quasimode data `(v, i tau v)`.
#[derive(Clone, Debug, Serialize)]
pub struct ModeRun {
    pub k: u32,
    pub tau: C64,
    pub record: DecayRecord,
    pub fit: DecayFit,
    /// `||(v, i tau v)||` in `H^{1+delta} x H^delta`.
    pub data_norm: f64,
    pub delta: f64,
    /// `|| Q(tau) v ||` on the evolution grid.
    pub residual: f64,
    /// Largest energy-norm distance between the run and `e^{i t tau} v`.
    pub duhamel_error: f64,
    /// `duhamel_error` over `int_0^t ||R|| e^{-s Im tau} ds` at the worst time.
    pub duhamel_ratio: f64,
}

impl ModeRun {
    /// Witness for the envelope, normalized by the squared data norm.
    pub fn witness(&self) -> Witness {
        let ln_norm = 2.0 * self.data_norm.ln();
        Witness {
            tau_abs: self.tau.norm(),
            rate: 2.0 * self.fit.param,
            t: self.record.t.clone(),
            log_ratio: self.record.energy.iter().map(|e| e.ln() - ln_norm).collect(),
        }
    }
}

/// Evolve quasimode data at mode `k` on a grid with `ppw` points per wavelength up to `t_final`
/// (default `log^2 k`).
pub fn quasimode_run(
    k: u32,
    a: &DampingProfile,
    profile: &crate::geometry::SurfaceProfile,
    delta: f64,
    ppw: usize,
    t_final: Option<f64>,
) -> Result<ModeRun> {
    use crate::quasimode::{build_quasimode, QuasimodeOptions};
    use crate::spectral_oracle::assemble_mode;
    let qm = build_quasimode(k, a, profile, &QuasimodeOptions::default())?;
    let n = (ppw * k as usize).next_power_of_two().min(qm.u.len());
    let stride = qm.u.len() / n;
    let v: Vec<C64> = qm.u.iter().step_by(stride).cloned().collect();
    let op = assemble_mode(k, profile, a, n)?;
    let tau = qm.tau();
    let v1: Vec<C64> = v.iter().map(|x| C64::new(0.0, 1.0) * tau * x).collect();
    let sys = mode_system(&op);
    let r = op.pencil_apply(tau, &v);
    let residual = (r.iter().map(|c| c.norm_sqr()).sum::<f64>() * op.dz).sqrt();
    let t_final = t_final.unwrap_or_else(|| (k as f64).ln().powi(2));
    let dt = CFL_MODE / k as f64;
    let (mut err, mut ratio) = (0.0f64, 0.0f64);
    let observe = |t: f64, q: &[C64], p: &[C64]| {
        let ph = (C64::new(0.0, 1.0) * tau * t).exp();
        let dq: Vec<C64> = q.iter().zip(&v).map(|(x, y)| x - ph * y).collect();
        let dp: Vec<C64> = p.iter().zip(&v1).map(|(x, y)| x - ph * y).collect();
        let e = sys.energy(&dq, &dp).max(0.0).sqrt();
        let bound = residual * if tau.im > 0.0 { (1.0 - (-tau.im * t).exp()) / tau.im } else { t };
        err = err.max(e);
        if t > 0.0 {
            ratio = ratio.max(e / bound);
        }
    };
    let (record, _, _) = evolve_with(&sys, &v, &v1, t_final, dt, 1000, observe)?;
    let fit = fit_decay(&record, DecayModel::Mode, 0.0, NOISE_FLOOR)?;
    let data_norm = sobolev_norm(&v, &v1, delta, k);
    Ok(ModeRun { k, tau, record, fit, data_norm, delta, residual, duhamel_error: err, duhamel_ratio: ratio })
}

/// Modal witnesses `|tau|^{-2 delta} e^{-2 Im(tau) t}` from the gap-limited bound at `h = e^{-L}`
/// for log-spaced `L` in `[l_min, l_max]`.
pub fn asymptotic_witnesses(
    profile: &crate::geometry::SurfaceProfile,
    a: &DampingProfile,
    eps: f64,
    delta: f64,
    l_min: f64,
    l_max: f64,
    count: usize,
) -> Result<Vec<Witness>> {
    log_times(l_min, l_max, count)
        .into_iter()
        .map(|l| {
            let (_, im) = crate::quantize::gap_bound_im_tau((-l).exp(), profile, a, eps)?;
            Ok(Witness { tau_abs: l.exp(), rate: 2.0 * im, t: vec![0.0], log_ratio: vec![-2.0 * delta * l] })
        })
        .collect()
}

/// Smooth mean-zero data on `n` points: random Fourier coefficients on modes `1..=modes`.
pub fn smooth_data(n: usize, modes: usize, seed: u64) -> Vec<C64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<(f64, f64)> = (0..modes).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    (0..n)
        .map(|i| {
            let x = 2.0 * PI * i as f64 / n as f64;
            let v: f64 = coef.iter().enumerate().map(|(j, (a, b))| a * ((j + 1) as f64 * x).cos() + b * ((j + 1) as f64 * x).sin()).sum();
            C64::new(v, 0.0)
        })
        .collect()
}

/// Random bump dampings on the circle that pass the regularity check.
pub fn random_admissible_bumps(count: usize, seed: u64) -> Vec<DampingProfile> {
    use crate::geometry::{check_damping_regularity, REGULARITY_CAP};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let half = rng.gen_range(0.5..1.5);
        let a = DampingProfile::bump(rng.gen_range(-PI..PI), half, rng.gen_range(0.3..0.6) * half, rng.gen_range(3..=8));
        if check_damping_regularity(&a, &a.regularity_grid(512), REGULARITY_CAP).pass {
            out.push(a);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct OverdampedRun {
    pub n: usize,
    pub record: DecayRecord,
    pub fit: DecayFit,
}

/// Viscous run from `u_t = f` with `f` resampled from fixed Fourier data, fitted from `t_final / 8`.
pub fn overdamped_rate(a: &DampingProfile, n: usize, t_final: f64, dt: f64, seed: u64) -> Result<OverdampedRun> {
    let f = smooth_data(n, 4, seed);
    let record = evolve_overdamped(a, &f, t_final, dt, 2000)?;
    let fit = fit_decay(&record, DecayModel::Exp, t_final / 8.0, OVERDAMPED_FLOOR)?;
    Ok(OverdampedRun { n, record, fit })
}
