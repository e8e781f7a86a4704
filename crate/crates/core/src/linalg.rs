//! Complex banded LU with partial pivoting and periodic (circulant-pattern) banded operators.

use num_complex::Complex64 as C64;

use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// LU factors of a banded matrix, stored row-wise with room for pivoting fill.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    a: Vec<C64>,
    l: Vec<C64>,
    piv: Vec<usize>,
}

impl BandLu {
    /// Factor the `n x n` matrix with entries `entry(i, j)` for `i - kl <= j <= i + ku`.
    pub fn factor(n: usize, kl: usize, ku: usize, entry: impl Fn(usize, usize) -> C64) -> Result<Self> {
        let w = 2 * kl + ku + 1;
        let mut a = vec![ZERO; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                a[i * w + j + kl - i] = entry(i, j);
            }
        }
        let mut l = vec![ZERO; n * kl.max(1)];
        let mut piv = vec![0; n];
        let idx = |i: usize, j: usize| i * w + j + kl - i;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut r = k;
            let mut best = a[idx(k, k)].norm();
            for i in k + 1..=last {
                let v = a[idx(i, k)].norm();
                if v > best {
                    best = v;
                    r = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Singular(k));
            }
            piv[k] = r;
            let right = (k + kl + ku).min(n - 1);
            if r != k {
                for j in k..=right {
                    a.swap(idx(k, j), idx(r, j));
                }
            }
            let inv = 1.0 / a[idx(k, k)];
            for i in k + 1..=last {
                let m = a[idx(i, k)] * inv;
                l[k * kl + (i - k - 1)] = m;
                if m != ZERO {
                    for j in k + 1..=right {
                        let u = a[idx(k, j)];
                        a[idx(i, j)] -= m * u;
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, w, a, l, piv })
    }

    #[inline]
    fn u(&self, i: usize, j: usize) -> C64 {
        self.a[i * self.w + j + self.kl - i]
    }

    pub fn solve(&self, b: &mut [C64]) {
        let (n, kl) = (self.n, self.kl);
        for k in 0..n {
            let r = self.piv[k];
            if r != k {
                b.swap(k, r);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.l[k * kl + (i - k - 1)] * bk;
            }
        }
        let span = self.kl + self.ku;
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + span).min(n - 1) {
                s -= self.u(i, j) * b[j];
            }
            b[i] = s / self.u(i, i);
        }
    }

    /// Solve with the conjugate transpose.
    pub fn solve_adjoint(&self, b: &mut [C64]) {
        let (n, kl) = (self.n, self.kl);
        let span = self.kl + self.ku;
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(span)..i {
                s -= self.u(j, i).conj() * b[j];
            }
            b[i] = s / self.u(i, i).conj();
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                s -= self.l[k * kl + (i - k - 1)].conj() * b[i];
            }
            b[k] = s;
            let r = self.piv[k];
            if r != k {
                b.swap(k, r);
            }
        }
    }
}

/// `n x n` matrix with `A[i, (i + j) mod n]` nonzero only for `|j| <= p`.
#[derive(Clone, Debug)]
pub struct PeriodicBand {
    pub n: usize,
    pub p: usize,
    /// `rows[i * (2p + 1) + j + p] = A[i, (i + j) mod n]`.
    pub rows: Vec<C64>,
}

impl PeriodicBand {
    pub fn zeros(n: usize, p: usize) -> Self {
        assert!(n > 4 * p, "grid too small for the stencil");
        Self { n, p, rows: vec![ZERO; n * (2 * p + 1)] }
    }

    #[inline]
    pub fn get(&self, i: usize, off: isize) -> C64 {
        self.rows[i * (2 * self.p + 1) + (off + self.p as isize) as usize]
    }

    #[inline]
    pub fn add(&mut self, i: usize, off: isize, v: C64) {
        self.rows[i * (2 * self.p + 1) + (off + self.p as isize) as usize] += v;
    }

    pub fn add_diagonal(&mut self, d: impl Fn(usize) -> C64) {
        for i in 0..self.n {
            self.add(i, 0, d(i));
        }
    }

    /// `alpha A + beta B` for operators sharing `n`; the result has the larger bandwidth.
    pub fn combine(alpha: C64, a: &Self, beta: C64, b: &Self) -> Self {
        assert_eq!(a.n, b.n);
        let p = a.p.max(b.p);
        let mut out = Self::zeros(a.n, p);
        for i in 0..a.n {
            for off in -(a.p as isize)..=a.p as isize {
                out.add(i, off, alpha * a.get(i, off));
            }
            for off in -(b.p as isize)..=b.p as isize {
                out.add(i, off, beta * b.get(i, off));
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        let (n, p) = (self.n, self.p);
        let w = 2 * p + 1;
        for i in p..n - p {
            let row = &self.rows[i * w..(i + 1) * w];
            y[i] = row.iter().zip(&x[i - p..=i + p]).map(|(a, b)| a * b).sum();
        }
        for i in (0..p).chain(n - p..n) {
            let mut s = ZERO;
            for off in -(p as isize)..=p as isize {
                let j = (i as isize + off).rem_euclid(n as isize) as usize;
                s += self.get(i, off) * x[j];
            }
            y[i] = s;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Entry `A[i, j]` (zero outside the band).
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        let n = self.n as isize;
        let mut off = (j as isize - i as isize).rem_euclid(n);
        if off > n / 2 {
            off -= n;
        }
        if off.unsigned_abs() > self.p {
            ZERO
        } else {
            self.get(i, off)
        }
    }

    /// Largest `|A[i, j] - A[j, i]|`.
    pub fn symmetry_defect(&self) -> f64 {
        let (n, p) = (self.n, self.p as isize);
        let mut worst = 0.0f64;
        for i in 0..n {
            for off in -p..=p {
                let j = (i as isize + off).rem_euclid(n as isize) as usize;
                worst = worst.max((self.get(i, off) - self.get(j, -off)).norm());
            }
        }
        worst
    }

    /// Factor through the interleaved ordering `0, n-1, 1, n-2, ...`, which turns the periodic
    /// pattern into an ordinary band of half-width `2p`.
    pub fn factor(&self) -> Result<PeriodicLu> {
        let n = self.n;
        let order: Vec<usize> =
            (0..n).map(|q| if q % 2 == 0 { q / 2 } else { n - 1 - q / 2 }).collect();
        let mut pos = vec![0; n];
        for (q, &i) in order.iter().enumerate() {
            pos[i] = q;
        }
        let bw = 2 * self.p;
        let lu = BandLu::factor(n, bw, bw, |qi, qj| self.entry(order[qi], order[qj]))?;
        Ok(PeriodicLu { lu, order, pos })
    }
}

#[derive(Clone, Debug)]
pub struct PeriodicLu {
    lu: BandLu,
    order: Vec<usize>,
    pos: Vec<usize>,
}

impl PeriodicLu {
    pub fn solve(&self, b: &mut [C64]) {
        let mut t: Vec<C64> = self.order.iter().map(|&i| b[i]).collect();
        self.lu.solve(&mut t);
        for (i, bi) in b.iter_mut().enumerate() {
            *bi = t[self.pos[i]];
        }
    }

    pub fn solve_adjoint(&self, b: &mut [C64]) {
        let mut t: Vec<C64> = self.order.iter().map(|&i| b[i]).collect();
        self.lu.solve_adjoint(&mut t);
        for (i, bi) in b.iter_mut().enumerate() {
            *bi = t[self.pos[i]];
        }
    }
}

pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Unconjugated bilinear form `x^T y`.
pub fn bilinear(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_periodic(n: usize, p: usize, seed: u64) -> PeriodicBand {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = PeriodicBand::zeros(n, p);
        for i in 0..n {
            for off in -(p as isize)..=p as isize {
                a.add(i, off, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
            a.add(i, 0, C64::new(0.5, 0.0));
        }
        a
    }

    #[test]
    fn periodic_solve_and_adjoint() {
        for (n, p, seed) in [(13, 2, 1), (40, 6, 2), (101, 3, 3)] {
            let a = random_periodic(n, p, seed);
            let lu = a.factor().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 10);
            let x: Vec<C64> = (0..n).map(|_| C64::new(rng.gen(), rng.gen())).collect();
            let mut b = a.apply(&x);
            lu.solve(&mut b);
            let err: f64 = b.iter().zip(&x).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "n={n} err={err}");

            // adjoint: <A^H y, x> = <y, A x>
            let y: Vec<C64> = (0..n).map(|_| C64::new(rng.gen(), rng.gen())).collect();
            let mut z = y.clone();
            lu.solve_adjoint(&mut z);
            // z = A^{-H} y  =>  <z, A x> = <y, x>
            let lhs = dot(&z, &a.apply(&x));
            let rhs = dot(&y, &x);
            assert!((lhs - rhs).norm() < 1e-9 * rhs.norm());
        }
    }
}
