//! Banded LU without pivoting and restarted GMRES.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored by rows.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        i * (self.kl + self.ku + 1) + j + self.kl - i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let row = &self.data[self.idx(i, lo)..=self.idx(i, hi)];
            *yi = row.iter().zip(&x[lo..=hi]).map(|(a, b)| a * b).sum();
        }
    }

    /// In-place LU factorization. Intended for column diagonally dominant
    /// matrices, where elimination without pivoting is stable.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.data[self.idx(k, k)];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Invalid(format!("zero pivot at row {k}")));
            }
            let jmax = (k + self.ku).min(n - 1);
            for i in k + 1..=(k + self.kl).min(n - 1) {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                let base_i = self.idx(i, k + 1);
                let base_k = self.idx(k, k + 1);
                for off in 0..jmax - k {
                    self.data[base_i + off] -= l * self.data[base_k + off];
                }
            }
        }
        Ok(BandLu { m: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
}

impl BandLu {
    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        for i in 0..n {
            let lo = i.saturating_sub(m.kl);
            let mut s = x[i];
            for j in lo..i {
                s -= m.data[m.idx(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + m.ku).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=hi {
                s -= m.data[m.idx(i, j)] * x[j];
            }
            x[i] = s / m.data[m.idx(i, i)];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned GMRES(`restart`) for `A x = b`, starting from `x`.
/// Returns the number of inner iterations used.
pub fn gmres<A, P>(
    apply: A,
    precond: P,
    b: &[f64],
    x: &mut [f64],
    restart: usize,
    rel_tol: f64,
    max_iter: usize,
) -> Result<usize>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let target = rel_tol * bnorm;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0;
    let mut last = f64::INFINITY;
    while total < max_iter {
        apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        last = beta;
        if beta <= target {
            return Ok(total);
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k = 0;
        while k < restart && total < max_iter {
            z.copy_from_slice(&v[k]);
            precond(&mut z);
            apply(&z, &mut w);
            // modified Gram-Schmidt, applied twice for orthogonality
            for _ in 0..2 {
                for (j, vj) in v.iter().enumerate() {
                    let c = dot(&w, vj);
                    h[j][k] += c;
                    for (wi, vi) in w.iter_mut().zip(vj) {
                        *wi -= c * vi;
                    }
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let rho = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / rho;
            sn[k] = h[k + 1][k] / rho;
            h[k][k] = rho;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            total += 1;
            last = g[k].abs();
            if last <= target || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        z.iter_mut().for_each(|zi| *zi = 0.0);
        for (yj, vj) in y.iter().zip(&v) {
            for (zi, vi) in z.iter_mut().zip(vj) {
                *zi += yj * vi;
            }
        }
        precond(&mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        if last <= target {
            return Ok(total);
        }
    }
    Err(Error::NonConvergence {
        steps: total,
        last: last / bnorm,
        history: vec![last / bnorm],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> BandMatrix {
        let mut m = BandMatrix::zeros(n, 1, 2);
        for i in 0..n {
            m.add(i, i, 4.0);
            if i > 0 {
                m.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                m.add(i, i + 1, -1.5);
            }
            if i + 2 < n {
                m.add(i, i + 2, 0.25);
            }
        }
        m
    }

    #[test]
    fn band_lu_solves() {
        let m = tridiag(50);
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; 50];
        m.matvec(&x, &mut b);
        let lu = m.clone().factor().unwrap();
        lu.solve_in_place(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-13);
        }
        assert_eq!(m.get(0, 10), 0.0);
    }

    #[test]
    fn gmres_with_and_without_preconditioner() {
        let n = 200;
        let m = tridiag(n);
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).cos()).collect();
        let mut b = vec![0.0; n];
        m.matvec(&x_true, &mut b);
        let lu = m.clone().factor().unwrap();
        for pre in [false, true] {
            let mut x = vec![0.0; n];
            let it = gmres(
                |v, out| m.matvec(v, out),
                |v| {
                    if pre {
                        lu.solve_in_place(v)
                    }
                },
                &b,
                &mut x,
                30,
                1e-12,
                2000,
            )
            .unwrap();
            if pre {
                assert!(it <= 2);
            }
            for (a, e) in x.iter().zip(&x_true) {
                assert!((a - e).abs() < 1e-9);
            }
        }
    }
}
