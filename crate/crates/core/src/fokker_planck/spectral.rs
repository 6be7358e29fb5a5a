//! Fourier multipliers on the periodic extension of a uniform grid.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::noise::c_alpha;
use crate::stats::integrate_adaptive;

/// Angular wavenumber of FFT bin `m` for `n` points on a period `2L`.
pub fn wavenumber(m: usize, n: usize, half_width: f64) -> f64 {
    let s = if m <= n / 2 {
        m as f64
    } else {
        m as f64 - n as f64
    };
    PI * s / half_width
}

/// A real, even Fourier multiplier with precomputed plans.
pub struct Multiplier {
    symbol: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Multiplier {
    pub fn new<F: Fn(f64) -> f64>(n: usize, half_width: f64, symbol_of_abs_k: F) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::domain("n_points", n as f64, "powers of two >= 2"));
        }
        let mut planner = FftPlanner::new();
        let symbol = (0..n)
            .map(|m| symbol_of_abs_k(wavenumber(m, n, half_width).abs()))
            .collect();
        Ok(Multiplier {
            symbol,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn apply(&self, values: &[f64], out: &mut [f64]) {
        let n = self.symbol.len();
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.symbol) {
            *b *= *s / n as f64;
        }
        self.inv.process(&mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re;
        }
    }

    /// Entries `κ_0..=κ_w` of the circulant matrix, `κ_m` being the coupling
    /// between nodes `m` apart.
    pub fn kernel(&self, w: usize) -> Vec<f64> {
        let n = self.symbol.len();
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        let mut col = vec![0.0; n];
        self.apply(&e, &mut col);
        col.truncate(w.min(n - 1) + 1);
        col
    }
}

/// `(-Δ)^{α/2} f` on the periodic extension of the samples, period `2L`.
pub fn fractional_laplacian(values: &[f64], alpha: f64, half_width: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::domain("alpha", alpha, "(0, 2]"));
    }
    if !(half_width > 0.0) {
        return Err(Error::domain("L", half_width, "(0, inf)"));
    }
    let op = Multiplier::new(values.len(), half_width, |k| k.powf(alpha))?;
    let mut out = vec![0.0; values.len()];
    op.apply(values, &mut out);
    Ok(out)
}

/// Symbol of the truncated jump part, `ψ(u) = 2 c_α ∫_0^1 (cos(uz) - 1) z^{-1-α} dz`.
pub fn truncated_symbol(u: f64, alpha: f64) -> f64 {
    let u = u.abs();
    if u == 0.0 {
        return 0.0;
    }
    let c = c_alpha(alpha);
    // On [0, a] with a = min(1, 1/u) the cosine series converges fast:
    // ∫_0^a (cos(uz)-1) z^{-1-α} dz = Σ_{j>=1} (-1)^j u^{2j} a^{2j-α} / ((2j)! (2j-α)).
    let a = 1.0f64.min(1.0 / u);
    let mut series = 0.0;
    let mut term = 1.0; // u^{2j} a^{2j} / (2j)! with alternating sign
    for j in 1..60 {
        let jj = 2 * j;
        term *= -(u * a) * (u * a) / ((jj - 1) * jj) as f64;
        let add = term * a.powf(-alpha) / (jj as f64 - alpha);
        series += add;
        if add.abs() < 1e-18 * series.abs() {
            break;
        }
    }
    let mut total = series;
    if a < 1.0 {
        // ∫_a^1 cos(uz) z^{-1-α} dz by quadrature over single periods, plus
        // the closed form of ∫_a^1 z^{-1-α} dz.
        let f = |z: f64| (u * z).cos() * z.powf(-1.0 - alpha);
        let period = 2.0 * PI / u;
        let tol = 1e-15 * a.powf(-alpha);
        let mut lo = a;
        while lo < 1.0 {
            let hi = (lo + period).min(1.0);
            total += integrate_adaptive(&f, lo, hi, tol);
            lo = hi;
        }
        total -= (a.powf(-alpha) - 1.0) / alpha;
    }
    2.0 * c * total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, l: f64) -> Vec<f64> {
        (0..n)
            .map(|i| -l + (i as f64 + 0.5) * 2.0 * l / n as f64)
            .collect()
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        let (n, l) = (256, 4.0);
        for alpha in [0.5, 1.2, 1.5, 2.0] {
            for harm in [1, 3, 17] {
                let k = PI * harm as f64 / l;
                let f: Vec<f64> = grid(n, l).iter().map(|x| (k * x).cos()).collect();
                let g = fractional_laplacian(&f, alpha, l).unwrap();
                for (a, b) in g.iter().zip(&f) {
                    assert!((a - k.powf(alpha) * b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn alpha_two_is_minus_second_derivative() {
        let (n, l) = (512, 10.0);
        let dx = 2.0 * l / n as f64;
        let xs = grid(n, l);
        let f: Vec<f64> = xs.iter().map(|x| (-x * x).exp()).collect();
        let g = fractional_laplacian(&f, 2.0, l).unwrap();
        for i in 1..n - 1 {
            let fd = -(f[i + 1] - 2.0 * f[i] + f[i - 1]) / (dx * dx);
            assert!((g[i] - fd).abs() < 10.0 * dx * dx);
        }
    }

    #[test]
    fn linearity_and_domain() {
        let n = 128;
        let f: Vec<f64> = (0..n).map(|i| ((i * i) % 7) as f64).collect();
        let g: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let h: Vec<f64> = f.iter().zip(&g).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let (of, og, oh) = (
            fractional_laplacian(&f, 1.3, 3.0).unwrap(),
            fractional_laplacian(&g, 1.3, 3.0).unwrap(),
            fractional_laplacian(&h, 1.3, 3.0).unwrap(),
        );
        for i in 0..n {
            assert!((oh[i] - (2.0 * of[i] - 0.5 * og[i])).abs() < 1e-12 * (1.0 + oh[i].abs()));
        }
        assert!(fractional_laplacian(&f, 0.0, 3.0).is_err());
        assert!(fractional_laplacian(&f, 2.5, 3.0).is_err());
        assert!(fractional_laplacian(&f[..100], 1.5, 3.0).is_err());
    }

    #[test]
    fn truncated_symbol_limits() {
        let alpha = 1.5;
        let c = c_alpha(alpha);
        // small u: ψ ≈ -u² c / (2 - α)
        let u: f64 = 1e-3;
        let want = -u * u * c / (2.0 - alpha);
        assert!((truncated_symbol(u, alpha) / want - 1.0).abs() < 1e-6);
        // large u: ψ ≈ -|u|^α + 2c/α
        let u: f64 = 400.0;
        let want = -u.powf(alpha) + 2.0 * c / alpha;
        assert!((truncated_symbol(u, alpha) - want).abs() < 0.05);
        // direct quadrature at a moderate value
        let u = 3.7;
        let f = |s: f64| {
            let z = s * s * s * s;
            -2.0 * (0.5 * u * z).sin().powi(2) * z.powf(-1.0 - alpha) * 4.0 * s * s * s
        };
        let direct = 2.0 * c * integrate_adaptive(&f, 0.0, 1.0, 1e-13);
        assert!((truncated_symbol(u, alpha) - direct).abs() < 1e-9);
    }
}
