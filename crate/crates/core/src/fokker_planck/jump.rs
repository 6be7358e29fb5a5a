//! Physical-space quadrature of the jump kernel `k(y) = κ |y|^{-1-α}` on
//! `|y| < r`.
//!
//! The density is interpolated by hat functions, so the weight of the node
//! `m` cells away is the integral of its hat against the kernel. The piece
//! `|y| < dx` is replaced by its second-order Taylor term, a diffusion with
//! coefficient `κ dx^{2-α} / (2-α)`. Hat interpolation overstates the second
//! moment by up to `dx²/4` per unit jump mass; the nearest-neighbour weight
//! absorbs the difference, so `Σ 2 W_m (m dx)²` is exact. All weights stay
//! positive, which keeps the discrete generator an M-matrix.

/// `∫_a^b (p + q y) y^{-1-α} dy` for `0 < a <= b`.
fn moment_integral(p: f64, q: f64, a: f64, b: f64, alpha: f64) -> f64 {
    p * (a.powf(-alpha) - b.powf(-alpha)) / alpha
        + q * (b.powf(1.0 - alpha) - a.powf(1.0 - alpha)) / (1.0 - alpha)
}

/// Weights `W_1..=W_w` (index 0 unused) with
/// `(Jp)_i = Σ_m W_m (p_{i+m} + p_{i-m} - 2 p_i)`.
pub fn kernel_weights(kappa: f64, alpha: f64, radius: f64, dx: f64) -> Vec<f64> {
    if kappa == 0.0 || radius <= 0.0 {
        return vec![0.0, 0.0];
    }
    let near = radius.min(dx);
    let w = (radius / dx).ceil() as usize + 1;
    let mut out = vec![0.0; w + 1];
    out[1] = kappa * near.powf(2.0 - alpha) / (2.0 - alpha) / (dx * dx);
    for (m, slot) in out.iter_mut().enumerate().skip(1) {
        let mf = m as f64;
        // rising edge of the hat on [(m-1)dx, m dx]: y/dx - (m-1)
        let (a, b) = (((mf - 1.0) * dx).max(dx), (mf * dx).min(radius));
        if b > a {
            *slot += kappa * moment_integral(-(mf - 1.0), 1.0 / dx, a, b, alpha);
        }
        // falling edge on [m dx, (m+1)dx]: (m+1) - y/dx
        let (a, b) = ((mf * dx).max(dx), ((mf + 1.0) * dx).min(radius));
        if b > a {
            *slot += kappa * moment_integral(mf + 1.0, -1.0 / dx, a, b, alpha);
        }
    }
    let m2: f64 = out
        .iter()
        .enumerate()
        .skip(1)
        .map(|(m, w)| 2.0 * w * (m as f64 * dx).powi(2))
        .sum();
    let exact = 2.0 * kappa * radius.powf(2.0 - alpha) / (2.0 - alpha);
    out[1] -= (m2 - exact) / (2.0 * dx * dx);
    while out.len() > 2 && *out.last().unwrap() == 0.0 {
        out.pop();
    }
    out
}

/// `(Jp)_i` with jumps leaving `[0, n)` suppressed.
pub fn apply_censored(weights: &[f64], p: &[f64], out: &mut [f64]) {
    let n = p.len();
    for i in 0..n {
        let mut acc = 0.0;
        for (m, &w) in weights.iter().enumerate().skip(1) {
            if i + m < n {
                acc += w * (p[i + m] - p[i]);
            }
            if i >= m {
                acc += w * (p[i - m] - p[i]);
            }
        }
        out[i] = acc;
    }
}

/// Discrete symbol `Σ_m 2 W_m (cos(k m dx) - 1)` of the weights.
pub fn discrete_symbol(weights: &[f64], k: f64, dx: f64) -> f64 {
    weights
        .iter()
        .enumerate()
        .skip(1)
        .map(|(m, w)| 2.0 * w * ((k * m as f64 * dx).cos() - 1.0))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fokker_planck::spectral::truncated_symbol;
    use crate::noise::c_alpha;

    #[test]
    fn weights_are_positive_and_match_truncated_symbol() {
        let alpha = 1.5;
        let sigma: f64 = 0.5;
        let dx = 1.0 / 256.0;
        let w = kernel_weights(c_alpha(alpha) * sigma.powf(alpha), alpha, sigma, dx);
        assert!(w[1..].iter().all(|&v| v > 0.0));
        assert_eq!(w.len() - 1, (sigma / dx) as usize);
        for k in [0.5, 2.0, 8.0, 20.0] {
            let exact = truncated_symbol(sigma * k, alpha);
            let disc = discrete_symbol(&w, k, dx);
            assert!(
                (disc - exact).abs() < 2e-3 * exact.abs().max(1e-3),
                "k={k} {disc} {exact}"
            );
        }
    }

    #[test]
    fn second_moment_is_exact() {
        let (kappa, alpha, r, dx): (f64, f64, f64, f64) = (0.3, 1.3, 0.7, 0.01);
        let w = kernel_weights(kappa, alpha, r, dx);
        let m2: f64 = w
            .iter()
            .enumerate()
            .skip(1)
            .map(|(m, v)| 2.0 * v * (m as f64 * dx).powi(2))
            .sum();
        let exact = 2.0 * kappa * r.powf(2.0 - alpha) / (2.0 - alpha);
        assert!((m2 - exact).abs() < 1e-12 * exact);
        assert!(w[1..].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn censored_operator_conserves_mass() {
        let w = kernel_weights(0.2, 1.5, 0.3, 0.05);
        let p: Vec<f64> = (0..40).map(|i| 1.0 + (i as f64 * 0.7).sin()).collect();
        let mut out = vec![0.0; 40];
        apply_censored(&w, &p, &mut out);
        assert!(out.iter().sum::<f64>().abs() < 1e-12);
    }
}
