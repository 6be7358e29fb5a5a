//! Empirical measures on the line: quantiles, moments, Wasserstein
//! distances, histogram comparisons and the ergodic decay fit.

use std::io::Write;

use crate::ensemble::par_map;
use crate::error::{Error, Result};
use crate::noise::{NoiseConfig, NoiseSource};
use crate::rng::derive_seed;
use crate::sde::{advance, DriftStep, ModelParams, Scheme};
use crate::stats::{fmt_f64, linear_fit, LinearFit};

/// A finite sample, kept sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    samples: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Invalid(
                "empirical measure needs at least one sample".into(),
            ));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite sample {bad}")));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalMeasure { samples })
    }

    pub fn dirac(x: f64, n: usize) -> Result<Self> {
        Self::new(vec![x; n.max(1)])
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.n() as f64
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.samples.iter().map(|x| x.powi(k)).sum::<f64>() / self.n() as f64
    }

    /// Linearly interpolated quantile with `q = 0` the minimum and `q = 1` the
    /// maximum.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.n();
        if n == 1 {
            return self.samples[0];
        }
        let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = (h.floor() as usize).min(n - 2);
        let frac = h - lo as f64;
        self.samples[lo] + frac * (self.samples[lo + 1] - self.samples[lo])
    }

    /// `m` equally spaced quantiles.
    pub fn resample(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Invalid("cannot resample to zero points".into()));
        }
        if m == 1 {
            return Self::new(vec![self.quantile(0.5)]);
        }
        Self::new(
            (0..m)
                .map(|i| self.quantile(i as f64 / (m - 1) as f64))
                .collect(),
        )
    }

    /// Fraction of samples in `[lo, hi)`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        let a = self.samples.partition_point(|&x| x < lo);
        let b = self.samples.partition_point(|&x| x < hi);
        (b - a) as f64 / self.n() as f64
    }
}

/// `W_p` between two empirical measures through the quantile coupling. For
/// equal sample counts this is the sorted pairing
/// `((1/n) Σ |x_(i) - y_(i)|^p)^{1/p}`; otherwise the two step quantile
/// functions are integrated exactly over their merged breakpoints.
pub fn wasserstein(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::domain("p", p, "[1, inf)"));
    }
    let (a, b) = (mu.samples(), nu.samples());
    let cost = |d: f64| if p == 1.0 { d } else { d.powf(p) };
    let total = if a.len() == b.len() {
        a.iter()
            .zip(b)
            .map(|(x, y)| cost((x - y).abs()))
            .sum::<f64>()
            / a.len() as f64
    } else {
        let (na, nb) = (a.len() as u128, b.len() as u128);
        // breakpoints i/na and j/nb compared exactly as i·nb vs j·na
        let (mut i, mut j) = (0u128, 0u128);
        let mut last = 0u128;
        let denom = na * nb;
        let mut acc = 0.0;
        while i < na && j < nb {
            let next_a = (i + 1) * nb;
            let next_b = (j + 1) * na;
            let next = next_a.min(next_b);
            let d = (a[i as usize] - b[j as usize]).abs();
            acc += cost(d) * (next - last) as f64;
            last = next;
            if next_a == next {
                i += 1;
            }
            if next_b == next {
                j += 1;
            }
        }
        acc / denom as f64
    };
    Ok(if p == 1.0 { total } else { total.powf(1.0 / p) })
}

/// `Σ_bins |∫_bin p dx - empirical mass|` where `density` holds cell averages
/// on cells of width `dx` starting at `x_min`, aggregated `cells_per_bin` at
/// a time. Empirical mass outside the grid counts fully.
pub fn l1_to_density(
    measure: &EmpiricalMeasure,
    x_min: f64,
    dx: f64,
    density: &[f64],
    cells_per_bin: usize,
) -> f64 {
    let n_bins = density.len() / cells_per_bin;
    let mut l1 = 0.0;
    let mut inside = 0.0;
    for bin in 0..n_bins {
        let lo = x_min + (bin * cells_per_bin) as f64 * dx;
        let hi = lo + cells_per_bin as f64 * dx;
        let model: f64 = density[bin * cells_per_bin..(bin + 1) * cells_per_bin]
            .iter()
            .sum::<f64>()
            * dx;
        let emp = measure.mass_in(lo, hi);
        inside += emp;
        l1 += (model - emp).abs();
    }
    l1 + (1.0 - inside).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// `(t, W₁(law at t, reference))`.
    pub rows: Vec<(f64, f64)>,
    /// `W₁(initial, reference)`.
    pub w1_initial: f64,
    /// Checkpoints used in the fit (those above twice the noise floor).
    pub fitted: Vec<bool>,
    pub fit: LinearFit,
    /// Envelope `W₁(t) ≈ K e^{-ct} W₁(initial)`.
    pub k: f64,
    pub c: f64,
    pub noise_floor: f64,
}

impl DecayReport {
    pub fn envelope(&self, t: f64) -> f64 {
        self.k * (-self.c * t).exp() * self.w1_initial
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,w1")?;
        for (t, w) in &self.rows {
            writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*w))?;
        }
        Ok(())
    }

    pub fn write_fit<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "K,c,R2")?;
        writeln!(
            out,
            "{},{},{}",
            fmt_f64(self.k),
            fmt_f64(self.c),
            fmt_f64(self.fit.r2)
        )
    }
}

/// Evolve `n_paths` points taken cyclically from `initial` and measure
/// `W₁` against the stationary `reference` at each checkpoint.
///
/// Evolution noise uses a seed derived from `noise_cfg.seed` so it is
/// independent of any reference ensemble built from the same configuration.
/// `noise_floor` is the `W₁` between two independent stationary samples;
/// checkpoints with `W₁ <= 2·floor` are reported but excluded from the fit.
#[allow(clippy::too_many_arguments)]
pub fn ergodicity_decay(
    params: &ModelParams,
    noise_cfg: &NoiseConfig,
    initial: &EmpiricalMeasure,
    t_checkpoints: &[f64],
    n_paths: usize,
    reference: &EmpiricalMeasure,
    noise_floor: f64,
    dt: f64,
) -> Result<DecayReport> {
    if t_checkpoints.is_empty() {
        return Err(Error::Invalid("no checkpoints".into()));
    }
    if t_checkpoints.windows(2).any(|w| w[1] <= w[0]) || t_checkpoints[0] < 0.0 {
        return Err(Error::Invalid(
            "checkpoints must be nonnegative and increasing".into(),
        ));
    }
    let last = *t_checkpoints.last().unwrap();
    if !last.is_finite() {
        return Err(Error::OutOfWindow {
            requested_start: 0.0,
            requested_end: last,
            available_start: 0.0,
            available_end: f64::MAX,
        });
    }
    let step_idx: Vec<usize> = t_checkpoints
        .iter()
        .map(|t| (t / dt).round() as usize)
        .collect();
    let total = *step_idx.last().unwrap();
    let cfg = noise_cfg.with_seed(derive_seed(noise_cfg.seed, 0xE4_60D1C));
    let drift = DriftStep::new(params, dt, Scheme::default());

    let per_path: Vec<Vec<f64>> = par_map(n_paths, |i| {
        let src = NoiseSource::new(&cfg, i as u64, dt).expect("validated config");
        let inc = src.increments(0, total.max(1));
        let mut x = initial.samples()[i % initial.n()];
        let mut at = 0usize;
        step_idx
            .iter()
            .map(|&k| {
                x = advance(&drift, x, &inc[at..k]);
                at = k;
                x
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(t_checkpoints.len());
    for (c, &t) in t_checkpoints.iter().enumerate() {
        let law = EmpiricalMeasure::new(per_path.iter().map(|v| v[c]).collect())?;
        rows.push((t, wasserstein(&law, reference, 1.0)?));
    }
    let w1_initial = wasserstein(initial, reference, 1.0)?;
    let fitted: Vec<bool> = rows.iter().map(|&(_, w)| w > 2.0 * noise_floor).collect();
    let (ts, logs): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .zip(&fitted)
        .filter(|(_, &f)| f)
        .map(|(&(t, w), _)| (t, w.ln()))
        .unzip();
    if ts.len() < 2 {
        return Err(Error::Invalid(
            "fewer than two checkpoints above the noise floor".into(),
        ));
    }
    let fit = linear_fit(&ts, &logs);
    Ok(DecayReport {
        rows,
        w1_initial,
        fitted,
        fit,
        k: fit.intercept.exp() / w1_initial,
        c: -fit.slope,
        noise_floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(v: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(v.to_vec()).unwrap()
    }

    #[test]
    fn identical_measures_have_zero_distance() {
        let a = m(&[0.3, -1.0, 2.5, 0.0]);
        for p in [1.0, 2.0, 3.5] {
            assert_eq!(wasserstein(&a, &a, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn point_masses() {
        let a = EmpiricalMeasure::dirac(0.0, 10).unwrap();
        let b = EmpiricalMeasure::dirac(1.0, 10).unwrap();
        for p in [1.0, 1.5, 2.0, 4.0] {
            assert!((wasserstein(&a, &b, p).unwrap() - 1.0).abs() < 1e-15);
        }
        let c = EmpiricalMeasure::dirac(1.0, 7).unwrap();
        assert!((wasserstein(&a, &c, 2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn translation() {
        let a = m(&[0.1, 0.7, -2.0, 5.0, 3.3]);
        let b = m(&a.samples().iter().map(|x| x - 2.25).collect::<Vec<_>>());
        for p in [1.0, 2.0, 3.0] {
            assert!((wasserstein(&a, &b, p).unwrap() - 2.25).abs() < 1e-12);
        }
    }

    #[test]
    fn unequal_sizes_match_replicated_sample() {
        // {0, 1} vs {0, 0.5, 1}: replicate to n = 6
        let a = m(&[0.0, 1.0]);
        let b = m(&[0.0, 0.5, 1.0]);
        let a6 = m(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b6 = m(&[0.0, 0.0, 0.5, 0.5, 1.0, 1.0]);
        for p in [1.0, 2.0] {
            let direct = wasserstein(&a, &b, p).unwrap();
            let rep = wasserstein(&a6, &b6, p).unwrap();
            assert!((direct - rep).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let a = m(&[0.0]);
        assert!(wasserstein(&a, &a, 0.5).is_err());
        assert!(EmpiricalMeasure::new(vec![]).is_err());
        assert!(EmpiricalMeasure::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn resample_to_own_size_is_identity() {
        let a = m(&[3.0, -1.0, 0.25, 7.5, 2.0, 2.0, -4.0]);
        let r = a.resample(a.n()).unwrap();
        for (x, y) in a.samples().iter().zip(r.samples()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn l1_against_uniform_density() {
        let dens = vec![0.5; 8]; // uniform on [-1, 1], dx = 0.25
        let samples: Vec<f64> = (0..1000).map(|i| -1.0 + (i as f64 + 0.5) / 500.0).collect();
        let l1 = l1_to_density(&m(&samples), -1.0, 0.25, &dens, 2);
        assert!(l1 < 1e-12, "{l1}");
        let far = l1_to_density(&m(&[5.0]), -1.0, 0.25, &dens, 2);
        assert!((far - 2.0).abs() < 1e-12);
    }

    fn sample_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 12)
    }

    proptest! {
        #[test]
        fn symmetric_and_triangle(a in sample_vec(), b in sample_vec(), c in sample_vec(), p in 1.0f64..4.0) {
            let (a, b, c) = (m(&a), m(&b), m(&c));
            let ab = wasserstein(&a, &b, p).unwrap();
            prop_assert_eq!(ab, wasserstein(&b, &a, p).unwrap());
            let ac = wasserstein(&a, &c, p).unwrap();
            let cb = wasserstein(&c, &b, p).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn monotone_in_p(a in sample_vec(), b in sample_vec(), p in 1.0f64..3.0, dq in 0.0f64..3.0) {
            let (a, b) = (m(&a), m(&b));
            prop_assert!(wasserstein(&a, &b, p).unwrap() <= wasserstein(&a, &b, p + dq).unwrap() + 1e-12);
        }
    }
}
