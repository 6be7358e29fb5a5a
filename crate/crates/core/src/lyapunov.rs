//! Asymptotic and finite-time Lyapunov exponents along the random
//! equilibrium, and an empirical probe of the dichotomy spectrum.

use std::io::Write;

use crate::attractor::{equilibrium_trajectory, pullback_on_source, PullbackOptions};
use crate::ensemble::par_map;
use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::noise::{NoiseConfig, NoiseMode, NoiseSource};
use crate::sde::{DriftStep, ModelParams, Scheme, Trajectory};
use crate::stats::{batch_means, binomial_ci95, fmt_f64};

/// Initial stretch of the equilibrium trajectory dropped before averaging.
pub const BURN_IN: f64 = 10.0;
const N_BATCHES: usize = 20;
// Integration proceeds in chunks of this many steps to bound memory.
const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtleSample {
    pub t: f64,
    pub value: f64,
    pub omega_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Batch-mean estimates `(mean, stderr)` over each half of the window.
    pub halves: [(f64, f64); 2],
    /// Set for non-truncated noise, where the long-run average is only
    /// descriptive.
    pub finite_time_only: bool,
}

/// Time average of `b'(a(θ_s ω))` over `[BURN_IN, BURN_IN + T]` along one
/// equilibrium trajectory (realization `path_id = 0`).
pub fn asymptotic_lyapunov(
    params: &ModelParams,
    noise_cfg: &NoiseConfig,
    horizon: f64,
    opts: &PullbackOptions,
) -> Result<AsymptoticEstimate> {
    noise_cfg.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::domain("T", horizon, "(0, inf)"));
    }
    let src = NoiseSource::new(noise_cfg, 0, opts.dt)?;
    let pb = pullback_on_source(params, &src, opts)?;
    if !pb.collapsed {
        return Err(Error::NotCollapsed {
            diameter: pb.diameter,
            horizon: pb.pullback_horizon,
        });
    }
    let dt = opts.dt;
    let burn = (BURN_IN / dt).round() as usize;
    let n = (horizon / dt).round() as usize;
    let per_batch = n / (2 * N_BATCHES);
    if per_batch == 0 {
        return Err(Error::domain("T", horizon, "at least 40 time steps"));
    }
    let n = per_batch * 2 * N_BATCHES;

    let step = DriftStep::new(params, dt, Scheme::default());
    let mut x = pb.equilibrium_estimate;
    let mut first: i64 = 0;
    let mut remaining = burn;
    while remaining > 0 {
        let m = remaining.min(CHUNK);
        for d in src.increments(first, m) {
            x = step.apply(x) + d;
        }
        first += m as i64;
        remaining -= m;
    }

    // Trapezoid per step, summed into batches of equal duration.
    let mut batch_avgs = Vec::with_capacity(2 * N_BATCHES);
    let mut acc = 0.0;
    let mut in_batch = 0;
    let mut prev = params.drift_derivative(x);
    let mut remaining = n;
    while remaining > 0 {
        let m = remaining.min(CHUNK);
        for d in src.increments(first, m) {
            x = step.apply(x) + d;
            let cur = params.drift_derivative(x);
            acc += 0.5 * (prev + cur);
            prev = cur;
            in_batch += 1;
            if in_batch == per_batch {
                batch_avgs.push(acc / per_batch as f64);
                acc = 0.0;
                in_batch = 0;
            }
        }
        first += m as i64;
        remaining -= m;
    }
    if !x.is_finite() {
        return Err(Error::Invalid(
            "equilibrium trajectory left the reals".into(),
        ));
    }
    let (estimate, stderr) = batch_means(&batch_avgs, 2 * N_BATCHES);
    let h1 = batch_means(&batch_avgs[..N_BATCHES], N_BATCHES);
    let h2 = batch_means(&batch_avgs[N_BATCHES..], N_BATCHES);
    Ok(AsymptoticEstimate {
        estimate,
        stderr,
        halves: [h1, h2],
        finite_time_only: noise_cfg.mode == NoiseMode::NonTruncated,
    })
}

/// `λ^{T,ω} = (1/T) ∫_0^T b'(a(θ_s ω)) ds` along an equilibrium trajectory
/// starting at time 0.
pub fn finite_time_lyapunov(
    params: &ModelParams,
    equilibrium: &Trajectory,
    horizon: f64,
) -> Result<FtleSample> {
    if !(horizon > 0.0) {
        return Err(Error::domain("T", horizon, "(0, inf)"));
    }
    let grid = &equilibrium.grid;
    let end = match (grid.index_of(0.0), grid.index_of(horizon)) {
        (Some(0), Some(e)) if (grid.time(e) - horizon).abs() < 0.5 * grid.dt => e,
        _ => {
            return Err(Error::OutOfWindow {
                requested_start: 0.0,
                requested_end: horizon,
                available_start: grid.t_start,
                available_end: grid.t_end,
            })
        }
    };
    let s = &equilibrium.states[..=end];
    let mut acc = 0.0;
    for w in s.windows(2) {
        acc += params.drift_derivative(w[0]) + params.drift_derivative(w[1]);
    }
    let t = end as f64 * grid.dt;
    Ok(FtleSample {
        t: horizon,
        value: 0.5 * grid.dt * acc / t,
        omega_id: 0,
    })
}

#[derive(Debug, Clone)]
pub struct FtleDistribution {
    pub samples: Vec<FtleSample>,
    pub measure: EmpiricalMeasure,
    pub p_positive: f64,
    pub ci: f64,
}

impl FtleDistribution {
    /// CSV `omega_id,T,lambda`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "omega_id,T,lambda")?;
        for s in &self.samples {
            writeln!(out, "{},{},{}", s.omega_id, fmt_f64(s.t), fmt_f64(s.value))?;
        }
        Ok(())
    }
}

/// Finite-time rates at each horizon in `t_list` for realization `id`.
fn rates_for_path(
    params: &ModelParams,
    noise_cfg: &NoiseConfig,
    opts: &PullbackOptions,
    id: u64,
    t_list: &[f64],
) -> Result<Vec<f64>> {
    let src = NoiseSource::new(noise_cfg, id, opts.dt)?;
    let t_max = t_list.iter().copied().fold(0.0, f64::max);
    let (_, traj) = equilibrium_trajectory(params, &src, opts, t_max)?;
    t_list
        .iter()
        .map(|&t| finite_time_lyapunov(params, &traj, t).map(|s| s.value))
        .collect()
}

/// FTLE over realizations `0..n_paths`.
pub fn ftle_distribution(
    params: &ModelParams,
    noise_cfg: &NoiseConfig,
    horizon: f64,
    n_paths: usize,
    opts: &PullbackOptions,
) -> Result<FtleDistribution> {
    noise_cfg.validate()?;
    if n_paths < 1000 {
        return Err(Error::domain("n_paths", n_paths as f64, "[1000, inf)"));
    }
    if !(horizon > 0.0) {
        return Err(Error::domain("T", horizon, "(0, inf)"));
    }
    let samples: Vec<FtleSample> = par_map(n_paths, |i| {
        rates_for_path(params, noise_cfg, opts, i as u64, &[horizon]).map(|v| FtleSample {
            t: horizon,
            value: v[0],
            omega_id: i as u64,
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let hits = samples.iter().filter(|s| s.value > 0.0).count();
    let (p_positive, ci) = binomial_ci95(hits, n_paths);
    let measure = EmpiricalMeasure::new(samples.iter().map(|s| s.value).collect())?;
    Ok(FtleDistribution {
        samples,
        measure,
        p_positive,
        ci,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub t: f64,
    pub rate_min: f64,
    pub rate_max: f64,
    pub n_paths: usize,
}

/// Envelopes of finite-time rates. `rates[i][j]` is the rate of realization
/// `i` at horizon `t_list[j]`; the sample sets for smaller `n` are prefixes of
/// the larger ones.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub t_list: Vec<f64>,
    pub rates: Vec<Vec<f64>>,
}

impl SpectrumReport {
    /// Envelope over the first `n` realizations at horizon index `j`.
    pub fn envelope(&self, j: usize, n: usize) -> SpectrumRow {
        let n = n.min(self.rates.len());
        let (lo, hi) = self.rates[..n]
            .iter()
            .map(|r| r[j])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        SpectrumRow {
            t: self.t_list[j],
            rate_min: lo,
            rate_max: hi,
            n_paths: n,
        }
    }

    /// Median over the disjoint blocks of `n` realizations of each block's
    /// minimum rate at horizon index `j`: the typical sample minimum at size
    /// `n`, which a single prefix only estimates with one draw.
    pub fn typical_min(&self, j: usize, n: usize) -> f64 {
        let n = n.clamp(1, self.rates.len());
        let mut mins: Vec<f64> = self
            .rates
            .chunks_exact(n)
            .map(|block| block.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
            .collect();
        mins.sort_by(f64::total_cmp);
        mins[mins.len() / 2]
    }

    /// Rows for every horizon at nested sample sizes `1000, 10000, ...` and
    /// the full ensemble.
    pub fn rows(&self) -> Vec<SpectrumRow> {
        let total = self.rates.len();
        let mut sizes = Vec::new();
        let mut n = 1000;
        while n < total {
            sizes.push(n);
            n *= 10;
        }
        sizes.push(total);
        let mut out = Vec::new();
        for j in 0..self.t_list.len() {
            for &n in &sizes {
                out.push(self.envelope(j, n));
            }
        }
        out
    }

    /// CSV `T,rate_min,rate_max,n_paths`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "T,rate_min,rate_max,n_paths")?;
        for r in self.rows() {
            writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(r.t),
                fmt_f64(r.rate_min),
                fmt_f64(r.rate_max),
                r.n_paths
            )?;
        }
        Ok(())
    }
}

pub fn dichotomy_spectrum_probe(
    params: &ModelParams,
    noise_cfg: &NoiseConfig,
    t_list: &[f64],
    n_paths: usize,
    opts: &PullbackOptions,
) -> Result<SpectrumReport> {
    noise_cfg.validate()?;
    if t_list.is_empty() {
        return Err(Error::Invalid("T_list is empty".into()));
    }
    if t_list[0] <= 0.0 || t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid(
            "T_list must be positive and increasing".into(),
        ));
    }
    if n_paths == 0 {
        return Err(Error::domain("n_paths", 0.0, "[1, inf)"));
    }
    let rates = par_map(n_paths, |i| {
        rates_for_path(params, noise_cfg, opts, i as u64, t_list)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(SpectrumReport {
        t_list: t_list.to_vec(),
        rates,
    })
}
