//! Pullback attractor, random equilibrium and vicinity events.
//!
//! The scheme preserves order exactly, so the image of an interval is the
//! interval spanned by the images of its endpoints. Integrating both
//! endpoints from `-T` to `0` on the same noise therefore brackets the
//! attractor `{a(ω)}`; when the bracket is narrower than the tolerance its
//! midpoint is a sample of the random equilibrium.

use std::io::Write;

use crate::ensemble::par_map;
use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::noise::{Estimate, NoiseConfig, NoisePath, NoiseSource};
use crate::sde::{DriftStep, ModelParams, Scheme, Trajectory};
use crate::stats::{binomial_ci95, fmt_f64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullbackResult {
    pub pullback_horizon: f64,
    pub endpoints_at_zero: (f64, f64),
    pub diameter: f64,
    pub equilibrium_estimate: f64,
    pub collapsed: bool,
}

/// Settings for pullback runs on a [`NoiseSource`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullbackOptions {
    /// First horizon tried.
    pub horizon: f64,
    /// Horizon doubling stops here; a run that has not collapsed is reported
    /// with `collapsed = false`.
    pub max_horizon: f64,
    pub tol: f64,
    pub interval: (f64, f64),
    pub dt: f64,
}

impl Default for PullbackOptions {
    fn default() -> Self {
        PullbackOptions {
            horizon: 50.0,
            max_horizon: 800.0,
            tol: 1e-8,
            interval: (-10.0, 10.0),
            dt: 1e-3,
        }
    }
}

impl PullbackOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.interval.0 < self.interval.1) {
            return Err(Error::Invalid(format!(
                "degenerate initial interval [{}, {}]",
                self.interval.0, self.interval.1
            )));
        }
        if !(self.horizon > 0.0 && self.max_horizon >= self.horizon) {
            return Err(Error::domain("horizon", self.horizon, "(0, max_horizon]"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain("tol", self.tol, "(0, inf)"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::domain("dt", self.dt, "(0, inf)"));
        }
        Ok(())
    }
}

/// Push the bracket `(lo, hi)` through the increments. Once the endpoints
/// coincide bitwise they stay equal, so only one of them is advanced.
fn push_bracket(step: &DriftStep, mut lo: f64, mut hi: f64, increments: &[f64]) -> (f64, f64) {
    let mut it = increments.iter();
    for &d in it.by_ref() {
        lo = step.apply(lo) + d;
        hi = step.apply(hi) + d;
        if lo == hi {
            break;
        }
    }
    if lo == hi {
        for &d in it {
            lo = step.apply(lo) + d;
        }
        hi = lo;
    }
    (lo, hi)
}

fn result(horizon: f64, lo: f64, hi: f64, tol: f64) -> PullbackResult {
    let diameter = (hi - lo).abs();
    PullbackResult {
        pullback_horizon: horizon,
        endpoints_at_zero: (lo, hi),
        diameter,
        equilibrium_estimate: 0.5 * (lo + hi),
        collapsed: diameter < tol,
    }
}

/// Pull the interval back from `-T` to `0` along a recorded window.
pub fn pullback_attractor(
    params: &ModelParams,
    noise: &NoisePath,
    horizon: f64,
    interval: (f64, f64),
    tol: f64,
) -> Result<PullbackResult> {
    if !(interval.0 < interval.1) {
        return Err(Error::Invalid(
            "initial interval must be nondegenerate".into(),
        ));
    }
    if params.sigma != noise.config.sigma {
        return Err(Error::GridMismatch("model and noise sigma differ".into()));
    }
    let grid = &noise.grid;
    let (start, end) = match (grid.index_of(-horizon), grid.index_of(0.0)) {
        (Some(s), Some(e)) if s < e && (grid.time(s) + horizon).abs() < 0.5 * grid.dt => (s, e),
        _ => {
            return Err(Error::OutOfWindow {
                requested_start: -horizon,
                requested_end: 0.0,
                available_start: grid.t_start,
                available_end: grid.t_end,
            })
        }
    };
    let step = DriftStep::new(params, grid.dt, Scheme::default());
    let (lo, hi) = push_bracket(&step, interval.0, interval.1, &noise.increments[start..end]);
    Ok(result(horizon, lo, hi, tol))
}

/// Pullback on a two-sided realization, doubling the horizon until the
/// bracket collapses or `max_horizon` is exceeded.
pub fn pullback_on_source(
    params: &ModelParams,
    source: &NoiseSource,
    opts: &PullbackOptions,
) -> Result<PullbackResult> {
    opts.validate()?;
    if params.sigma != source.config().sigma {
        return Err(Error::GridMismatch("model and noise sigma differ".into()));
    }
    let step = DriftStep::new(params, opts.dt, Scheme::default());
    let mut horizon = opts.horizon;
    // increments on [-horizon, 0], extended backwards on each doubling
    let mut inc: Vec<f64> = Vec::new();
    loop {
        let n = (horizon / opts.dt).round() as usize;
        if n > inc.len() {
            let mut older = source.increments(-(n as i64), n - inc.len());
            older.extend_from_slice(&inc);
            inc = older;
        }
        let (lo, hi) = push_bracket(&step, opts.interval.0, opts.interval.1, &inc);
        let res = result(horizon, lo, hi, opts.tol);
        if res.collapsed || 2.0 * horizon > opts.max_horizon {
            return Ok(res);
        }
        horizon *= 2.0;
    }
}

/// The random equilibrium `a(θ_t ω)` on `[0, t_forward]`, obtained from a
/// collapsed pullback and continued forward on the same realization.
pub fn equilibrium_trajectory(
    params: &ModelParams,
    source: &NoiseSource,
    opts: &PullbackOptions,
    t_forward: f64,
) -> Result<(PullbackResult, Trajectory)> {
    let pb = pullback_on_source(params, source, opts)?;
    if !pb.collapsed {
        return Err(Error::NotCollapsed {
            diameter: pb.diameter,
            horizon: pb.pullback_horizon,
        });
    }
    let n = ((t_forward / opts.dt).round() as usize).max(1);
    let window = source.window(0, n)?;
    let traj = crate::sde::integrate(params, &window, pb.equilibrium_estimate)?;
    Ok((pb, traj))
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 1000 {
        return Err(Error::domain("n_paths", n_paths as f64, "[1000, inf)"));
    }
    Ok(())
}

/// One pullback per path id `0..n_paths`.
pub fn pullback_ensemble(
    params: &ModelParams,
    noise_cfg: &NoiseConfig,
    opts: &PullbackOptions,
    n_paths: usize,
) -> Result<Vec<PullbackResult>> {
    noise_cfg.validate()?;
    opts.validate()?;
    par_map(n_paths, |i| {
        let src = NoiseSource::new(noise_cfg, i as u64, opts.dt)?;
        pullback_on_source(params, &src, opts)
    })
    .into_iter()
    .collect()
}

/// Empirical law of `a(ω)` over independent realizations. Runs that fail to
/// collapse are an error rather than a silently biased sample.
pub fn equilibrium_ensemble(
    params: &ModelParams,
    noise_cfg: &NoiseConfig,
    opts: &PullbackOptions,
    n_paths: usize,
) -> Result<EmpiricalMeasure> {
    check_paths(n_paths)?;
    let runs = pullback_ensemble(params, noise_cfg, opts, n_paths)?;
    if let Some(bad) = runs.iter().find(|r| !r.collapsed) {
        return Err(Error::NotCollapsed {
            diameter: bad.diameter,
            horizon: bad.pullback_horizon,
        });
    }
    EmpiricalMeasure::new(runs.iter().map(|r| r.equilibrium_estimate).collect())
}

/// CSV `path_id,equilibrium,diameter,collapsed`.
pub fn write_ensemble_csv<W: Write>(runs: &[PullbackResult], mut out: W) -> std::io::Result<()> {
    writeln!(out, "path_id,equilibrium,diameter,collapsed")?;
    for (i, r) in runs.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            i,
            fmt_f64(r.equilibrium_estimate),
            fmt_f64(r.diameter),
            r.collapsed
        )?;
    }
    Ok(())
}

/// `P(|a(θ_s ω)| < ε for all grid times s in [0, T])`.
pub fn vicinity_probability(
    params: &ModelParams,
    noise_cfg: &NoiseConfig,
    epsilon: f64,
    horizon: f64,
    n_paths: usize,
    opts: &PullbackOptions,
) -> Result<Estimate> {
    if !(epsilon > 0.0) {
        return Err(Error::domain("epsilon", epsilon, "(0, inf)"));
    }
    if !(horizon > 0.0) {
        return Err(Error::domain("T", horizon, "(0, inf)"));
    }
    check_paths(n_paths)?;
    let inside: Vec<bool> = par_map(n_paths, |i| {
        let src = NoiseSource::new(noise_cfg, i as u64, opts.dt)?;
        let (_, traj) = equilibrium_trajectory(params, &src, opts, horizon)?;
        Ok::<_, Error>(traj.states.iter().all(|a| a.abs() < epsilon))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let hits = inside.iter().filter(|&&b| b).count();
    let (estimate, ci_halfwidth) = binomial_ci95(hits, n_paths);
    Ok(Estimate {
        estimate,
        ci_halfwidth,
    })
}

/// Largest `|φ(t, ω, a(ω) + δ) - a(θ_t ω)|` over `t in [1, t_max]` and the
/// sampled realizations.
pub fn max_offset_gap(
    params: &ModelParams,
    noise_cfg: &NoiseConfig,
    delta: f64,
    t_max: f64,
    n_paths: usize,
    opts: &PullbackOptions,
) -> Result<f64> {
    let gaps: Vec<f64> = par_map(n_paths, |i| {
        let src = NoiseSource::new(noise_cfg, i as u64, opts.dt)?;
        let (pb, traj) = equilibrium_trajectory(params, &src, opts, t_max)?;
        let window = src.window(0, traj.grid.n_steps)?;
        let offset = crate::sde::integrate(params, &window, pb.equilibrium_estimate + delta)?;
        let from = traj.grid.index_of(1.0).unwrap_or(0);
        Ok::<_, Error>(
            traj.states[from..]
                .iter()
                .zip(&offset.states[from..])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}
