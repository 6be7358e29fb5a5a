//! Rotationally invariant Lévy noise in one dimension.
//!
//! Two regimes are supported:
//!
//! * [`NoiseMode::NonTruncated`]: the symmetric α-stable process with
//!   `E exp(iuL_t) = exp(-t|u|^α)`, sampled exactly with the
//!   Chambers–Mallows–Stuck transform.
//! * [`NoiseMode::Truncated`]: the compensated small-jump part only, Lévy
//!   measure `c_α|z|^{-1-α}dz` restricted to `|z| < 1`. Jumps with
//!   `cutoff <= |z| < 1` are simulated exactly as a compound Poisson process;
//!   the remaining jumps are replaced by a centered Gaussian with the same
//!   variance. The compensator of the symmetric small jumps vanishes.
//!
//! All increments are scaled by the noise intensity `sigma`.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::ensemble::par_map;
use crate::error::{Error, Result};
use crate::rng::{block_stream, StreamRng};
use crate::stats::{binomial_ci95, fmt_f64};

/// Steps per counter block of a two-sided realization.
pub const BLOCK_LEN: usize = 1024;

/// Normalizing constant of the one-dimensional fractional Laplacian,
/// `c_α = α 2^{α-1} Γ((1+α)/2) / (π^{1/2} Γ(1-α/2))`, so that
/// `∫(1 - cos(uz)) c_α |z|^{-1-α} dz = |u|^α`.
pub fn c_alpha(alpha: f64) -> f64 {
    alpha * 2f64.powf(alpha - 1.0) * libm::tgamma((1.0 + alpha) / 2.0)
        / (PI.sqrt() * libm::tgamma(1.0 - alpha / 2.0))
}

/// `∫_{|z|<1} z² ν_α(dz) = 2c_α/(2-α)`: variance per unit time of the
/// truncated process at unit intensity.
pub fn truncated_variance(alpha: f64) -> f64 {
    2.0 * c_alpha(alpha) / (2.0 - alpha)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::domain("alpha", alpha, "(1, 2)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    NonTruncated,
    Truncated,
}

impl NoiseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseMode::NonTruncated => "non-truncated",
            NoiseMode::Truncated => "truncated",
        }
    }
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "non-truncated" | "nontruncated" | "stable" => Ok(NoiseMode::NonTruncated),
            "truncated" => Ok(NoiseMode::Truncated),
            other => Err(Error::Invalid(format!(
                "unknown noise mode `{other}` (expected `truncated` or `non-truncated`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub alpha: f64,
    pub sigma: f64,
    pub mode: NoiseMode,
    /// Threshold below which truncated-mode jumps are replaced by a Gaussian.
    pub small_jump_cutoff: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub const DEFAULT_CUTOFF: f64 = 0.01;

    pub fn new(alpha: f64, sigma: f64, mode: NoiseMode, seed: u64) -> Result<Self> {
        let cfg = NoiseConfig {
            alpha,
            sigma,
            mode,
            small_jump_cutoff: Self::DEFAULT_CUTOFF,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Result<Self> {
        self.small_jump_cutoff = cutoff;
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain("sigma", self.sigma, "[0, inf)"));
        }
        if !(self.small_jump_cutoff > 0.0 && self.small_jump_cutoff < 1.0) {
            return Err(Error::domain(
                "small_jump_cutoff",
                self.small_jump_cutoff,
                "(0, 1)",
            ));
        }
        Ok(())
    }
}

/// Uniform discretization of a time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::EmptyPath);
        }
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::Invalid(format!(
                "time grid needs t_end > t_start, got [{t_start}, {t_end}]"
            )));
        }
        Ok(TimeGrid {
            t_start,
            t_end,
            n_steps,
            dt: (t_end - t_start) / n_steps as f64,
        })
    }

    /// Grid whose nodes are the integer multiples `k·dt`, `k = first..=first+n_steps`.
    pub fn from_steps(first: i64, n_steps: usize, dt: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::EmptyPath);
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain("dt", dt, "(0, inf)"));
        }
        Ok(TimeGrid {
            t_start: first as f64 * dt,
            t_end: (first + n_steps as i64) as f64 * dt,
            n_steps,
            dt,
        })
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    /// Index of the node closest to `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.t_start) / self.dt).round();
        if k >= 0.0 && k <= self.n_steps as f64 {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Index of the first grid step in the global integer step lattice.
    pub fn first_step(&self) -> i64 {
        (self.t_start / self.dt).round() as i64
    }
}

/// A realization of the (σ-scaled) noise on a grid, anchored at `L = 0` at
/// the grid start.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub grid: TimeGrid,
    pub increments: Vec<f64>,
    pub config: NoiseConfig,
    /// Largest single jump magnitude before σ scaling (truncated mode only).
    pub max_jump: Option<f64>,
}

impl NoisePath {
    /// Values of `L` at the grid nodes (length `n_steps + 1`, first entry 0).
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for &d in &self.increments {
            acc += d;
            out.push(acc);
        }
        out
    }

    /// Sub-window of steps `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> Result<NoisePath> {
        if from >= to || to > self.increments.len() {
            return Err(Error::OutOfWindow {
                requested_start: self.grid.time(from.min(self.grid.n_steps)),
                requested_end: self.grid.t_start + to as f64 * self.grid.dt,
                available_start: self.grid.t_start,
                available_end: self.grid.t_end,
            });
        }
        Ok(NoisePath {
            grid: TimeGrid {
                t_start: self.grid.time(from),
                t_end: self.grid.time(to),
                n_steps: to - from,
                dt: self.grid.dt,
            },
            increments: self.increments[from..to].to_vec(),
            config: self.config,
            max_jump: self.max_jump,
        })
    }

    /// CSV with header `t,dL`; `t` is the left end of each step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,dL")?;
        for (i, d) in self.increments.iter().enumerate() {
            writeln!(out, "{},{}", fmt_f64(self.grid.time(i)), fmt_f64(*d))?;
        }
        Ok(())
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Unit-time symmetric α-stable draw (Chambers–Mallows–Stuck), characteristic
/// function `exp(-|u|^α)`.
pub(crate) fn stable_unit<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (open_unit(rng) - 0.5);
    let w: f64 = Exp1.sample(rng);
    let w = w.max(f64::MIN_POSITIVE);
    let head = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let tail = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    head * tail
}

/// One increment `L_{t+dt} - L_t` of the symmetric α-stable process.
pub fn sample_stable_increment<R: Rng + ?Sized>(alpha: f64, dt: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::domain("dt", dt, "[0, inf)"));
    }
    if dt == 0.0 {
        return Ok(0.0);
    }
    Ok(dt.powf(1.0 / alpha) * stable_unit(alpha, rng))
}

/// Stateful per-step increment generator; the compound Poisson clock of the
/// truncated mode carries over between steps.
#[derive(Debug, Clone)]
pub(crate) struct StepSampler {
    alpha: f64,
    sigma: f64,
    mode: NoiseMode,
    stable_scale: f64,
    gauss_sd: f64,
    rate: f64,
    band_low: f64,
    dt: f64,
    step: u64,
    next_arrival: f64,
    pub max_jump: f64,
}

impl StepSampler {
    pub fn new(config: &NoiseConfig, dt: f64) -> Self {
        let alpha = config.alpha;
        let eps = config.small_jump_cutoff;
        let c = c_alpha(alpha);
        StepSampler {
            alpha,
            sigma: config.sigma,
            mode: config.mode,
            stable_scale: dt.powf(1.0 / alpha),
            gauss_sd: (dt * 2.0 * c * eps.powf(2.0 - alpha) / (2.0 - alpha)).sqrt(),
            rate: 2.0 * c * (eps.powf(-alpha) - 1.0) / alpha,
            band_low: eps.powf(-alpha),
            dt,
            step: 0,
            next_arrival: f64::INFINITY,
            max_jump: 0.0,
        }
    }

    /// Restart the Poisson clock at the current position.
    pub fn restart<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.step = 0;
        if self.mode == NoiseMode::Truncated {
            let e: f64 = Exp1.sample(rng);
            self.next_arrival = e / self.rate;
        }
    }

    fn band_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // inverse CDF of |z|^{-1-α} on [cutoff, 1)
        let u = rng.random::<f64>();
        let mut z = (self.band_low - u * (self.band_low - 1.0)).powf(-1.0 / self.alpha);
        if z >= 1.0 {
            z = 1.0 - f64::EPSILON / 2.0;
        }
        if rng.random::<bool>() {
            z
        } else {
            -z
        }
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let unit = match self.mode {
            NoiseMode::NonTruncated => self.stable_scale * stable_unit(self.alpha, rng),
            NoiseMode::Truncated => {
                let g: f64 = StandardNormal.sample(rng);
                let mut inc = self.gauss_sd * g;
                let step_end = (self.step + 1) as f64 * self.dt;
                while self.next_arrival < step_end {
                    let z = self.band_jump(rng);
                    self.max_jump = self.max_jump.max(z.abs());
                    inc += z;
                    let e: f64 = Exp1.sample(rng);
                    self.next_arrival += e / self.rate;
                }
                inc
            }
        };
        self.step += 1;
        self.sigma * unit
    }

    pub fn max_jump(&self) -> Option<f64> {
        (self.mode == NoiseMode::Truncated).then_some(self.max_jump)
    }
}

/// Sample a path on `grid` from a single random stream.
pub fn sample_path<R: Rng + ?Sized>(
    config: &NoiseConfig,
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<NoisePath> {
    config.validate()?;
    if grid.n_steps == 0 {
        return Err(Error::EmptyPath);
    }
    let mut sampler = StepSampler::new(config, grid.dt);
    sampler.restart(rng);
    let increments = (0..grid.n_steps).map(|_| sampler.next(rng)).collect();
    Ok(NoisePath {
        grid: *grid,
        increments,
        config: *config,
        max_jump: sampler.max_jump(),
    })
}

/// The path seen from time `t_start + k·dt`: the time axis is relabeled so
/// that the increment at new time `t` is the old increment at `t + k·dt`.
pub fn shift_path(path: &NoisePath, k_steps: i64) -> Result<NoisePath> {
    if k_steps.unsigned_abs() as usize > path.grid.n_steps {
        let shift = k_steps as f64 * path.grid.dt;
        return Err(Error::OutOfWindow {
            requested_start: path.grid.t_start + shift,
            requested_end: path.grid.t_end + shift,
            available_start: path.grid.t_start,
            available_end: path.grid.t_end,
        });
    }
    let shift = k_steps as f64 * path.grid.dt;
    let mut out = path.clone();
    out.grid.t_start -= shift;
    out.grid.t_end -= shift;
    Ok(out)
}

/// A two-sided noise realization `ω` addressed by integer step index.
///
/// Step `k` covers `[k·dt, (k+1)·dt)`. Steps are grouped in blocks of
/// [`BLOCK_LEN`]; each block draws from its own counter-based stream, so any
/// window can be regenerated independently and extending a window backwards
/// reproduces the increments already seen.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    config: NoiseConfig,
    path_id: u64,
    dt: f64,
}

impl NoiseSource {
    pub fn new(config: &NoiseConfig, path_id: u64, dt: f64) -> Result<Self> {
        config.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain("dt", dt, "(0, inf)"));
        }
        Ok(NoiseSource {
            config: *config,
            path_id,
            dt,
        })
    }

    pub fn config(&self) -> &NoiseConfig {
        &self.config
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn fill_block(&self, block: i64, out: &mut Vec<f64>, max_jump: &mut f64) {
        let mut rng: StreamRng = block_stream(self.config.seed, self.path_id, block);
        let mut sampler = StepSampler::new(&self.config, self.dt);
        sampler.restart(&mut rng);
        out.clear();
        out.extend((0..BLOCK_LEN).map(|_| sampler.next(&mut rng)));
        *max_jump = max_jump.max(sampler.max_jump);
    }

    /// Increments of steps `first .. first + n`, plus the largest unscaled
    /// jump seen in the touched blocks.
    pub fn increments_with_max(&self, first: i64, n: usize) -> (Vec<f64>, f64) {
        let mut out = Vec::with_capacity(n);
        let mut buf = Vec::with_capacity(BLOCK_LEN);
        let mut max_jump = 0.0;
        let last = first + n as i64;
        let mut block = first.div_euclid(BLOCK_LEN as i64);
        while out.len() < n {
            self.fill_block(block, &mut buf, &mut max_jump);
            let block_start = block * BLOCK_LEN as i64;
            let lo = (first.max(block_start) - block_start) as usize;
            let hi = (last.min(block_start + BLOCK_LEN as i64) - block_start) as usize;
            out.extend_from_slice(&buf[lo..hi]);
            block += 1;
        }
        (out, max_jump)
    }

    pub fn increments(&self, first: i64, n: usize) -> Vec<f64> {
        self.increments_with_max(first, n).0
    }

    /// The realization restricted to steps `first .. first + n`.
    pub fn window(&self, first: i64, n: usize) -> Result<NoisePath> {
        let grid = TimeGrid::from_steps(first, n, self.dt)?;
        let (increments, max_jump) = self.increments_with_max(first, n);
        Ok(NoisePath {
            grid,
            increments,
            config: self.config,
            max_jump: (self.config.mode == NoiseMode::Truncated).then_some(max_jump),
        })
    }
}

/// Monte Carlo estimate with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    pub ci_halfwidth: f64,
}

/// Steps per path used by [`small_ball_probability`] (so `dt = 10⁻³·T`).
pub const SMALL_BALL_STEPS: usize = 1000;

/// `P(sup_{0<=t<=T} |σL_t| < ε)` over the discrete grid `dt = T/1000`.
pub fn small_ball_probability(
    config: &NoiseConfig,
    horizon: f64,
    epsilon: f64,
    n_paths: usize,
) -> Result<Estimate> {
    config.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::domain("T", horizon, "(0, inf)"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::domain("epsilon", epsilon, "(0, inf)"));
    }
    if n_paths < 1000 {
        return Err(Error::domain("n_paths", n_paths as f64, "[1000, inf)"));
    }
    let dt = horizon / SMALL_BALL_STEPS as f64;
    let inside = par_map(n_paths, |path_id| {
        let mut rng = block_stream(config.seed, path_id as u64, 0);
        let mut sampler = StepSampler::new(config, dt);
        sampler.restart(&mut rng);
        let mut level = 0.0f64;
        for _ in 0..SMALL_BALL_STEPS {
            level += sampler.next(&mut rng);
            if level.abs() >= epsilon {
                return false;
            }
        }
        true
    });
    let hits = inside.iter().filter(|&&b| b).count();
    let (estimate, ci_halfwidth) = binomial_ci95(hits, n_paths);
    Ok(Estimate {
        estimate,
        ci_halfwidth,
    })
}
