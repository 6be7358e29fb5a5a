//! Stationary fractional Fokker–Planck equation for the pitchfork model.
//!
//! The grid is cell centered, `x_i = -L + (i + 1/2) dx` with `dx = 2L/n`, so
//! it is symmetric about the origin. The drift term `-(bp)'` uses a
//! conservative upwind flux with closed outer faces. The jump term is
//!
//! * non-truncated: the Fourier multiplier `-|σk|^α` on the periodic
//!   extension of the grid;
//! * truncated: positive hat-function quadrature of the pushforward kernel
//!   `c_α σ^α |y|^{-1-α}` on `|y| < σ`, with jumps leaving the domain
//!   suppressed.
//!
//! The steady state is reached by backward Euler steps in pseudo-time from a
//! Gaussian, until `‖𝓛*p‖₁ < tol`.

mod jump;
mod linalg;
mod spectral;

use std::io::Write;

pub use jump::{discrete_symbol, kernel_weights};
pub use linalg::{gmres, BandLu, BandMatrix};
pub use spectral::{fractional_laplacian, truncated_symbol, wavenumber, Multiplier};

use crate::error::{Error, Result};
use crate::noise::{c_alpha, NoiseConfig, NoiseMode};
use crate::sde::ModelParams;
use crate::stats::{fmt_f64, linear_fit, LinearFit};

/// Floor applied before taking `ln p`.
pub const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub half_width: f64,
    pub n_points: usize,
    /// Pseudo-time step of the backward Euler iteration.
    pub pseudo_dt: f64,
    pub tol: f64,
    pub max_steps: usize,
    /// Non-truncated only: double `L` (and `n`, keeping `dx`) until
    /// `lambda_direct` moves by less than 1%.
    pub adapt_domain: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            half_width: 8.0,
            n_points: 1 << 12,
            pseudo_dt: 1e3,
            tol: 1e-8,
            max_steps: 200,
            adapt_domain: false,
        }
    }
}

impl GridSpec {
    pub fn new(half_width: f64, n_points: usize) -> Self {
        GridSpec {
            half_width,
            n_points,
            ..Default::default()
        }
    }

    fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    fn validate(&self, beta: f64) -> Result<()> {
        if self.n_points < 16 || !self.n_points.is_power_of_two() {
            return Err(Error::domain(
                "n_points",
                self.n_points as f64,
                "powers of two >= 16",
            ));
        }
        let min_l = 4.0 * beta.abs().sqrt().max(1.0);
        if !(self.half_width >= min_l) {
            return Err(Error::domain(
                "L",
                self.half_width,
                "[4 max(1, sqrt|beta|), inf)",
            ));
        }
        if !(self.pseudo_dt > 0.0) {
            return Err(Error::domain("pseudo_dt", self.pseudo_dt, "(0, inf)"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain("tol", self.tol, "(0, inf)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub residual_history: Vec<f64>,
    pub steps: usize,
    pub linear_iterations: usize,
    /// Set if some node fell below [`LOG_FLOOR`].
    pub floor_bound: bool,
}

#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub domain_halfwidth: f64,
    pub n_points: usize,
    pub values: Vec<f64>,
    pub dx: f64,
    pub params: ModelParams,
    pub noise: NoiseConfig,
    pub report: SolverReport,
}

impl DensityGrid {
    pub fn x(&self, i: usize) -> f64 {
        -self.domain_halfwidth + (i as f64 + 0.5) * self.dx
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max_i |p_i - p_{n-1-i}|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n_points;
        (0..n / 2)
            .map(|i| (self.values[i] - self.values[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    /// Grid indices of interior local maxima.
    pub fn local_maxima(&self) -> Vec<usize> {
        let v = &self.values;
        (1..v.len() - 1)
            .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1])
            .collect()
    }

    /// CSV `x,p`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,p")?;
        for (i, p) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", fmt_f64(self.x(i)), fmt_f64(*p))?;
        }
        Ok(())
    }

    /// Plain `key = value` solver summary.
    pub fn write_report<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let hist: Vec<String> = self
            .report
            .residual_history
            .iter()
            .map(|r| fmt_f64(*r))
            .collect();
        writeln!(out, "L = {}", fmt_f64(self.domain_halfwidth))?;
        writeln!(out, "n_points = {}", self.n_points)?;
        writeln!(out, "steps = {}", self.report.steps)?;
        writeln!(out, "linear_iterations = {}", self.report.linear_iterations)?;
        writeln!(out, "residual_history = [{}]", hist.join(", "))?;
        writeln!(out, "mass = {}", fmt_f64(self.mass()))?;
        writeln!(out, "moment_2 = {}", fmt_f64(density_moment(self, 2)))?;
        writeln!(out, "moment_4 = {}", fmt_f64(density_moment(self, 4)))?;
        writeln!(out, "min_p = {}", fmt_f64(self.min_value()))?;
        writeln!(out, "floor_bound = {}", self.report.floor_bound)
    }
}

/// Drift part as a tridiagonal stencil: `(Dp)_i = lo_i p_{i-1} + di_i p_i + up_i p_{i+1}`.
struct Drift {
    lo: Vec<f64>,
    di: Vec<f64>,
    up: Vec<f64>,
}

impl Drift {
    fn new(params: &ModelParams, n: usize, half_width: f64) -> Self {
        let dx = 2.0 * half_width / n as f64;
        let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        // face f sits between cells f-1 and f; flux F_f = b⁺ p_{f-1} + b⁻ p_f
        for f in 1..n {
            let b = params.drift_at(-half_width + f as f64 * dx);
            let (bp, bm) = (b.max(0.0) / dx, b.min(0.0) / dx);
            // cell f-1 loses F_f, cell f gains it
            di[f - 1] -= bp;
            up[f - 1] -= bm;
            lo[f] += bp;
            di[f] += bm;
        }
        Drift { lo, di, up }
    }

    fn apply(&self, p: &[f64], out: &mut [f64]) {
        let n = p.len();
        for i in 0..n {
            let mut v = self.di[i] * p[i];
            if i > 0 {
                v += self.lo[i] * p[i - 1];
            }
            if i + 1 < n {
                v += self.up[i] * p[i + 1];
            }
            out[i] = v;
        }
    }

    /// `I - τ D` plus room for `w` further bands.
    fn shifted_band(&self, tau: f64, w: usize) -> BandMatrix {
        let n = self.di.len();
        let w = w.max(1);
        let mut m = BandMatrix::zeros(n, w, w);
        for i in 0..n {
            m.add(i, i, 1.0 - tau * self.di[i]);
            if i > 0 {
                m.add(i, i - 1, -tau * self.lo[i]);
            }
            if i + 1 < n {
                m.add(i, i + 1, -tau * self.up[i]);
            }
        }
        m
    }
}

enum Jump {
    Spectral(Multiplier),
    Quadrature(Vec<f64>),
}

impl Jump {
    fn new(noise: &NoiseConfig, n: usize, half_width: f64) -> Result<Self> {
        let dx = 2.0 * half_width / n as f64;
        let (alpha, sigma) = (noise.alpha, noise.sigma);
        Ok(match noise.mode {
            NoiseMode::NonTruncated => Jump::Spectral(Multiplier::new(n, half_width, |k| {
                -(sigma * k).powf(alpha)
            })?),
            NoiseMode::Truncated => Jump::Quadrature(kernel_weights(
                c_alpha(alpha) * sigma.powf(alpha),
                alpha,
                sigma,
                dx,
            )),
        })
    }

    fn apply(&self, p: &[f64], out: &mut [f64]) {
        match self {
            Jump::Spectral(m) => m.apply(p, out),
            Jump::Quadrature(w) => jump::apply_censored(w, p, out),
        }
    }
}

struct Generator {
    drift: Drift,
    jump: Jump,
}

impl Generator {
    fn apply(&self, p: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; p.len()];
        self.drift.apply(p, out);
        self.jump.apply(p, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += t;
        }
    }
}

// Band half-width of the spectral kernel kept in the preconditioner.
const NEAR_BAND: usize = 64;
const GMRES_RESTART: usize = 100;
const GMRES_TOL: f64 = 1e-12;
const GMRES_MAX: usize = 2000;
const TAIL_RTOL: f64 = 1e-9;

fn solve_fixed(params: &ModelParams, noise: &NoiseConfig, spec: &GridSpec) -> Result<DensityGrid> {
    let n = spec.n_points;
    let l = spec.half_width;
    let dx = spec.dx();
    let tau = spec.pseudo_dt;
    let gen = Generator {
        drift: Drift::new(params, n, l),
        jump: Jump::new(noise, n, l)?,
    };

    // Preconditioner (spectral) or exact operator (quadrature) for I - τG.
    let lu = match &gen.jump {
        Jump::Spectral(m) => {
            let kern = m.kernel(NEAR_BAND);
            let w = kern.len() - 1;
            let mut band = gen.drift.shifted_band(tau, w);
            for i in 0..n {
                band.add(i, i, -tau * kern[0]);
                for (d, &k) in kern.iter().enumerate().skip(1) {
                    if i + d < n {
                        band.add(i, i + d, -tau * k);
                    }
                    if i >= d {
                        band.add(i, i - d, -tau * k);
                    }
                }
            }
            band.factor()?
        }
        Jump::Quadrature(wts) => {
            let w = wts.len() - 1;
            let mut band = gen.drift.shifted_band(tau, w);
            for i in 0..n {
                for (d, &k) in wts.iter().enumerate().skip(1) {
                    if i + d < n {
                        band.add(i, i + d, -tau * k);
                        band.add(i, i, tau * k);
                    }
                    if i >= d {
                        band.add(i, i - d, -tau * k);
                        band.add(i, i, tau * k);
                    }
                }
            }
            band.factor()?
        }
    };
    let exact = matches!(gen.jump, Jump::Quadrature(_));

    let var = params.beta.abs().max(1.0);
    let mut p: Vec<f64> = (0..n)
        .map(|i| {
            let x = -l + (i as f64 + 0.5) * dx;
            (-0.5 * x * x / var).exp()
        })
        .collect();
    normalize(&mut p, dx);

    let mut history = Vec::new();
    let mut gp = vec![0.0; n];
    let mut linear_iterations = 0;
    let residual = |p: &[f64], gp: &mut [f64]| {
        gen.apply(p, gp);
        gp.iter().map(|v| v.abs()).sum::<f64>() * dx
    };
    let mut res = residual(&p, &mut gp);
    history.push(res);
    let mut steps = 0;
    // With a direct solve the far tail, many decades below the bulk, is
    // resolved too: iterate until no node moves in relative terms, so no
    // trace of the initial guess is left there.
    let mut settled = !exact;
    while res >= spec.tol || !settled {
        if steps == spec.max_steps {
            return Err(Error::NonConvergence {
                steps,
                last: res,
                history,
            });
        }
        let rhs = p.clone();
        if exact {
            lu.solve_in_place(&mut p);
        } else {
            let apply = |v: &[f64], out: &mut [f64]| {
                gen.apply(v, out);
                for (o, vi) in out.iter_mut().zip(v) {
                    *o = vi - tau * *o;
                }
            };
            linear_iterations += gmres(
                apply,
                |v| lu.solve_in_place(v),
                &rhs,
                &mut p,
                GMRES_RESTART,
                GMRES_TOL,
                GMRES_MAX,
            )
            .map_err(|e| match e {
                Error::NonConvergence { steps, last, .. } => Error::NonConvergence {
                    steps,
                    last,
                    history: history.clone(),
                },
                e => e,
            })?;
        }
        normalize(&mut p, dx);
        if exact {
            settled = p
                .iter()
                .zip(&rhs)
                .all(|(new, old)| (new - old).abs() <= TAIL_RTOL * new.abs());
        }
        steps += 1;
        res = residual(&p, &mut gp);
        history.push(res);
    }
    let floor_bound = p.iter().any(|&v| v < LOG_FLOOR);
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::PositivityViolation { index, value });
    }
    Ok(DensityGrid {
        domain_halfwidth: l,
        n_points: n,
        values: p,
        dx,
        params: *params,
        noise: *noise,
        report: SolverReport {
            residual_history: history,
            steps,
            linear_iterations,
            floor_bound,
        },
    })
}

fn normalize(p: &mut [f64], dx: f64) {
    let m = p.iter().sum::<f64>() * dx;
    p.iter_mut().for_each(|v| *v /= m);
}

/// Stationary density of `dX = b(X)dt + σ dL`.
pub fn stationary_density(
    params: &ModelParams,
    noise: &NoiseConfig,
    spec: &GridSpec,
) -> Result<DensityGrid> {
    noise.validate()?;
    spec.validate(params.beta)?;
    if !(params.sigma > 0.0) {
        return Err(Error::domain("sigma", params.sigma, "(0, inf)"));
    }
    if params.sigma != noise.sigma {
        return Err(Error::GridMismatch("model and noise sigma differ".into()));
    }
    let mut d = solve_fixed(params, noise, spec)?;
    if spec.adapt_domain && noise.mode == NoiseMode::NonTruncated {
        let mut lam = lambda_direct(&d);
        let mut s = *spec;
        for _ in 0..3 {
            s.half_width *= 2.0;
            s.n_points *= 2;
            let next = solve_fixed(params, noise, &s)?;
            let lam_next = lambda_direct(&next);
            let settled = (lam_next - lam).abs() < 0.01 * lam.abs();
            d = next;
            lam = lam_next;
            if settled {
                break;
            }
        }
    }
    Ok(d)
}

/// `Σ x_i^k p_i dx`.
pub fn density_moment(density: &DensityGrid, k: i32) -> f64 {
    density
        .values
        .iter()
        .enumerate()
        .map(|(i, p)| density.x(i).powi(k) * p)
        .sum::<f64>()
        * density.dx
}

fn lambda_direct(d: &DensityGrid) -> f64 {
    d.values
        .iter()
        .enumerate()
        .map(|(i, p)| d.params.drift_derivative(d.x(i)) * p)
        .sum::<f64>()
        * d.dx
}

/// `(λ_direct, λ_dirichlet)`: the mean of `b'` under `p`, and minus the
/// Dirichlet form of the jump operator evaluated on `(ln p, p)`.
pub fn lyapunov_from_density(density: &DensityGrid) -> Result<(f64, f64)> {
    if let Some((index, &value)) = density.values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::PositivityViolation { index, value });
    }
    let direct = lambda_direct(density);
    let p = &density.values;
    let lnp: Vec<f64> = p.iter().map(|v| v.max(LOG_FLOOR).ln()).collect();
    let (alpha, sigma) = (density.noise.alpha, density.noise.sigma);
    let form = match density.noise.mode {
        NoiseMode::NonTruncated => {
            let half = Multiplier::new(density.n_points, density.domain_halfwidth, |k| {
                (sigma * k).powf(0.5 * alpha)
            })?;
            let (mut a, mut b) = (vec![0.0; p.len()], vec![0.0; p.len()]);
            half.apply(&lnp, &mut a);
            half.apply(p, &mut b);
            a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>()
        }
        NoiseMode::Truncated => {
            let w = kernel_weights(c_alpha(alpha) * sigma.powf(alpha), alpha, sigma, density.dx);
            let n = p.len();
            let mut acc = 0.0;
            for (m, &wm) in w.iter().enumerate().skip(1) {
                for i in 0..n.saturating_sub(m) {
                    acc += wm * (lnp[i + m] - lnp[i]) * (p[i + m] - p[i]);
                }
            }
            acc
        }
    };
    Ok((direct, -form * density.dx))
}

/// `min_{λ>0} (1/λ)[(λ+2β)²/8 + 2c_α σ²/(2-α)]`, in closed form.
pub fn moment_bound(beta: f64, sigma: f64, alpha: f64) -> f64 {
    let s = sigma * sigma * crate::noise::truncated_variance(alpha);
    (0.5 * (0.5 * beta * beta + s)).sqrt() + 0.5 * beta
}

/// Log-log fit of the right tail over `x ∈ [lo, hi]`.
pub fn tail_fit(density: &DensityGrid, lo: f64, hi: f64) -> Result<LinearFit> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, &p) in density.values.iter().enumerate() {
        let x = density.x(i);
        if x >= lo && x <= hi && p > 0.0 {
            xs.push(x.ln());
            ys.push(p.ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::Invalid(format!(
            "tail window [{lo}, {hi}] holds too few nodes"
        )));
    }
    Ok(linear_fit(&xs, &ys))
}
