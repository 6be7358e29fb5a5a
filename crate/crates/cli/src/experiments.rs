//! One function per experiment kind. Each writes its CSV artifacts into the
//! output directory and returns summary metrics for the manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use pitchfork_core::attractor::{
    equilibrium_ensemble, pullback_ensemble, vicinity_probability, write_ensemble_csv,
};
use pitchfork_core::fokker_planck::{
    density_moment, lyapunov_from_density, moment_bound, stationary_density,
};
use pitchfork_core::lyapunov::{asymptotic_lyapunov, dichotomy_spectrum_probe, ftle_distribution};
use pitchfork_core::measures::{ergodicity_decay, wasserstein};
use pitchfork_core::noise::small_ball_probability;
use pitchfork_core::rng::derive_seed;
use pitchfork_core::sde::integrate;
use pitchfork_core::stats::fmt_f64;
use pitchfork_core::{
    EmpiricalMeasure, Error, GridSpec, ModelParams, NoiseConfig, NoiseSource, PullbackOptions,
};

use crate::config::{Experiment, ExperimentConfig};

pub type Summary = Vec<(String, String)>;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn create(dir: &Path, name: &str) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn num(key: &str, v: f64) -> (String, String) {
    (key.to_string(), fmt_f64(v))
}

fn model(cfg: &ExperimentConfig) -> Result<(ModelParams, NoiseConfig, PullbackOptions), Error> {
    let params = if cfg.linear_drift {
        ModelParams::linear(cfg.beta, cfg.sigma)?
    } else {
        ModelParams::new(cfg.beta, cfg.sigma)?
    };
    let noise =
        NoiseConfig::new(cfg.alpha, cfg.sigma, cfg.mode, cfg.seed)?.with_cutoff(cfg.cutoff)?;
    let opts = PullbackOptions {
        dt: cfg.dt,
        ..cfg.pullback
    };
    opts.validate()?;
    Ok((params, noise, opts))
}

pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<Summary, RunError> {
    let (params, noise, opts) = model(cfg)?;
    let mut summary = Summary::new();
    match cfg.experiment {
        Experiment::Path => {
            let n = (cfg.horizon / cfg.dt).round().max(1.0) as usize;
            let path = NoiseSource::new(&noise, 0, cfg.dt)?.window(0, n)?;
            let traj = integrate(&params, &path, cfg.x0)?;
            path.write_csv(create(dir, "noise.csv")?)?;
            traj.write_csv(create(dir, "trajectory.csv")?)?;
            summary.push(num("final_state", traj.final_state()));
        }
        Experiment::Attractor => {
            let runs = pullback_ensemble(&params, &noise, &opts, cfg.n_paths)?;
            write_ensemble_csv(&runs, create(dir, "ensemble.csv")?)?;
            let collapsed = runs.iter().filter(|r| r.collapsed).count();
            let max_diam = runs.iter().map(|r| r.diameter).fold(0.0, f64::max);
            let mean = runs.iter().map(|r| r.equilibrium_estimate).sum::<f64>() / runs.len() as f64;
            summary.push(("collapsed".into(), collapsed.to_string()));
            summary.push(num("max_diameter", max_diam));
            summary.push(num("mean_equilibrium", mean));
        }
        Experiment::Lyapunov => {
            let e = asymptotic_lyapunov(&params, &noise, cfg.horizon, &opts)?;
            let mut f = create(dir, "lyapunov.csv")?;
            writeln!(f, "estimate,stderr,first_half,first_half_stderr,second_half,second_half_stderr,finite_time_only")?;
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                fmt_f64(e.estimate),
                fmt_f64(e.stderr),
                fmt_f64(e.halves[0].0),
                fmt_f64(e.halves[0].1),
                fmt_f64(e.halves[1].0),
                fmt_f64(e.halves[1].1),
                e.finite_time_only
            )?;
            summary.push(num("lambda", e.estimate));
            summary.push(num("stderr", e.stderr));
        }
        Experiment::Ftle => {
            let d = ftle_distribution(&params, &noise, cfg.horizon, cfg.n_paths, &opts)?;
            d.write_csv(create(dir, "ftle.csv")?)?;
            summary.push(num("p_positive", d.p_positive));
            summary.push(num("ci", d.ci));
            summary.push(num("mean_lambda", d.measure.mean()));
        }
        Experiment::Spectrum => {
            let r = dichotomy_spectrum_probe(&params, &noise, &cfg.t_list, cfg.n_paths, &opts)?;
            r.write_csv(create(dir, "spectrum.csv")?)?;
            let last = r.envelope(r.t_list.len() - 1, cfg.n_paths);
            summary.push(num("rate_min", last.rate_min));
            summary.push(num("rate_max", last.rate_max));
        }
        Experiment::Density => {
            let spec = GridSpec::new(cfg.half_width, cfg.n_points);
            let d = match stationary_density(&params, &noise, &spec) {
                Ok(d) => d,
                Err(e) => {
                    if let Error::NonConvergence { history, .. } = &e {
                        let mut f = create(dir, "residual_history.txt")?;
                        for r in history {
                            writeln!(f, "{}", fmt_f64(*r))?;
                        }
                        f.flush()?;
                    }
                    return Err(e.into());
                }
            };
            d.write_csv(create(dir, "density.csv")?)?;
            d.write_report(create(dir, "solver_report.txt")?)?;
            let (direct, dirichlet) = lyapunov_from_density(&d)?;
            summary.push(num("lambda_direct", direct));
            summary.push(num("lambda_dirichlet", dirichlet));
            summary.push(num("second_moment", density_moment(&d, 2)));
            summary.push(num(
                "moment_bound",
                moment_bound(cfg.beta, cfg.sigma, cfg.alpha),
            ));
            summary.push(num("min_density", d.min_value()));
        }
        Experiment::Smallball => {
            let mut f = create(dir, "smallball.csv")?;
            writeln!(f, "T,epsilon,estimate,ci_halfwidth")?;
            for &t in &cfg.t_list {
                let e = small_ball_probability(&noise, t, cfg.epsilon, cfg.n_paths)?;
                writeln!(
                    f,
                    "{},{},{},{}",
                    fmt_f64(t),
                    fmt_f64(cfg.epsilon),
                    fmt_f64(e.estimate),
                    fmt_f64(e.ci_halfwidth)
                )?;
                summary.push(num(&format!("p_T{t}"), e.estimate));
            }
        }
        Experiment::Ergodicity => {
            let reference = equilibrium_ensemble(&params, &noise, &opts, cfg.reference_paths)?;
            let other = noise.with_seed(derive_seed(cfg.seed, 1));
            let other = equilibrium_ensemble(&params, &other, &opts, cfg.reference_paths)?;
            let floor = wasserstein(&reference, &other, 1.0)?;
            let initial = EmpiricalMeasure::dirac(cfg.x0, 1)?;
            let r = ergodicity_decay(
                &params,
                &noise,
                &initial,
                &cfg.checkpoints,
                cfg.n_paths,
                &reference,
                floor,
                cfg.dt,
            )?;
            r.write_csv(create(dir, "decay.csv")?)?;
            r.write_fit(create(dir, "fit.txt")?)?;
            summary.push(num("K", r.k));
            summary.push(num("c", r.c));
            summary.push(num("R2", r.fit.r2));
            summary.push(num("noise_floor", floor));
        }
        Experiment::Vicinity => {
            let e = vicinity_probability(
                &params,
                &noise,
                cfg.epsilon,
                cfg.horizon,
                cfg.n_paths,
                &opts,
            )?;
            let mut f = create(dir, "vicinity.csv")?;
            writeln!(f, "epsilon,T,estimate,ci_halfwidth")?;
            writeln!(
                f,
                "{},{},{},{}",
                fmt_f64(cfg.epsilon),
                fmt_f64(cfg.horizon),
                fmt_f64(e.estimate),
                fmt_f64(e.ci_halfwidth)
            )?;
            summary.push(num("probability", e.estimate));
            summary.push(num("ci_halfwidth", e.ci_halfwidth));
        }
    }
    Ok(summary)
}
