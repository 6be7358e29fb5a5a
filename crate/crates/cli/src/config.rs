//! INI experiment configuration.
//!
//! Every key has a default; the file only lists what differs. Unknown
//! sections and keys are rejected so typos cannot silently fall back to a
//! default.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use pitchfork_core::{NoiseMode, PullbackOptions};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Read { path: PathBuf, msg: String },
    #[error("{field}: {msg}")]
    Field { field: String, msg: String },
}

fn field_err(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.to_string(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Path,
    Attractor,
    Lyapunov,
    Ftle,
    Spectrum,
    Density,
    Smallball,
    Ergodicity,
    Vicinity,
}

impl Experiment {
    const ALL: [(Experiment, &'static str); 9] = [
        (Experiment::Path, "path"),
        (Experiment::Attractor, "attractor"),
        (Experiment::Lyapunov, "lyapunov"),
        (Experiment::Ftle, "ftle"),
        (Experiment::Spectrum, "spectrum"),
        (Experiment::Density, "density"),
        (Experiment::Smallball, "smallball"),
        (Experiment::Ergodicity, "ergodicity"),
        (Experiment::Vicinity, "vicinity"),
    ];

    pub fn as_str(self) -> &'static str {
        Self::ALL.iter().find(|(e, _)| *e == self).unwrap().1
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(e, _)| *e)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|(_, n)| *n).collect();
                format!(
                    "unknown experiment {s:?}, expected one of {}",
                    names.join(", ")
                )
            })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub n_paths: usize,
    pub output_dir: Option<PathBuf>,

    pub beta: f64,
    pub sigma: f64,
    pub linear_drift: bool,

    pub alpha: f64,
    pub mode: NoiseMode,
    pub cutoff: f64,

    pub dt: f64,
    /// Experiment horizon: path length, FTLE/vicinity/small-ball `T`, or the
    /// averaging window of the asymptotic estimate.
    pub horizon: f64,
    pub t_list: Vec<f64>,
    pub checkpoints: Vec<f64>,
    pub x0: f64,
    pub epsilon: f64,
    pub reference_paths: usize,

    pub pullback: PullbackOptions,

    pub half_width: f64,
    pub n_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Path,
            seed: 0,
            n_paths: 1000,
            output_dir: None,
            beta: 1.0,
            sigma: 0.5,
            linear_drift: false,
            alpha: 1.5,
            mode: NoiseMode::Truncated,
            cutoff: 0.01,
            dt: 1e-3,
            horizon: 1.0,
            t_list: vec![0.5, 1.0, 2.0],
            checkpoints: (1..=10).map(|i| 0.5 * i as f64).collect(),
            x0: 0.0,
            epsilon: 0.5,
            reference_paths: 10_000,
            pullback: PullbackOptions::default(),
            half_width: 8.0,
            n_points: 4096,
        }
    }
}

/// Keys accepted in each section.
const SCHEMA: &[(&str, &[&str])] = &[
    (
        "experiment",
        &[
            "kind",
            "seed",
            "n_paths",
            "output_dir",
            "x0",
            "epsilon",
            "reference_paths",
        ],
    ),
    ("model", &["beta", "sigma", "drift"]),
    ("noise", &["alpha", "mode", "cutoff"]),
    ("time", &["dt", "T", "t_list", "checkpoints"]),
    ("pullback", &["horizon", "max_horizon", "tol", "interval"]),
    ("grid", &["L", "n_points"]),
];

/// Numeric fields that `sweep --param` may vary, by bare or dotted name.
pub const SWEEPABLE: &[(&str, &str)] = &[
    ("beta", "model.beta"),
    ("sigma", "model.sigma"),
    ("alpha", "noise.alpha"),
    ("cutoff", "noise.cutoff"),
    ("dt", "time.dt"),
    ("T", "time.T"),
    ("x0", "experiment.x0"),
    ("epsilon", "experiment.epsilon"),
    ("horizon", "pullback.horizon"),
    ("tol", "pullback.tol"),
    ("L", "grid.L"),
];

fn parse_num<T: FromStr>(field: &str, raw: &str) -> Result<T, ConfigError> {
    raw.trim()
        .parse()
        .map_err(|_| field_err(field, format!("cannot parse {raw:?} as a number")))
}

fn parse_list(field: &str, raw: &str) -> Result<Vec<f64>, ConfigError> {
    raw.split(',').map(|s| parse_num(field, s)).collect()
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| field_err("config", e.to_string()))?;
        let mut cfg = ExperimentConfig::default();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(field_err(k, "key outside of any section"));
                }
                continue;
            };
            let allowed = SCHEMA
                .iter()
                .find(|(s, _)| *s == section)
                .ok_or_else(|| field_err(section, "unknown section"))?
                .1;
            for (key, value) in props.iter() {
                let name = format!("{section}.{key}");
                if !allowed.contains(&key) {
                    return Err(field_err(&name, "unknown key"));
                }
                cfg.set(&name, value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assign one field from its textual value; `name` is `section.key`.
    pub fn set(&mut self, name: &str, raw: &str) -> Result<(), ConfigError> {
        let raw = raw.trim();
        match name {
            "experiment.kind" => {
                self.experiment = raw.parse().map_err(|m: String| field_err(name, m))?
            }
            "experiment.seed" => self.seed = parse_num(name, raw)?,
            "experiment.n_paths" => self.n_paths = parse_num(name, raw)?,
            "experiment.output_dir" => self.output_dir = Some(PathBuf::from(raw)),
            "model.beta" => self.beta = parse_num(name, raw)?,
            "model.sigma" => self.sigma = parse_num(name, raw)?,
            "model.drift" => {
                self.linear_drift = match raw {
                    "pitchfork" => false,
                    "linear" => true,
                    _ => return Err(field_err(name, "expected pitchfork or linear")),
                }
            }
            "noise.alpha" => self.alpha = parse_num(name, raw)?,
            "noise.mode" => {
                self.mode = raw
                    .parse()
                    .map_err(|_| field_err(name, "expected truncated or non-truncated"))?
            }
            "noise.cutoff" => self.cutoff = parse_num(name, raw)?,
            "time.dt" => self.dt = parse_num(name, raw)?,
            "time.T" => self.horizon = parse_num(name, raw)?,
            "time.t_list" => self.t_list = parse_list(name, raw)?,
            "time.checkpoints" => self.checkpoints = parse_list(name, raw)?,
            "experiment.x0" => self.x0 = parse_num(name, raw)?,
            "experiment.epsilon" => self.epsilon = parse_num(name, raw)?,
            "experiment.reference_paths" => self.reference_paths = parse_num(name, raw)?,
            "pullback.horizon" => self.pullback.horizon = parse_num(name, raw)?,
            "pullback.max_horizon" => self.pullback.max_horizon = parse_num(name, raw)?,
            "pullback.tol" => self.pullback.tol = parse_num(name, raw)?,
            "pullback.interval" => {
                let v = parse_list(name, raw)?;
                if v.len() != 2 {
                    return Err(field_err(name, "expected two numbers lo,hi"));
                }
                self.pullback.interval = (v[0], v[1]);
            }
            "grid.L" => self.half_width = parse_num(name, raw)?,
            "grid.n_points" => self.n_points = parse_num(name, raw)?,
            _ => return Err(field_err(name, "unknown key")),
        }
        Ok(())
    }

    /// Resolve a sweep parameter name to its `section.key` form.
    pub fn sweep_field(param: &str) -> Result<&'static str, ConfigError> {
        SWEEPABLE
            .iter()
            .find(|(bare, dotted)| *bare == param || *dotted == param)
            .map(|(_, dotted)| *dotted)
            .ok_or_else(|| {
                let names: Vec<&str> = SWEEPABLE.iter().map(|(b, _)| *b).collect();
                field_err(
                    param,
                    format!("not a sweepable numeric field ({})", names.join(", ")),
                )
            })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let open = |name: &str, v: f64, lo: f64, hi: f64| {
            if v > lo && v < hi {
                Ok(())
            } else {
                Err(field_err(
                    name,
                    format!("{v} outside the valid interval ({lo}, {hi})"),
                ))
            }
        };
        let positive = |name: &str, v: f64| open(name, v, 0.0, f64::INFINITY);
        if !self.beta.is_finite() {
            return Err(field_err("model.beta", "must be finite"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(field_err(
                "model.sigma",
                format!("{} outside [0, inf)", self.sigma),
            ));
        }
        open("noise.alpha", self.alpha, 1.0, 2.0)?;
        open("noise.cutoff", self.cutoff, 0.0, 1.0)?;
        positive("time.dt", self.dt)?;
        positive("time.T", self.horizon)?;
        positive("experiment.epsilon", self.epsilon)?;
        if !self.x0.is_finite() {
            return Err(field_err("experiment.x0", "must be finite"));
        }
        if self.t_list.is_empty()
            || self.t_list[0] <= 0.0
            || self.t_list.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(field_err(
                "time.t_list",
                "must be positive and strictly increasing",
            ));
        }
        if self.checkpoints.is_empty()
            || self.checkpoints[0] < 0.0
            || self.checkpoints.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(field_err(
                "time.checkpoints",
                "must be nonnegative and strictly increasing",
            ));
        }
        positive("pullback.horizon", self.pullback.horizon)?;
        if !(self.pullback.max_horizon >= self.pullback.horizon) {
            return Err(field_err(
                "pullback.max_horizon",
                "must be at least pullback.horizon",
            ));
        }
        positive("pullback.tol", self.pullback.tol)?;
        if !(self.pullback.interval.0 < self.pullback.interval.1) {
            return Err(field_err("pullback.interval", "must satisfy lo < hi"));
        }
        positive("grid.L", self.half_width)?;
        if self.n_points < 16 || !self.n_points.is_power_of_two() {
            return Err(field_err(
                "grid.n_points",
                "must be a power of two, at least 16",
            ));
        }
        let needs_ensemble = matches!(
            self.experiment,
            Experiment::Attractor | Experiment::Ftle | Experiment::Smallball | Experiment::Vicinity
        );
        if needs_ensemble && self.n_paths < 1000 {
            return Err(field_err("experiment.n_paths", "must be at least 1000"));
        }
        if self.n_paths == 0 {
            return Err(field_err("experiment.n_paths", "must be positive"));
        }
        if self.experiment == Experiment::Ergodicity && self.reference_paths < 1000 {
            return Err(field_err(
                "experiment.reference_paths",
                "must be at least 1000",
            ));
        }
        Ok(())
    }

    /// Resolved configuration as `section.key = value` lines.
    pub fn echo(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut lines = vec![
            format!("experiment.kind = {}", self.experiment),
            format!("experiment.seed = {}", self.seed),
            format!("experiment.n_paths = {}", self.n_paths),
            format!("model.beta = {}", self.beta),
            format!("model.sigma = {}", self.sigma),
            format!(
                "model.drift = {}",
                if self.linear_drift {
                    "linear"
                } else {
                    "pitchfork"
                }
            ),
            format!("noise.alpha = {}", self.alpha),
            format!("noise.mode = {}", self.mode.as_str()),
            format!("noise.cutoff = {}", self.cutoff),
            format!("time.dt = {}", self.dt),
            format!("time.T = {}", self.horizon),
            format!("time.t_list = {}", list(&self.t_list)),
            format!("time.checkpoints = {}", list(&self.checkpoints)),
            format!("experiment.x0 = {}", self.x0),
            format!("experiment.epsilon = {}", self.epsilon),
            format!("experiment.reference_paths = {}", self.reference_paths),
            format!("pullback.horizon = {}", self.pullback.horizon),
            format!("pullback.max_horizon = {}", self.pullback.max_horizon),
            format!("pullback.tol = {}", self.pullback.tol),
            format!(
                "pullback.interval = {},{}",
                self.pullback.interval.0, self.pullback.interval.1
            ),
            format!("grid.L = {}", self.half_width),
            format!("grid.n_points = {}", self.n_points),
        ];
        if let Some(d) = &self.output_dir {
            lines.push(format!("experiment.output_dir = {}", d.display()));
        }
        lines.join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = ExperimentConfig::from_str(
            "; comment\n[experiment]\nkind = ftle\n# another\nseed = 9\n[model]\nbeta = -1\n",
        )
        .unwrap();
        assert_eq!(c.experiment, Experiment::Ftle);
        assert_eq!(c.seed, 9);
        assert_eq!(c.beta, -1.0);
        assert_eq!(c.alpha, 1.5);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let e = ExperimentConfig::from_str("[noise]\nalpha = 2.5\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("noise.alpha") && e.contains("(1, 2)"), "{e}");
        assert!(ExperimentConfig::from_str("[noise]\nalfa = 1.5\n").is_err());
        assert!(ExperimentConfig::from_str("[nois]\nalpha = 1.5\n").is_err());
        assert!(ExperimentConfig::from_str("alpha = 1.5\n").is_err());
        assert!(ExperimentConfig::from_str("[model]\nbeta = x\n").is_err());
        assert!(ExperimentConfig::from_str("[grid]\nn_points = 1000\n").is_err());
    }

    #[test]
    fn sweep_names() {
        assert_eq!(ExperimentConfig::sweep_field("beta").unwrap(), "model.beta");
        assert_eq!(
            ExperimentConfig::sweep_field("noise.alpha").unwrap(),
            "noise.alpha"
        );
        assert!(ExperimentConfig::sweep_field("mode").is_err());
    }

    #[test]
    fn echo_roundtrips_through_set() {
        let c = ExperimentConfig::from_str("[experiment]\nkind = density\n[time]\nt_list = 1,2\n")
            .unwrap();
        let mut d = ExperimentConfig::default();
        for line in c.echo().lines() {
            let (k, v) = line.split_once(" = ").unwrap();
            d.set(k, v).unwrap();
        }
        assert_eq!(c, d);
    }
}
