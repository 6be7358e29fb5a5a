#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use pitchfork_core::rng::derive_seed;

use config::{ConfigError, ExperimentConfig};
use experiments::{run_experiment, RunError, Summary};

const SEED_ENV: &str = "PITCHFORK_SEED";

#[derive(Parser)]
#[command(name = "pitchfork", version, about = "Run pitchfork model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory, overriding `experiment.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the experiment once per value of a numeric field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Field to vary, e.g. `beta` or `noise.alpha`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(ConfigError),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("i/o: {e}"))
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Ok(raw) = std::env::var(SEED_ENV) {
        cfg.set("experiment.seed", &raw)
            .map_err(|_| ConfigError::Field {
                field: SEED_ENV.into(),
                msg: format!("cannot parse {raw:?} as an unsigned integer"),
            })?;
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write_manifest(
    dir: &Path,
    cfg: &ExperimentConfig,
    wall: f64,
    threads: usize,
    status: &str,
    summary: &Summary,
) -> std::io::Result<()> {
    let mut f = fs::File::create(dir.join("manifest.txt"))?;
    writeln!(f, "version = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(f, "experiment = {}", cfg.experiment)?;
    writeln!(f, "seed = {}", cfg.seed)?;
    writeln!(f, "threads = {threads}")?;
    writeln!(f, "wall_time_s = {wall:.3}")?;
    writeln!(f, "status = {status}")?;
    writeln!(f, "\n[config]\n{}", cfg.echo())?;
    writeln!(f, "\n[summary]")?;
    for (k, v) in summary {
        writeln!(f, "{k} = {v}")?;
    }
    Ok(())
}

/// Run one configuration into `dir`, always leaving a manifest behind.
fn run_one(cfg: &ExperimentConfig, dir: &Path) -> Result<Summary, Failure> {
    fs::create_dir_all(dir)?;
    let start = Instant::now();
    let result = run_experiment(cfg, dir);
    let wall = start.elapsed().as_secs_f64();
    let threads = rayon::current_num_threads();
    match result {
        Ok(summary) => {
            write_manifest(dir, cfg, wall, threads, "ok", &summary)?;
            Ok(summary)
        }
        Err(e) => {
            write_manifest(
                dir,
                cfg,
                wall,
                threads,
                &format!("error: {e}"),
                &Summary::new(),
            )?;
            Err(e.into())
        }
    }
}

fn sweep(
    base: &ExperimentConfig,
    param: &str,
    values: &str,
    root: &Path,
) -> Result<usize, Failure> {
    let field = ExperimentConfig::sweep_field(param)?;
    let values: Vec<&str> = values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if values.is_empty() {
        return Err(ConfigError::Field {
            field: "--values".into(),
            msg: "empty value list".into(),
        }
        .into());
    }
    let mut configs = Vec::with_capacity(values.len());
    for (i, raw) in values.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.set(field, raw)?;
        cfg.seed = derive_seed(base.seed, i as u64);
        cfg.validate()?;
        configs.push(cfg);
    }
    fs::create_dir_all(root)?;
    let mut rows = Vec::new();
    let mut failures = 0;
    for (i, (cfg, raw)) in configs.iter().zip(&values).enumerate() {
        let dir = root.join(format!("{i:03}_{param}_{raw}"));
        match run_one(cfg, &dir) {
            Ok(s) => rows.push((raw.to_string(), cfg.seed, "ok".to_string(), s)),
            Err(f) => {
                failures += 1;
                let msg = match f {
                    Failure::Config(e) => e.to_string(),
                    Failure::Runtime(m) => m,
                };
                eprintln!("{param} = {raw}: {msg}");
                rows.push((
                    raw.to_string(),
                    cfg.seed,
                    format!("error: {}", msg.replace([',', '\n'], ";")),
                    Summary::new(),
                ));
            }
        }
    }
    let keys: Vec<String> = rows
        .iter()
        .find(|r| !r.3.is_empty())
        .map(|r| r.3.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    let mut f = fs::File::create(root.join("sweep.csv"))?;
    write!(f, "{param},seed,status")?;
    for k in &keys {
        write!(f, ",{k}")?;
    }
    writeln!(f)?;
    for (value, seed, status, summary) in &rows {
        write!(f, "{value},{seed},{status}")?;
        for k in &keys {
            let v = summary
                .iter()
                .find(|(sk, _)| sk == k)
                .map(|(_, v)| v.as_str())
                .unwrap_or("");
            write!(f, ",{v}")?;
        }
        writeln!(f)?;
    }
    Ok(failures)
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(ConfigError::Field {
                field: "--threads".into(),
                msg: "must be at least 1".into(),
            }
            .into());
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(pool.install(f))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            threads,
            out,
        } => {
            let cfg = load(&config)?;
            let dir = out_dir(&cfg, out);
            let summary = in_pool(threads, || run_one(&cfg, &dir))??;
            for (k, v) in summary {
                println!("{k} = {v}");
            }
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Sweep {
            config,
            param,
            values,
            threads,
            out,
        } => {
            let cfg = load(&config)?;
            let dir = out_dir(&cfg, out);
            let failures = in_pool(threads, || sweep(&cfg, &param, &values, &dir))??;
            println!("wrote {}", dir.join("sweep.csv").display());
            if failures > 0 {
                return Err(Failure::Runtime(format!(
                    "{failures} sweep value(s) failed"
                )));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
