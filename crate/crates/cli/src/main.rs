//! `thermoline`: run a thermometry experiment described by a JSON config and
//! write plot-ready CSV/JSON artifacts.

mod config;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use thermoline::bounds::BoundReport;
use thermoline::csv::fmt_f64;
use thermoline::simulate::{run_adaptive, run_ensemble, run_trajectory};
use thermoline::PosteriorGrid;

use config::{ConfigError, ExperimentConfig, GeometryConfig, Plan, PriorPlan};

#[derive(Debug, Parser)]
#[command(
    name = "thermoline",
    version,
    about = "Bayesian thermometry experiments from a JSON config"
)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact directory; overrides the config's `output_path` (default: current directory).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads for simulations.
    #[arg(long, env = "THERMOLINE_THREADS")]
    threads: Option<usize>,
    /// Validate the config and print the manifest without running anything.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, thiserror::Error)]
enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Library(#[from] thermoline::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl RunError {
    fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Library(thermoline::Error::Config(_)) => 2,
            RunError::Library(_) | RunError::Io { .. } => 3,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Io { context, source }
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: &'static str,
    config_hash: String,
    seed: u64,
    version: &'static str,
    wall_time_s: f64,
    artifacts: Vec<PathBuf>,
}

/// Writes artifacts into one directory, each via a temporary file and a rename.
struct ArtifactWriter {
    dir: PathBuf,
    header: Vec<String>,
    config_hash: String,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .map_err(io_err(format!("creating temp file in {}", self.dir.display())))?;
        {
            let mut w = io::BufWriter::new(tmp.as_file_mut());
            body(&mut w).map_err(io_err(format!("writing {}", path.display())))?;
            w.flush().map_err(io_err(format!("writing {}", path.display())))?;
        }
        tmp.persist(&path).map_err(|e| RunError::Io {
            context: format!("renaming onto {}", path.display()),
            source: e.error,
        })?;
        self.written.push(path);
        Ok(())
    }

    fn csv(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut dyn Write, &[String]) -> io::Result<()>,
    ) -> Result<(), RunError> {
        let header = self.header.clone();
        self.write(name, |w| body(w, &header))
    }

    fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<(), RunError> {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            config_hash: &'a str,
            version: &'static str,
            result: &'a T,
        }
        let hash = self.config_hash.clone();
        self.write(name, |w| {
            serde_json::to_writer_pretty(
                &mut *w,
                &Wrapped {
                    config_hash: &hash,
                    version: env!("CARGO_PKG_VERSION"),
                    result,
                },
            )?;
            writeln!(w)
        })
    }
}

fn build_prior(p: &PriorPlan) -> Result<PosteriorGrid, RunError> {
    Ok(PosteriorGrid::smoothed_jeffreys(
        &p.spec,
        &p.model,
        p.coordinate,
        p.grid_size,
    )?)
}

fn write_geometry(
    w: &mut dyn Write,
    header: &[String],
    g: &GeometryConfig,
    models: &[thermoline::SampleModel; 3],
) -> io::Result<()> {
    for c in header {
        writeln!(w, "# {c}")?;
    }
    write!(w, "theta_over_gap,theta")?;
    for m in models {
        write!(w, ",qfi_{}", m.label())?;
    }
    for m in models {
        write!(w, ",lambda_{}", m.label())?;
    }
    writeln!(w)?;
    for i in 0..g.points {
        let ratio = g.ratio_min + (g.ratio_max - g.ratio_min) * i as f64 / (g.points - 1) as f64;
        let theta = ratio * g.gap;
        write!(w, "{},{}", fmt_f64(ratio), fmt_f64(theta))?;
        for m in models {
            write!(w, ",{}", fmt_f64(m.qfi(theta).map_err(io::Error::other)?))?;
        }
        for m in models {
            write!(w, ",{}", fmt_f64(m.lambda(theta).map_err(io::Error::other)?))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn execute(plan: &Plan, out: &mut ArtifactWriter, seed: u64) -> Result<(), RunError> {
    match plan {
        Plan::Prior(p) => {
            let prior = build_prior(p)?;
            out.csv("prior.csv", |w, h| prior.write_csv(w, h))?;
        }
        Plan::Geometry { config, models } => {
            out.csv("geometry.csv", |w, h| write_geometry(w, h, config, models))?;
        }
        Plan::Trajectory {
            prior,
            measurement,
            nu,
            true_theta,
        } => {
            let grid = build_prior(prior)?;
            let rec = run_trajectory(&grid, measurement, *nu, *true_theta, seed)?;
            out.csv("trajectory.csv", |w, h| rec.write_csv(w, h))?;
            out.json("trajectory.json", &rec)?;
        }
        Plan::Ensemble {
            prior,
            measurement,
            nu_grid,
            n_traj,
        } => {
            let grid = build_prior(prior)?;
            let summary = run_ensemble(&grid, measurement, nu_grid, *n_traj, seed)?;
            out.csv("ensemble.csv", |w, h| summary.write_csv(w, h))?;
            out.json("ensemble.json", &summary)?;
        }
        Plan::Bounds {
            prior,
            measurement,
            reference,
            nu_grid,
            n_mc,
        } => {
            let grid = build_prior(prior)?;
            let report = BoundReport::compute(&grid, reference, measurement, nu_grid, *n_mc, seed)?;
            if report.warning {
                eprintln!("warning: more than 5% of TBCRB posteriors do not vanish at the domain boundary");
            }
            out.csv("bounds.csv", |w, h| report.write_csv(w, h))?;
            out.json("bounds.json", &report)?;
        }
        Plan::Adaptive {
            prior,
            policy,
            nu_grid,
            n_traj,
        } => {
            let grid = build_prior(prior)?;
            let summary = run_adaptive(&grid, policy, nu_grid, *n_traj, seed)?;
            out.csv("adaptive.csv", |w, h| summary.write_csv(w, h))?;
            out.json("adaptive.json", &summary)?;
        }
    }
    Ok(())
}

fn run(args: &Args) -> Result<Manifest, RunError> {
    let start = Instant::now();
    let text = fs::read_to_string(&args.config)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let plan = cfg.plan()?;
    let hash = cfg.hash();
    if args.dry_run {
        return Ok(Manifest {
            command: cfg.command.name(),
            config_hash: hash,
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s: start.elapsed().as_secs_f64(),
            artifacts: Vec::new(),
        });
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(ConfigError("field `threads`: must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(format!("cannot start {n} threads: {e}")))?;
    }

    let dir = args
        .output
        .clone()
        .or_else(|| cfg.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(io_err(format!("creating {}", dir.display())))?;
    let mut out = ArtifactWriter {
        dir: dir.clone(),
        header: vec![
            format!("config_hash={hash}"),
            format!(
                "command={} seed={} version={}",
                cfg.command.name(),
                cfg.seed,
                env!("CARGO_PKG_VERSION")
            ),
        ],
        config_hash: hash.clone(),
        written: Vec::new(),
    };
    execute(&plan, &mut out, cfg.seed)?;
    Ok(Manifest {
        command: cfg.command.name(),
        config_hash: hash,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: out.written,
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(manifest) => {
            println!("{}", serde_json::to_string(&manifest).expect("manifest serialises"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("thermoline: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
