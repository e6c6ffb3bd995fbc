#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use breathingbox_core::dynamics::{propagate_exact, propagate_first_order, TimeGrid, Trajectory};
use breathingbox_core::export;
use breathingbox_core::operators::position_matrix;
use breathingbox_core::resonance::{
    linear_grid, reachable_frequencies, resonance_scan, transition_frequencies, ScanSettings, COUPLING_THRESHOLD,
};

mod config;

use config::{RunConfig, Resolved};

#[derive(Parser, Debug)]
#[command(name = "breathingbox", version, about = "Particle in a box with oscillating walls")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration (a run manifest is accepted too).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Assert the run uses no random numbers (always true here).
    #[arg(long, global = true)]
    seedless: bool,

    /// Worker threads for resonance scans.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Eigenmodes of the static box -> basis.csv
    Basis,
    /// Dilation and position matrices -> dilation.csv, position.csv
    Matrix,
    /// Propagate the initial state -> trajectory_*.csv
    Evolve,
    /// Coupled transition frequencies -> spectrum.csv (also printed)
    Spectrum,
    /// Frequency sweep -> scan.csv, peaks.txt
    Scan,
    /// All of the above that the config enables
    Run,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Basis => "basis",
            Command::Matrix => "matrix",
            Command::Evolve => "evolve",
            Command::Spectrum => "spectrum",
            Command::Scan => "scan",
            Command::Run => "run",
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    resolved: ResolvedEcho,
}

#[derive(Serialize)]
struct ResolvedEcho {
    omega: Option<f64>,
    quadrature_tolerance: f64,
    basis_size: usize,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_file(dir: &Path, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> breathingbox_core::Result<()>) -> Result<()> {
    let mut w = create(dir, name)?;
    body(&mut w).with_context(|| format!("writing {name}"))?;
    w.flush()?;
    log::info!("wrote {}", dir.join(name).display());
    Ok(())
}

fn basis_csv(dir: &Path, r: &Resolved) -> Result<()> {
    write_file(dir, "basis.csv", |w| export::write_basis(w, &r.basis))
}

fn matrix_csv(dir: &Path, r: &Resolved) -> Result<()> {
    let pos = position_matrix(&r.basis, &r.quad)?;
    write_file(dir, "dilation.csv", |w| export::write_matrix(w, &r.dilation))?;
    write_file(dir, "position.csv", |w| export::write_matrix(w, &pos))
}

fn spectrum(dir: &Path, r: &Resolved) -> Result<()> {
    let table = transition_frequencies(&r.basis, &r.dilation, COUPLING_THRESHOLD)?;
    println!("{:>8} {:>8} {:>24} {:>24}", "from", "to", "omega", "|D|");
    for t in &table.entries {
        println!(
            "{:>8} {:>8} {:>24} {:>24}",
            t.from.to_string(),
            t.to.to_string(),
            export::fmt_f64(t.omega),
            export::fmt_f64(t.coupling)
        );
    }
    write_file(dir, "spectrum.csv", |w| export::write_spectrum(w, &table))
}

fn evolve(dir: &Path, cfg: &RunConfig, r: &Resolved) -> Result<()> {
    let grid = TimeGrid::in_units(&r.model.drive, cfg.horizon_periods, cfg.steps_per_period)?
        .sampled_every(cfg.sample_every);
    let position = position_matrix(&r.basis, &r.quad)?;
    let write = |name: &str, traj: &Trajectory| {
        write_file(dir, name, |w| export::write_trajectory(w, traj, &r.basis, &r.tracked, Some(&position)))
    };
    if cfg.propagator.exact() {
        let traj = propagate_exact(&r.initial, &r.model, &grid)?;
        log::info!("exact propagation: max norm drift {:e}", traj.max_norm_drift());
        write("trajectory_exact.csv", &traj)?;
    }
    if cfg.propagator.first_order() {
        let traj = propagate_first_order(&r.initial, &r.model, &grid)?;
        write("trajectory_first_order.csv", &traj)?;
    }
    Ok(())
}

/// Returns the number of failed grid points.
fn scan(dir: &Path, cfg: &RunConfig, r: &Resolved, threads: Option<usize>) -> Result<usize> {
    let Some(sc) = &cfg.scan else {
        bail!("scan: config has no `scan` section");
    };
    let initial = cfg.scan_initial_mode().context("scan.initial_mode")?;
    let omegas = linear_grid(sc.omega_min, sc.omega_max, sc.points)?;
    let settings = ScanSettings {
        horizon_periods: sc.horizon_periods,
        steps_per_period: sc.steps_per_period.unwrap_or(cfg.steps_per_period),
        threads,
    };
    let result = resonance_scan(&r.model, initial, &omegas, &settings)?;
    let table = transition_frequencies(&r.basis, &r.dilation, COUPLING_THRESHOLD)?;
    let reachable = reachable_frequencies(&table, initial);
    write_file(dir, "scan.csv", |w| export::write_scan(w, &result))?;
    write_file(dir, "peaks.txt", |w| export::write_peaks(w, &result, &reachable))?;
    for p in &result.peaks {
        println!("peak omega={} height={}", export::fmt_f64(p.omega), export::fmt_f64(p.height));
    }
    Ok(result.failures.len())
}

fn execute(cli: &Cli) -> Result<usize> {
    let Some(path) = &cli.config else {
        bail!("--config PATH is required");
    };
    if cli.seedless {
        log::info!("seedless: no random number generator is used by any computation");
    }
    if cli.threads == Some(0) {
        bail!("--threads: must be at least 1");
    }
    let cfg = config::load(path)?;
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;

    let resolved = config::resolve(&cfg)?;
    let mut failures = 0;
    match cli.command {
        Command::Basis => basis_csv(&dir, &resolved)?,
        Command::Matrix => matrix_csv(&dir, &resolved)?,
        Command::Evolve => evolve(&dir, &cfg, &resolved)?,
        Command::Spectrum => spectrum(&dir, &resolved)?,
        Command::Scan => failures = scan(&dir, &cfg, &resolved, cli.threads)?,
        Command::Run => {
            basis_csv(&dir, &resolved)?;
            matrix_csv(&dir, &resolved)?;
            spectrum(&dir, &resolved)?;
            evolve(&dir, &cfg, &resolved)?;
            if cfg.scan.is_some() {
                failures = scan(&dir, &cfg, &resolved, cli.threads)?;
            }
        }
    }

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        config: &cfg,
        resolved: ResolvedEcho {
            omega: resolved.omega,
            quadrature_tolerance: resolved.quad.tolerance,
            basis_size: resolved.basis.len(),
        },
    };
    let mut w = create(&dir, "manifest.json")?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(failures)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("error: {n} scan point(s) failed; see peaks.txt");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
