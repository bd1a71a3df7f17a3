//! `orbitforge`: simulate the Lorenz system, segment it on its similarity
//! signature, close and verify its short periodic orbits.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod plots;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orbitforge::segment::DistanceSpace;
use orbitforge::signature::Method;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "orbitforge", version, about = "Short periodic orbits of the Lorenz system")]
struct Cli {
    /// Flat TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Integration step.
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    sigma: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    eta: Option<f64>,
    #[arg(long = "r", global = true, allow_negative_numbers = true)]
    r: Option<f64>,
    /// Total integration time, transient included.
    #[arg(long, global = true)]
    sim_time: Option<f64>,
    /// Time discarded before analysis.
    #[arg(long, global = true)]
    transient: Option<f64>,
    /// Output directory.
    #[arg(long = "out", global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Signature method: analytic or discrete.
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Window distance space: signature or phase.
    #[arg(long, global = true)]
    distance: Option<DistanceSpace>,
    /// Also write gnuplot scripts next to the CSV outputs.
    #[arg(long, global = true)]
    gnuplot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a trajectory and write it as CSV.
    Simulate,
    /// Similarity signature curve of the post-transient trajectory.
    Signature {
        /// Also write the three coordinate-plane projections.
        #[arg(long)]
        projections: bool,
    },
    /// Sliding-window segmentation and quasi-periodic arcs.
    Segment {
        /// Largest endpoint gap of a reported arc.
        #[arg(long)]
        gap_tol: Option<f64>,
    },
    /// Close every orbit up to period `pmax` by multiple shooting.
    FindOrbits {
        #[arg(long)]
        pmax: Option<usize>,
    },
    /// Krawczyk verification of orbit JSON files.
    Verify {
        #[arg(required = true, value_name = "ORBIT_JSON")]
        files: Vec<PathBuf>,
        #[arg(long)]
        radius: Option<f64>,
    },
    /// `find-orbits` followed by `verify` on every orbit found.
    Census {
        #[arg(long)]
        pmax: Option<usize>,
        #[arg(long)]
        radius: Option<f64>,
    },
}

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<orbitforge::Error> for CliError {
    fn from(e: orbitforge::Error) -> Self {
        use orbitforge::Error as E;
        match e {
            E::InvalidInput(_) | E::InvalidSymbol(_) => CliError::Config(e.to_string()),
            E::Io(_) | E::Parse(_) => CliError::Io(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.dt {
        cfg.dt = v;
    }
    if let Some(v) = cli.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = cli.eta {
        cfg.eta = v;
    }
    if let Some(v) = cli.r {
        cfg.r = v;
    }
    if let Some(v) = cli.sim_time {
        cfg.sim_time = v;
    }
    if let Some(v) = cli.transient {
        cfg.transient = v;
    }
    if let Some(v) = &cli.out {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = cli.method {
        cfg.method = v;
    }
    if let Some(v) = cli.distance {
        cfg.distance = v;
    }
    match &cli.command {
        Command::Segment { gap_tol: Some(v) } => cfg.gap_tol = *v,
        Command::FindOrbits { pmax: Some(v) } => cfg.p_max = *v,
        Command::Verify { radius: Some(v), .. } => cfg.krawczyk_radius = *v,
        Command::Census { pmax, radius } => {
            if let Some(v) = pmax {
                cfg.p_max = *v;
            }
            if let Some(v) = radius {
                cfg.krawczyk_radius = *v;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn threads() -> Result<Option<usize>, CliError> {
    match std::env::var("ORBITFORGE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("ORBITFORGE_THREADS must be a count, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = build_config(&cli)?;
    let threads = threads()?;
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", cfg.output_dir.display())))?;
    let gnuplot = cli.gnuplot;
    orbitforge::par::with_threads(threads, || match &cli.command {
        Command::Simulate => commands::simulate(&cfg, gnuplot),
        Command::Signature { projections } => commands::signature(&cfg, gnuplot, *projections),
        Command::Segment { .. } => commands::segment(&cfg, gnuplot),
        Command::FindOrbits { .. } => commands::find_orbits(&cfg, gnuplot).map(|_| ()),
        Command::Verify { files, .. } => commands::verify(&cfg, files),
        Command::Census { .. } => commands::census(&cfg, gnuplot),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("orbitforge: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
