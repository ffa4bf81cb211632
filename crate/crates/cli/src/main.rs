//! Command-line harness for the anisotropic FEM estimator experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical or I/O failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{GenerateMeshArgs, VerifyTraceArgs};
use config::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "aniso", version, about = "P1 FEM with anisotropic residual error estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh file (uniform, shishkin or an isolated patch).
    GenerateMesh {
        #[arg(long, default_value = "uniform")]
        kind: String,
        /// Cells per side for uniform/shishkin generators.
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        /// Shishkin grading factor.
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
        /// Patch diameter (patch kind only).
        #[arg(long, default_value_t = 1.0)]
        diameter: f64,
        /// Patch width (patch kind only).
        #[arg(long, default_value_t = 1.0)]
        width: f64,
        /// Patch triangle count (patch kind only).
        #[arg(long, default_value_t = 6)]
        triangles: usize,
        /// Patch style: fan | strip.
        #[arg(long, default_value = "fan")]
        style: String,
        /// Patch shear toward quasi-non-obtuse corners.
        #[arg(long, default_value_t = 0.0)]
        obtuseness: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the configured problem and write the nodal solution JSON.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = "solution.json")]
        out: PathBuf,
    },
    /// Solve, estimate under the configured schemes, write reports.
    Estimate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        /// Output directory override.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Fuzz the trace/auxiliary inequality families across aspect ratios.
    VerifyTrace {
        /// Comma list of families or `all`
        /// (divergence, aux-a, aux-b, trace-l1, trace-sq).
        #[arg(long, default_value = "all")]
        families: String,
        #[arg(long, default_value = "1,10,100,1000,10000")]
        aspects: String,
        /// Random polynomials per geometry (monomials always included).
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "verify_trace.json")]
        out: PathBuf,
    },
    /// Run the (epsilon, n) sweep from the config and aggregate a CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Per-node jump terms under all three weight schemes.
    CompareWeights {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn load_config(
    path: &Option<PathBuf>,
    epsilon: Option<f64>,
    n: Option<usize>,
    out_dir: &Option<PathBuf>,
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_file(p.to_str().unwrap_or_default())?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_overrides(epsilon, n);
    if let Some(dir) = out_dir {
        cfg.output.dir = dir.display().to_string();
    }
    Ok(cfg)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::GenerateMesh {
            kind,
            n,
            epsilon,
            sigma,
            diameter,
            width,
            triangles,
            style,
            obtuseness,
            out,
        } => commands::cmd_generate_mesh(&GenerateMeshArgs {
            kind: kind.clone(),
            n: *n,
            epsilon: *epsilon,
            sigma: *sigma,
            diameter: *diameter,
            width: *width,
            triangles: *triangles,
            style: style.clone(),
            obtuseness: *obtuseness,
            out: out.clone(),
        }),
        Command::Solve { config, epsilon, n, out } => {
            let cfg = load_config(config, *epsilon, *n, &None)?;
            commands::cmd_solve(&cfg, out)
        }
        Command::Estimate { config, epsilon, n, out_dir } => {
            let cfg = load_config(config, *epsilon, *n, out_dir)?;
            let path = commands::cmd_estimate(&cfg)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        Command::VerifyTrace { families, aspects, samples, seed, out } => {
            commands::cmd_verify_trace(&VerifyTraceArgs {
                families: families.clone(),
                aspects: aspects.clone(),
                samples: *samples,
                seed: *seed,
                out: out.clone(),
            })
        }
        Command::Sweep { config, out_dir } => {
            let cfg = load_config(&Some(config.clone()), None, None, out_dir)?;
            let path = commands::cmd_sweep(&cfg)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        Command::CompareWeights { config, epsilon, n, out_dir } => {
            let cfg = load_config(config, *epsilon, *n, out_dir)?;
            let path = commands::cmd_compare_weights(&cfg)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
