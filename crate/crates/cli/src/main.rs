// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{AnalyzeArgs, EigenArgs, InferMagnetArgs, MagnetFlags, ReproduceArgs};
use error::CliError;
use output::{ensure_dir, write_atomic};

#[derive(Debug, Parser)]
#[command(name = "gyrolev", version, about = "Simulate and analyze librations of a levitated ferromagnet")]
struct Cli {
    /// Master seed; overrides the configuration.
    #[arg(long, global = true, env = "GYROLEV_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "GYROLEV_JOBS")]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "GYROLEV_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate every repetition of a run configuration into trace files.
    Simulate {
        /// JSON run configuration.
        config: PathBuf,
    },
    /// Infer magnet radius and magnetization from measured mode frequencies.
    InferMagnet(InferMagnetCli),
    /// Fit a directory of traces and infer the Einstein-de Haas frequency.
    Analyze(AnalyzeCli),
    /// Coupled libration frequencies and ellipticities.
    Eigenmodes(EigenCli),
    /// Simulate and analyze the four built-in particles against their published values.
    ReproduceTable(ReproduceCli),
}

#[derive(Debug, Args)]
struct InferMagnetCli {
    #[arg(long)]
    f_z_hz: f64,
    #[arg(long)]
    f_beta_hz: f64,
    #[arg(long)]
    f_alpha_hz: f64,
    /// Relative uncertainty of each measured frequency.
    #[arg(long, default_value_t = 0.01)]
    frequency_rel_sigma: f64,
    #[arg(long, default_value_t = 2.5)]
    cavity_radius_mm: f64,
    #[arg(long, default_value_t = 0.1)]
    cavity_rel_sigma: f64,
    #[arg(long, default_value_t = 7430.0)]
    density_kg_per_m3: f64,
    #[arg(long, default_value_t = 0.05)]
    density_rel_sigma: f64,
    #[arg(long, default_value_t = gyrolev::PhysicalConstants::G0_DEFAULT)]
    gravity_m_per_s2: f64,
    #[arg(long, default_value_t = gyrolev::uncertain::DEFAULT_MC_SAMPLES)]
    mc_samples: usize,
}

#[derive(Debug, Args)]
struct AnalyzeCli {
    /// Directory of trace files.
    trace_dir: PathBuf,
    /// Bare α frequency; defaults to the trace headers.
    #[arg(long)]
    f_alpha_hz: Option<f64>,
    /// Bare β frequency; defaults to the trace headers.
    #[arg(long)]
    f_beta_hz: Option<f64>,
    #[arg(long)]
    radius_um: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    radius_sigma_um: f64,
    #[arg(long)]
    magnetization_ka_per_m: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    magnetization_sigma_ka_per_m: f64,
    #[arg(long, default_value_t = 7430.0)]
    density_kg_per_m3: f64,
    #[arg(long, default_value_t = 0.0)]
    density_sigma_kg_per_m3: f64,
    /// Fit only lags within this many periods (default: all lags).
    #[arg(long)]
    window_periods: Option<f64>,
}

#[derive(Debug, Args)]
struct EigenCli {
    #[arg(long)]
    f_alpha_hz: f64,
    #[arg(long)]
    f_beta_hz: f64,
    #[arg(long, default_value_t = 0.0)]
    f_i_hz: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma_dot_rad_per_s: f64,
    #[arg(long, default_value_t = 0.0)]
    eps_alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    eps_beta: f64,
}

#[derive(Debug, Args)]
struct ReproduceCli {
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    noise_rms_v: Option<f64>,
    #[arg(long)]
    repetitions_alpha: Option<usize>,
    #[arg(long)]
    repetitions_beta: Option<usize>,
}

fn emit(report: &str, out: Option<&Path>, name: &str) -> Result<(), CliError> {
    print!("{report}");
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_atomic(&dir.join(name), report.as_bytes())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate { config } => {
            let out = out.ok_or_else(|| CliError::Config("simulate needs --out".into()))?;
            let report = commands::simulate(&config, out, cli.seed)?;
            print!("{}", report.render());
        }
        Command::InferMagnet(a) => {
            let report = commands::infer_magnet_cmd(&InferMagnetArgs {
                f_z_hz: a.f_z_hz,
                f_beta_hz: a.f_beta_hz,
                f_alpha_hz: a.f_alpha_hz,
                frequency_rel_sigma: a.frequency_rel_sigma,
                cavity_radius_mm: a.cavity_radius_mm,
                cavity_rel_sigma: a.cavity_rel_sigma,
                density_kg_per_m3: a.density_kg_per_m3,
                density_rel_sigma: a.density_rel_sigma,
                gravity_m_per_s2: a.gravity_m_per_s2,
                mc_samples: a.mc_samples,
                seed: cli.seed.unwrap_or(1),
            })?;
            emit(&report.render(), out, "magnet.txt")?;
        }
        Command::Analyze(a) => {
            let args = AnalyzeArgs {
                trace_dir: a.trace_dir,
                f_alpha_hz: a.f_alpha_hz,
                f_beta_hz: a.f_beta_hz,
                magnet: MagnetFlags {
                    radius_um: a.radius_um,
                    radius_sigma_um: a.radius_sigma_um,
                    magnetization_ka_per_m: a.magnetization_ka_per_m,
                    magnetization_sigma_ka_per_m: a.magnetization_sigma_ka_per_m,
                    density_kg_per_m3: a.density_kg_per_m3,
                    density_sigma_kg_per_m3: a.density_sigma_kg_per_m3,
                },
                window_periods: a.window_periods,
            };
            print!("{}", commands::analyze(&args, out)?.render());
        }
        Command::Eigenmodes(a) => {
            let report = commands::eigenmodes_cmd(&EigenArgs {
                f_alpha_hz: a.f_alpha_hz,
                f_beta_hz: a.f_beta_hz,
                f_i_hz: a.f_i_hz,
                gamma_dot_rad_per_s: a.gamma_dot_rad_per_s,
                eps_alpha: a.eps_alpha,
                eps_beta: a.eps_beta,
            })?;
            emit(&report.render(), out, "eigenmodes.txt")?;
        }
        Command::ReproduceTable(a) => {
            let outcome = commands::reproduce_table(
                &ReproduceArgs {
                    seed: cli.seed,
                    mc_samples: a.mc_samples,
                    noise_rms_v: a.noise_rms_v,
                    repetitions_alpha: a.repetitions_alpha,
                    repetitions_beta: a.repetitions_beta,
                },
                out,
            )?;
            print!("{}", outcome.table);
            if !outcome.all_pass {
                return Err(CliError::Analysis("at least one row disagrees with its published values".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
