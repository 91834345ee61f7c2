use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qmeasure::config::{Preset, RunConfig};
use qmeasure::run;

/// Kernel-measure Q-learning experiments.
#[derive(Parser)]
#[command(name = "qmeasure", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: paper_baseline or paper_small.
    #[arg(long, value_name = "NAME")]
    preset: Option<Preset>,
    /// Overrides the master seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train on one behavior trajectory.
    Train(Common),
    /// Solve the grid dynamic program for the inventory model.
    DpBaseline(Common),
    /// Evaluate saved checkpoints.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint files; defaults to every checkpoint under the output directory.
        #[arg(long = "checkpoint", value_name = "PATH")]
        checkpoints: Vec<PathBuf>,
    },
    /// Behavior-policy visitation histograms.
    Diagnostics(Common),
    /// Smoothing-bias functional over a list of bandwidths.
    XiSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated bandwidths; defaults to `xi.sigmas` of the config.
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        sigmas: Vec<f64>,
    },
    /// Print a preset as TOML.
    ShowConfig {
        #[arg(long, value_name = "NAME", default_value = "paper_small")]
        preset: Preset,
    },
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut config = match (&common.config, common.preset) {
        (Some(path), _) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(p)) => RunConfig::preset(p),
        (None, None) => bail!("pass --config PATH or --preset NAME"),
    };
    if let Some(seed) = common.seed {
        config.seeds.master = seed;
    }
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    config.validate()?;
    let out = config.output.dir.clone();
    Ok((config, out))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let (config, out) = load(&common)?;
            let s = run::cmd_train(&config, &out)?;
            for r in &s.reports {
                println!(
                    "n={:<8} return {:+.4} ± {:.4}  rmse {}",
                    r.iteration,
                    r.mc_return_mean,
                    r.mc_return_stderr,
                    r.rmse_vs_reference.map_or("-".into(), |x| format!("{x:.4}"))
                );
            }
            if let Some(u) = s.uniform_return {
                println!("uniform policy return {:+.4} ± {:.4}", u.mean, u.stderr);
            }
            println!("wrote {}", out.display());
        }
        Command::DpBaseline(common) => {
            let (config, out) = load(&common)?;
            let t = run::cmd_dp_baseline(&config, &out)?;
            println!(
                "{} values, {} sweeps, residual {:e}{}",
                t.values.len(),
                t.sweeps,
                t.residual,
                if t.converged { "" } else { " (not converged)" }
            );
        }
        Command::Evaluate { common, checkpoints } => {
            let (config, out) = load(&common)?;
            for r in run::cmd_evaluate(&config, &checkpoints, &out)? {
                println!("n={:<8} return {:+.4} ± {:.4}", r.iteration, r.mc_return_mean, r.mc_return_stderr);
            }
        }
        Command::Diagnostics(common) => {
            let (config, out) = load(&common)?;
            for r in run::cmd_diagnostics(&config, &out)?.rows {
                println!(
                    "{:<9} coverage {:.4}  top-right share {:.5}  clip rate {:.5}",
                    r.scenario, r.coverage, r.top_right_share, r.clip_rate
                );
            }
        }
        Command::XiSweep { common, sigmas } => {
            let (config, out) = load(&common)?;
            let sigmas = if sigmas.is_empty() { config.xi.sigmas.clone() } else { sigmas };
            for r in run::cmd_xi_sweep(&config, &sigmas, &out)? {
                println!("sigma {:<8} xi {:.6}  xi/sigma^alpha {:.4}", r.sigma, r.xi, r.xi_over_sigma_alpha);
            }
        }
        Command::ShowConfig { preset } => print!("{}", RunConfig::preset(preset).to_toml_string()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
