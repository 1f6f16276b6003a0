use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use mresgld_cli::{default_config, run_experiment, verify_swap, ExperimentConfig, ExperimentId, Overrides};

#[derive(Parser)]
#[command(name = "mresgld", version, about = "Multi-variance replica-exchange SGLD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Monte-Carlo check of the swap estimator; exits nonzero if any cell fails.
    VerifySwap {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// List experiment ids with their default configs.
    ListExperiments,
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the number of sampler steps.
    #[arg(long)]
    steps: Option<u64>,
}

fn load(path: &PathBuf, flags: Flags) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    Overrides {
        seed: flags.seed,
        steps: flags.steps,
        out_dir: flags.out_dir,
    }
    .apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { config, flags } => {
            let cfg = load(&config, flags)?;
            let dir = cfg.output_dir();
            let report = run_experiment(&cfg, &dir)?;
            println!("{} finished; artifacts in {}", report.experiment, dir.display());
            for (run, metrics) in &report.metrics {
                for (name, v) in metrics {
                    println!("  {run}.{name} = {v:.6}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifySwap { config, flags } => {
            let cfg = load(&config, flags)?;
            let dir = cfg.output_dir();
            let (report, passed) = verify_swap(&cfg, &dir)?;
            let summary = &report.metrics["summary"];
            println!(
                "{} cells, max |z| = {:.3}, failing = {}",
                summary["cells"], summary["max_abs_z"], summary["failing_cells"]
            );
            println!("{}", if passed { "PASS" } else { "FAIL" });
            Ok(if passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::ListExperiments => {
            for id in ExperimentId::ALL {
                let cfg = ExperimentConfig::from_json(default_config(id))?;
                println!("{:<18} {}", id.name(), id.description());
                println!("{:<18} default: sampler {:?}, {} steps", "", cfg.sampler, cfg.steps);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
