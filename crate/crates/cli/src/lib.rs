//! Experiment runner: reads a JSON config, runs the requested experiment and
//! writes CSV, JSON and SVG artifacts.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub mod config;
pub mod experiments;
pub mod report;
pub mod runner;
pub mod svg;

pub use config::{ExperimentConfig, ExperimentId, SamplerKind};
pub use report::RunReport;

/// Command-line overrides applied on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.steps {
            cfg.steps = n;
        }
        if let Some(d) = &self.out_dir {
            cfg.output_dir = Some(d.clone());
        }
    }
}

/// Shipped default config for an experiment.
pub fn default_config(id: ExperimentId) -> &'static str {
    match id {
        ExperimentId::TwoMode => include_str!("../configs/two_mode.json"),
        ExperimentId::InfiniteMode => include_str!("../configs/infinite_mode.json"),
        ExperimentId::QgdForward => include_str!("../configs/qgd_forward.json"),
        ExperimentId::QgdInverse => include_str!("../configs/qgd_inverse.json"),
        ExperimentId::NonlinearInverse => include_str!("../configs/nonlinear_inverse.json"),
        ExperimentId::SwapUnbiasedness => include_str!("../configs/swap_unbiasedness.json"),
        ExperimentId::DoubleWell => include_str!("../configs/double_well.json"),
    }
}

/// Validates `cfg`, runs it and writes every artifact into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut report = RunReport::new(cfg);
    match cfg.experiment {
        ExperimentId::TwoMode | ExperimentId::InfiniteMode => experiments::inverse::run(cfg, out_dir, &mut report)?,
        ExperimentId::QgdForward | ExperimentId::QgdInverse | ExperimentId::NonlinearInverse => {
            experiments::pinn::run(cfg, out_dir, &mut report)?
        }
        ExperimentId::SwapUnbiasedness => {
            experiments::swap_check::run(cfg, out_dir, &mut report)?;
        }
        ExperimentId::DoubleWell => experiments::double_well::run(cfg, out_dir, &mut report)?,
    }
    finish(&mut report, out_dir)?;
    Ok(report)
}

/// Runs the swap-estimator check. The returned flag is false when any cell
/// exceeds the z threshold.
pub fn verify_swap(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(RunReport, bool)> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut report = RunReport::new(cfg);
    let result = experiments::swap_check::run(cfg, out_dir, &mut report)?;
    finish(&mut report, out_dir)?;
    Ok((report, result.passed()))
}

fn finish(report: &mut RunReport, out_dir: &Path) -> Result<()> {
    let metrics = out_dir.join("metrics.csv");
    let json = out_dir.join("report.json");
    report.artifacts.push(metrics.clone());
    report.artifacts.push(json.clone());
    report.write_metrics_csv(&metrics)?;
    report.write_json(&json)
}
