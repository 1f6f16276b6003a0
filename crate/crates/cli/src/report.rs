//! Run report, metrics table and artifact bookkeeping.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use mresgld::fmt_sig9;
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Clone, Debug, Default, Serialize)]
pub struct SwapStats {
    pub attempts: u64,
    pub swaps: u64,
    pub rate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub sampler: String,
    pub seed: u64,
    pub steps: u64,
    pub burn_in: f64,
    /// `run -> metric -> value`; every mean and variance is post-burn-in.
    pub metrics: BTreeMap<String, BTreeMap<String, f64>>,
    pub swaps: BTreeMap<String, SwapStats>,
    pub wall_clock_seconds: BTreeMap<String, f64>,
    pub artifacts: Vec<PathBuf>,
    pub config: ExperimentConfig,
}

impl RunReport {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: cfg.experiment.name().to_string(),
            sampler: serde_json::to_value(cfg.sampler)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            seed: cfg.seed,
            steps: cfg.steps,
            burn_in: cfg.burn_in,
            metrics: BTreeMap::new(),
            swaps: BTreeMap::new(),
            wall_clock_seconds: BTreeMap::new(),
            artifacts: Vec::new(),
            config: cfg.clone(),
        }
    }

    pub fn metric(&mut self, run: &str, name: &str, value: f64) {
        self.metrics.entry(run.to_string()).or_default().insert(name.to_string(), value);
    }

    pub fn get(&self, run: &str, name: &str) -> Option<f64> {
        self.metrics.get(run)?.get(name).copied()
    }

    /// Runs `f` and records its wall-clock time under `phase`.
    pub fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().with_context(|| format!("phase `{phase}` failed"))?;
        *self.wall_clock_seconds.entry(phase.to_string()).or_default() += start.elapsed().as_secs_f64();
        Ok(out)
    }

    pub fn write_metrics_csv(&self, path: &Path) -> Result<()> {
        let mut w = create(path)?;
        writeln!(w, "run,metric,value")?;
        for (run, values) in &self.metrics {
            for (name, v) in values {
                writeln!(w, "{run},{name},{}", fmt_sig9(*v))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Mean and unbiased variance; variance is 0 for fewer than two values.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() < 2 {
        0.0
    } else {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    };
    (mean, var)
}

/// Index of the first snapshot kept after burn-in.
pub fn burn_in_start(len: usize, burn_in: f64) -> usize {
    (burn_in * len as f64).floor() as usize
}
