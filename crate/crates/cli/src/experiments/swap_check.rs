//! Monte-Carlo unbiasedness of the multi-variance swap estimator over a grid
//! of temperatures, sigmas and weights.

use std::io::Write;
use std::path::Path;

use anyhow::Result;
use mresgld::fmt_sig9;
use mresgld::replica::verification::{default_grid, verify_grid, UnbiasednessReport};
use mresgld::replica::CombineSign;

use crate::config::ExperimentConfig;
use crate::report::{create, RunReport};
use crate::svg::{Frame, Plot};

pub fn run(cfg: &ExperimentConfig, dir: &Path, report: &mut RunReport) -> Result<UnbiasednessReport> {
    let sign = if cfg.verify.negate_sign {
        CombineSign::Minus
    } else {
        CombineSign::Plus
    };
    let result = report.timed("verification", || {
        Ok(verify_grid(&default_grid(), cfg.verify.draws, cfg.seed, sign, cfg.verify.z_threshold))
    })?;

    let path = dir.join("cells.csv");
    let mut w = create(&path)?;
    writeln!(w, "cell,tau_low,tau_high,sigma1,sigma2,a1,u_low,u_high,exact,mean,std_error,z")?;
    for (i, c) in result.cells.iter().enumerate() {
        let s = &c.cell;
        let vals: Vec<String> = [
            s.tau_low, s.tau_high, s.sigma1, s.sigma2, s.a1, s.u_low, s.u_high, c.exact, c.mean, c.std_error, c.z,
        ]
        .iter()
        .map(|v| fmt_sig9(*v))
        .collect();
        writeln!(w, "{i},{}", vals.join(","))?;
        report.metric("cells", &format!("z_{i:02}"), c.z);
    }
    w.flush()?;
    report.artifacts.push(path);

    report.metric("summary", "cells", result.cells.len() as f64);
    report.metric("summary", "max_abs_z", result.max_abs_z());
    report.metric("summary", "failing_cells", result.failing_cells().count() as f64);
    report.metric("summary", "passed", f64::from(u8::from(result.passed())));

    let zs: Vec<f64> = result.cells.iter().map(|c| c.z).collect();
    let edges: Vec<f64> = (0..=zs.len()).map(|i| i as f64).collect();
    let lim = result.max_abs_z().max(cfg.verify.z_threshold) * 1.1;
    let mut plot = Plot::new(
        Frame {
            x: (0.0, zs.len() as f64),
            y: (-lim, lim),
        },
        "swap estimator z-scores per cell",
        "cell",
        "z",
    );
    plot.bars(&edges, &zs, 0, "z");
    let t = cfg.verify.z_threshold;
    plot.line(&[[0.0, t], [zs.len() as f64, t]], 1, "threshold");
    plot.line(&[[0.0, -t], [zs.len() as f64, -t]], 1, "threshold");
    let path = dir.join("zscores.svg");
    std::fs::write(&path, plot.finish())?;
    report.artifacts.push(path);
    Ok(result)
}
