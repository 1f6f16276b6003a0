//! Double-well target with exact energies: invariant-density check and the
//! coupled step-size study.

use std::io::Write;
use std::path::Path;

use anyhow::Result;
use mresgld::fmt_sig9;
use mresgld::replica::discretization::{deviation_ladder, strictly_decreasing};
use mresgld::targets::DoubleWell;
use mresgld::SwapConfig;

use crate::config::ExperimentConfig;
use crate::report::{burn_in_start, create, RunReport};
use crate::runner::{execute, planned_runs, RunOutput, Sigmas};
use crate::svg::{Frame, Plot};

const HIST_RANGE: (f64, f64) = (-2.5, 2.5);
const HIST_BINS: usize = 50;

/// Bin probabilities of the first coordinate under `exp(-U/tau)`.
pub fn exact_bin_masses(dw: &DoubleWell<f64>, tau: f64) -> Vec<f64> {
    let width = (HIST_RANGE.1 - HIST_RANGE.0) / HIST_BINS as f64;
    let sub = 200;
    let mut masses: Vec<f64> = (0..HIST_BINS)
        .map(|b| {
            let a = HIST_RANGE.0 + b as f64 * width;
            // midpoint rule on each bin
            (0..sub)
                .map(|k| dw.density(a + (k as f64 + 0.5) * width / sub as f64, tau))
                .sum::<f64>()
                * width
                / sub as f64
        })
        .collect();
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    masses
}

pub fn empirical_bin_masses(xs: &[f64]) -> Vec<f64> {
    let width = (HIST_RANGE.1 - HIST_RANGE.0) / HIST_BINS as f64;
    let mut counts = vec![0.0; HIST_BINS];
    for &x in xs {
        let b = ((x - HIST_RANGE.0) / width).floor();
        if b >= 0.0 && (b as usize) < HIST_BINS {
            counts[b as usize] += 1.0;
        }
    }
    let n = xs.len().max(1) as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    counts
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn write_samples(path: &Path, out: &RunOutput, dim: usize) -> Result<()> {
    let mut w = create(path)?;
    let coords: Vec<String> = (0..dim).map(|i| format!("x_{i}")).collect();
    writeln!(w, "step,{},energy,chain_id", coords.join(","))?;
    for (snaps, id) in [(&out.low, 0), (&out.high, 1)] {
        for s in snaps {
            let xs: Vec<String> = s.position.iter().map(|v| fmt_sig9(*v)).collect();
            writeln!(w, "{},{},{},{id}", s.step, xs.join(","), fmt_sig9(s.energy))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, dir: &Path, report: &mut RunReport) -> Result<()> {
    let sec = &cfg.double_well;
    let dw = DoubleWell { height: sec.height };
    let p = cfg.sampler_params()?;
    let sigmas = Sigmas { low: 0.0, high: 0.0 };
    let exact = exact_bin_masses(&dw, p.tau_low);
    let dim = sec.init_low.len();

    let mut hists = Vec::new();
    for kind in planned_runs(cfg) {
        let label = kind.label();
        let out = report.timed(label, || execute(kind, cfg, &dw, &dw, sigmas, &sec.init_low, &sec.init_high))?;
        let start = burn_in_start(out.low.len(), cfg.burn_in);
        let xs: Vec<f64> = out.low[start..].iter().map(|s| s.position[0]).collect();
        let emp = empirical_bin_masses(&xs);
        report.metric(label, "tv_distance_low", total_variation(&emp, &exact));
        let right = xs.iter().filter(|&&x| x > 0.0).count() as f64 / xs.len() as f64;
        report.metric(label, "right_well_fraction", right);
        if let Some(s) = &out.swap_stats {
            report.swaps.insert(label.to_string(), s.clone());
            report.metric(label, "swap_rate", s.rate);
        }
        let name = if out.is_main(cfg) {
            "samples.csv".to_string()
        } else {
            format!("samples_{label}.csv")
        };
        let path = dir.join(name);
        write_samples(&path, &out, dim)?;
        report.artifacts.push(path);
        if out.is_main(cfg) {
            let path = dir.join("swaplog.csv");
            let mut w = create(&path)?;
            mresgld::replica::write_swap_log(&mut w, &out.swaps)?;
            w.flush()?;
            report.artifacts.push(path);
        }
        hists.push((label, emp));
    }

    if !sec.coupled_etas.is_empty() {
        // Swap intensity 1 per unit time keeps the expected number of swaps
        // independent of the step size.
        let swap = SwapConfig::new(p.tau_low, p.tau_high, 1.0)?.with_weight(cfg.a1)?;
        let runs = report.timed("coupled_study", || {
            Ok(deviation_ladder(
                &dw,
                &swap,
                &sec.coupled_etas,
                sec.coupled_horizon,
                &sec.init_low,
                &sec.init_high,
                sec.coupled_paths,
                cfg.seed,
            )?)
        })?;
        let path = dir.join("coupled.csv");
        let mut w = create(&path)?;
        writeln!(w, "eta,mean_deviation,std_error,n_paths,swap_mismatches")?;
        for r in &runs {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_sig9(r.eta),
                fmt_sig9(r.mean_deviation),
                fmt_sig9(r.std_error),
                r.n_paths,
                r.swap_mismatches
            )?;
            report.metric("coupled", &format!("mean_deviation_eta_{}", r.eta), r.mean_deviation);
        }
        w.flush()?;
        report.artifacts.push(path);
        report.metric("coupled", "strictly_decreasing", f64::from(u8::from(strictly_decreasing(&runs))));
    }

    let width = (HIST_RANGE.1 - HIST_RANGE.0) / HIST_BINS as f64;
    let edges: Vec<f64> = (0..=HIST_BINS).map(|b| HIST_RANGE.0 + b as f64 * width).collect();
    let top = hists
        .iter()
        .flat_map(|(_, h)| h.iter())
        .chain(&exact)
        .fold(0.0_f64, |a, &b| a.max(b));
    let frame = Frame {
        x: HIST_RANGE,
        y: (0.0, top * 1.1 + 1e-12),
    };
    let mut plot = Plot::new(frame, "double well, low chain", "x_0", "bin mass");
    for (i, (label, h)) in hists.iter().enumerate() {
        plot.bars(&edges, h, i, label);
    }
    let centers: Vec<[f64; 2]> = exact
        .iter()
        .enumerate()
        .map(|(b, m)| [HIST_RANGE.0 + (b as f64 + 0.5) * width, *m])
        .collect();
    plot.line(&centers, 4, "exact");
    let path = dir.join("histogram.svg");
    std::fs::write(&path, plot.finish())?;
    report.artifacts.push(path);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_masses_are_symmetric_and_normalized() {
        let m = exact_bin_masses(&DoubleWell::default(), 0.5);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for b in 0..HIST_BINS / 2 {
            assert!((m[b] - m[HIST_BINS - 1 - b]).abs() < 1e-12);
        }
    }

    #[test]
    fn total_variation_extremes() {
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        let e = empirical_bin_masses(&[0.01, 0.02, 9.0]);
        assert!((e.iter().sum::<f64>() - 2.0 / 3.0).abs() < 1e-12);
    }
}
