//! Bayesian PINN training runs with relative-error and coefficient tracking.

use std::io::Write;
use std::path::Path;

use anyhow::Result;
use mresgld::pinn::{
    calibrate_sigma, write_training_log, Fidelity, PinnLossSpec, PinnProblem, PredictionSummary, TimeScaling,
    TrainingRow,
};
use mresgld::rng::{stream_rng, streams};
use mresgld::sampler::Snapshot;

use crate::config::{ExperimentConfig, ExperimentId, TimeAxis};
use crate::report::{burn_in_start, create, mean_var, RunReport};
use crate::runner::{execute, planned_runs, RunOutput, Sigmas};
use crate::svg::{Frame, Plot};

fn build(cfg: &ExperimentConfig, fidelity: Fidelity) -> Result<PinnProblem<f64>> {
    let scaling = match cfg.pinn.time_axis {
        TimeAxis::Physical => TimeScaling::Physical,
        TimeAxis::Unit => TimeScaling::Unit,
    };
    let problem = match cfg.experiment {
        ExperimentId::QgdForward => PinnProblem::qgd_forward(fidelity, scaling),
        ExperimentId::QgdInverse => PinnProblem::qgd_inverse(fidelity, scaling),
        _ => PinnProblem::nonlinear_inverse(fidelity),
    };
    let spec = PinnLossSpec {
        sigma_u: cfg.pinn.sigma_u,
        sigma_f: cfg.pinn.sigma_f,
        sigma_b: cfg.pinn.sigma_b,
        prior_std: cfg.pinn.prior_std,
        ..PinnLossSpec::default()
    };
    Ok(problem.with_spec(spec)?)
}

struct Tracked {
    errors: Vec<f64>,
    alphas: Vec<f64>,
}

fn track(problem: &PinnProblem<f64>, snaps: &[Snapshot<f64>]) -> Result<Tracked> {
    let mut errors = Vec::with_capacity(snaps.len());
    let mut alphas = Vec::new();
    for s in snaps {
        errors.push(problem.relative_error(&s.position)?);
        if problem.pde.trainable() {
            alphas.push(problem.alpha(&s.position));
        }
    }
    Ok(Tracked { errors, alphas })
}

fn training_rows(out: &RunOutput, low: &Tracked, high: Option<&Tracked>) -> Vec<TrainingRow> {
    let mut rows = Vec::new();
    let chains = [(&out.low, Some(low), 0usize), (&out.high, high, 1)];
    for (snaps, tracked, id) in chains {
        let Some(t) = tracked else { continue };
        let mut prev = 0;
        for (s, e) in snaps.iter().zip(&t.errors) {
            rows.push(TrainingRow {
                epoch: s.step,
                relative_error: *e,
                energy: s.energy,
                chain_id: id,
                swapped: out.swapped_between(prev, s.step),
            });
            prev = s.step;
        }
    }
    rows
}

pub fn run(cfg: &ExperimentConfig, dir: &Path, report: &mut RunReport) -> Result<()> {
    let (fine, coarse) = report.timed("setup", || Ok((build(cfg, Fidelity::Fine)?, build(cfg, Fidelity::Coarse)?)))?;
    let mut sigmas = Sigmas {
        low: cfg.sigma_low,
        high: cfg.sigma_high,
    };
    if cfg.auto_calibrate {
        let rms = report.timed("calibration", || {
            Ok(calibrate_sigma(
                &fine,
                &coarse,
                cfg.calibration_draws,
                &mut stream_rng(cfg.seed, streams::CALIBRATION),
                |r| fine.init_params(r),
            )?)
        })?;
        report.metric("calibration", "coarse_vs_fine_rms", rms);
        sigmas.high = rms.max(sigmas.low);
    }
    report.metric("calibration", "sigma_low", sigmas.low);
    report.metric("calibration", "sigma_high", sigmas.high);
    let fine = fine.with_sigma(sigmas.low);
    let coarse = coarse.with_sigma(sigmas.high);
    let init = fine.init_params(&mut stream_rng(cfg.seed, streams::INIT));
    report.metric("setup", "n_params", init.len() as f64);

    let mut curves = Vec::new();
    let mut main_summary = None;
    for kind in planned_runs(cfg) {
        let label = kind.label();
        let out = report.timed(label, || execute(kind, cfg, &fine, &coarse, sigmas, &init, &init))?;
        let low = report.timed("evaluation", || track(&fine, &out.low))?;
        let high = if kind.is_pair() {
            Some(report.timed("evaluation", || track(&fine, &out.high))?)
        } else {
            None
        };
        let start = burn_in_start(out.low.len(), cfg.burn_in);
        let (m, v) = mean_var(&low.errors[start..]);
        report.metric(label, "relative_error_mean", m);
        report.metric(label, "relative_error_var", v);
        report.metric(label, "final_relative_error", *low.errors.last().unwrap_or(&f64::NAN));
        report.metric(label, "seconds_per_step", out.seconds / cfg.steps as f64);
        if !low.alphas.is_empty() {
            let (am, av) = mean_var(&low.alphas[start..]);
            report.metric(label, "alpha_mean", am);
            report.metric(label, "alpha_var", av);
        }
        if let Some(s) = &out.swap_stats {
            report.swaps.insert(label.to_string(), s.clone());
            report.metric(label, "swap_rate", s.rate);
        }
        let post: Vec<Vec<f64>> = out.low[start..].iter().map(|s| s.position.clone()).collect();
        let summary = PredictionSummary::from_samples(&fine, &post)?;
        report.metric(label, "prediction_variance_mean", summary.mean_variance());

        let name = if out.is_main(cfg) {
            main_summary = Some(summary);
            "samples.csv".to_string()
        } else {
            format!("samples_{label}.csv")
        };
        let path = dir.join(name);
        let mut w = create(&path)?;
        write_training_log(&mut w, &training_rows(&out, &low, high.as_ref()))?;
        w.flush()?;
        report.artifacts.push(path);
        if out.is_main(cfg) {
            let path = dir.join("swaplog.csv");
            let mut w = create(&path)?;
            mresgld::replica::write_swap_log(&mut w, &out.swaps)?;
            w.flush()?;
            report.artifacts.push(path);
        }
        let curve: Vec<[f64; 2]> = out.low.iter().zip(&low.errors).map(|(s, e)| [s.step as f64, *e]).collect();
        curves.push((label, curve));
    }

    if let Some(summary) = main_summary {
        let path = dir.join("predictions.csv");
        let mut w = create(&path)?;
        summary.write_csv(&mut w, cfg.experiment != ExperimentId::NonlinearInverse)?;
        w.flush()?;
        report.artifacts.push(path);

        let xs: Vec<f64> = summary.grid.iter().map(|p| p[0]).collect();
        let frame = Frame::fit(
            xs.iter().copied(),
            summary.mean.iter().chain(&summary.exact).copied(),
        );
        let mut plot = Plot::new(frame, &format!("{}: posterior mean", cfg.experiment.name()), "x", "u");
        let pts = |v: &[f64]| xs.iter().zip(v).map(|(x, y)| [*x, *y]).collect::<Vec<_>>();
        plot.line(&pts(&summary.mean), 0, "posterior mean");
        plot.line(&pts(&summary.exact), 1, "exact");
        let path = dir.join("prediction.svg");
        std::fs::write(&path, plot.finish())?;
        report.artifacts.push(path);
    }

    let frame = Frame::fit(
        curves.iter().flat_map(|(_, c)| c.iter().map(|p| p[0])),
        curves.iter().flat_map(|(_, c)| c.iter().map(|p| p[1])),
    );
    let mut plot = Plot::new(frame, &format!("{}: relative error", cfg.experiment.name()), "step", "relative error");
    for (i, (label, c)) in curves.iter().enumerate() {
        plot.line(c, i, label);
    }
    let path = dir.join("error_curve.svg");
    std::fs::write(&path, plot.finish())?;
    report.artifacts.push(path);
    Ok(())
}
