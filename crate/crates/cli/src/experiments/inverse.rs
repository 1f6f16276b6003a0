//! Source inversion: two isolated solutions or a circle of solutions.

use std::io::Write;
use std::path::Path;

use anyhow::Result;
use mresgld::inverse::{
    calibrate_sigmas, infinite_mode_circle, make_infinite_mode_problem, make_two_mode_problem, mode_coverage,
    two_mode_locations, write_samples_csv, CoverageReport, Evaluator, Fidelity, ModeDiagnostics, ModeTarget,
    PosteriorEnergy, SampleRow,
};
use mresgld::replica::write_swap_log;
use mresgld::rng::{stream_rng, streams};

use crate::config::{EvaluatorKind, ExperimentConfig, ExperimentId};
use crate::report::{burn_in_start, create, RunReport};
use crate::runner::{execute, planned_runs, RunOutput, Sigmas};
use crate::svg::{Frame, Plot};

fn sample_rows(out: &RunOutput) -> Vec<SampleRow<f64>> {
    let chains = [(&out.low, 0), (&out.high, 1)];
    chains
        .iter()
        .flat_map(|(snaps, id)| {
            snaps.iter().map(move |s| SampleRow {
                step: s.step,
                position: [s.position[0], s.position[1]],
                energy: s.energy,
                chain_id: *id,
            })
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig, dir: &Path, report: &mut RunReport) -> Result<()> {
    let evaluator = match cfg.inverse.evaluator {
        EvaluatorKind::Reduced => Evaluator::Reduced,
        EvaluatorKind::TimeStepping => Evaluator::TimeStepping,
    };
    let (fine, coarse, target, default_init) = report.timed("setup", || {
        let problem = match cfg.experiment {
            ExperimentId::TwoMode => make_two_mode_problem::<f64>()?,
            _ => make_infinite_mode_problem::<f64>()?,
        }
        .with_obs_sigma(cfg.inverse.obs_sigma)?;
        let fine = PosteriorEnergy::new(problem.clone(), Fidelity::Fine, evaluator)?;
        let coarse = PosteriorEnergy::new(problem, Fidelity::Coarse, evaluator)?;
        let (target, init) = match cfg.experiment {
            ExperimentId::TwoMode => {
                let modes = two_mode_locations::<f64>();
                (ModeTarget::Points(modes.to_vec()), modes[0])
            }
            _ => {
                let (center, radius) = infinite_mode_circle::<f64>();
                (ModeTarget::Circle { center, radius }, [center[0] + radius, center[1]])
            }
        };
        Ok((fine, coarse, target, init))
    })?;

    let mut sigmas = Sigmas {
        low: cfg.sigma_low,
        high: cfg.sigma_high,
    };
    if cfg.auto_calibrate {
        let cal = report.timed("calibration", || {
            Ok(calibrate_sigmas(
                &fine,
                &coarse,
                cfg.calibration_draws,
                &mut stream_rng(cfg.seed, streams::CALIBRATION),
            )?)
        })?;
        sigmas.high = cal.coarse_rms.max(sigmas.low);
        report.metric("calibration", "fine_vs_closed_form_rms", cal.fine_rms);
        report.metric("calibration", "coarse_vs_fine_rms", cal.coarse_rms);
    }
    report.metric("calibration", "sigma_low", sigmas.low);
    report.metric("calibration", "sigma_high", sigmas.high);
    let fine = fine.with_sigma(sigmas.low)?;
    let coarse = coarse.with_sigma(sigmas.high)?;
    let init = cfg.inverse.init.unwrap_or(default_init);

    let mut outputs = Vec::new();
    for kind in planned_runs(cfg) {
        let (f0, c0) = (fine.evaluations(), coarse.evaluations());
        let out = report.timed(kind.label(), || execute(kind, cfg, &fine, &coarse, sigmas, &init, &init))?;
        let label = kind.label();
        let (df, dc) = ((fine.evaluations() - f0) as f64, (coarse.evaluations() - c0) as f64);
        // Forward-solve work in node-evaluations, a hardware-free cost measure.
        let work = df * fine.n_nodes() as f64 + dc * coarse.n_nodes() as f64;
        report.metric(label, "seconds_per_step", out.seconds / cfg.steps as f64);
        report.metric(label, "solve_seconds_per_step", out.model_seconds / cfg.steps as f64);
        report.metric(label, "node_work_per_step", work / cfg.steps as f64);
        report.metric(label, "rejection_rate_low", out.rejected_low as f64 / cfg.steps as f64);
        if kind.is_pair() {
            report.metric(label, "rejection_rate_high", out.rejected_high as f64 / cfg.steps as f64);
        }
        if let Some(s) = &out.swap_stats {
            report.swaps.insert(label.to_string(), s.clone());
            report.metric(label, "swap_rate", s.rate);
        }
        let pts: Vec<[f64; 2]> = out.low.iter().map(|s| [s.position[0], s.position[1]]).collect();
        let diag = ModeDiagnostics::after_burn_in(&pts, cfg.burn_in, target.clone(), cfg.inverse.capture_radius)?;
        match mode_coverage(&diag)? {
            CoverageReport::Modes {
                hit_fractions,
                n_samples,
            } => {
                for (i, f) in hit_fractions.iter().enumerate() {
                    report.metric(label, &format!("hit_fraction_mode_{i}"), *f);
                }
                report.metric(label, "post_burn_in_samples", n_samples as f64);
            }
            CoverageReport::Circle {
                angular_coverage,
                bins_hit,
                near_fraction,
                n_samples,
            } => {
                report.metric(label, "angular_coverage", angular_coverage);
                report.metric(label, "bins_hit", bins_hit as f64);
                report.metric(label, "near_fraction", near_fraction);
                report.metric(label, "post_burn_in_samples", n_samples as f64);
            }
        }
        let start = burn_in_start(out.low.len(), cfg.burn_in);
        let post = &out.low[start..];
        for (axis, name) in [(0, "x"), (1, "y")] {
            let v: Vec<f64> = post.iter().map(|s| s.position[axis]).collect();
            let (m, var) = crate::report::mean_var(&v);
            report.metric(label, &format!("{name}_mean"), m);
            report.metric(label, &format!("{name}_var"), var);
        }
        outputs.push(out);
    }

    if let (Some(m), Some(r)) = (report.get("mresgld", "seconds_per_step"), report.get("resgld", "seconds_per_step")) {
        report.metric("comparison", "mresgld_over_resgld_seconds", m / r);
        let sm = report.get("mresgld", "solve_seconds_per_step").unwrap_or(f64::NAN);
        let sr = report.get("resgld", "solve_seconds_per_step").unwrap_or(f64::NAN);
        report.metric("comparison", "mresgld_over_resgld_solve_seconds", sm / sr);
        let wm = report.get("mresgld", "node_work_per_step").unwrap_or(f64::NAN);
        let wr = report.get("resgld", "node_work_per_step").unwrap_or(f64::NAN);
        report.metric("comparison", "mresgld_over_resgld_node_work", wm / wr);
    }

    for out in &outputs {
        let name = if out.is_main(cfg) {
            "samples.csv".to_string()
        } else {
            format!("samples_{}.csv", out.kind.label())
        };
        let path = dir.join(&name);
        let mut w = create(&path)?;
        write_samples_csv(&mut w, &sample_rows(out))?;
        w.flush()?;
        report.artifacts.push(path);
    }
    let path = dir.join("swaplog.csv");
    let mut w = create(&path)?;
    write_swap_log(&mut w, &outputs[0].swaps)?;
    w.flush()?;
    report.artifacts.push(path);

    let frame = Frame {
        x: (0.0, 1.0),
        y: (0.0, 1.0),
    };
    let mut plot = Plot::new(frame, &format!("{} samples after burn-in", cfg.experiment.name()), "x", "y");
    for (i, out) in outputs.iter().enumerate() {
        let start = burn_in_start(out.low.len(), cfg.burn_in);
        let pts: Vec<[f64; 2]> = out.low[start..].iter().map(|s| [s.position[0], s.position[1]]).collect();
        plot.points(&pts, i, out.kind.label(), 1.5);
    }
    match &target {
        ModeTarget::Points(m) => plot.markers(m, "exact sources"),
        ModeTarget::Circle { center, radius } => {
            let ring: Vec<[f64; 2]> = (0..=72)
                .map(|k| {
                    let a = k as f64 / 72.0 * std::f64::consts::TAU;
                    [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
                })
                .collect();
            plot.line(&ring, 4, "exact sources");
        }
    }
    let path = dir.join("scatter.svg");
    std::fs::write(&path, plot.finish())?;
    report.artifacts.push(path);
    Ok(())
}
