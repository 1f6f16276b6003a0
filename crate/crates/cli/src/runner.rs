//! Turns a config into single-chain or replica-pair runs over any pair of
//! energy models.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use anyhow::Result;
use mresgld::replica::{run_replica_pair, PairRngs, PairSchedule, SwapRecord};
use mresgld::rng::{stream_rng, streams};
use mresgld::sampler::{run_chain, Snapshot};
use mresgld::{ChainConfig, EnergyError, EnergyModel, SwapConfig, SwapEstimator};

use crate::config::{Baseline, ExperimentConfig, SamplerKind};
use crate::report::SwapStats;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunKind {
    SgldLow,
    SgldHigh,
    Resgld,
    Mresgld,
}

impl RunKind {
    pub fn label(self) -> &'static str {
        match self {
            RunKind::SgldLow => "sgld_low",
            RunKind::SgldHigh => "sgld_high",
            RunKind::Resgld => "resgld",
            RunKind::Mresgld => "mresgld",
        }
    }

    pub fn is_pair(self) -> bool {
        matches!(self, RunKind::Resgld | RunKind::Mresgld)
    }
}

impl From<SamplerKind> for RunKind {
    fn from(s: SamplerKind) -> Self {
        match s {
            SamplerKind::Sgld => RunKind::SgldLow,
            SamplerKind::Resgld => RunKind::Resgld,
            SamplerKind::Mresgld => RunKind::Mresgld,
        }
    }
}

impl From<Baseline> for RunKind {
    fn from(b: Baseline) -> Self {
        match b {
            Baseline::SgldLow => RunKind::SgldLow,
            Baseline::SgldHigh => RunKind::SgldHigh,
            Baseline::Resgld => RunKind::Resgld,
            Baseline::Mresgld => RunKind::Mresgld,
        }
    }
}

/// The main sampler first, then each distinct baseline.
pub fn planned_runs(cfg: &ExperimentConfig) -> Vec<RunKind> {
    let mut runs = vec![RunKind::from(cfg.sampler)];
    for &b in &cfg.baselines {
        let k = RunKind::from(b);
        if !runs.contains(&k) {
            runs.push(k);
        }
    }
    runs
}

pub struct RunOutput {
    pub kind: RunKind,
    pub low: Vec<Snapshot<f64>>,
    /// High-temperature chain of a pair run.
    pub high: Vec<Snapshot<f64>>,
    pub swaps: Vec<SwapRecord<f64>>,
    pub swap_stats: Option<SwapStats>,
    pub rejected_low: u64,
    pub rejected_high: u64,
    pub seconds: f64,
    /// Time spent inside energy and gradient evaluations.
    pub model_seconds: f64,
}

impl RunOutput {
    pub fn is_main(&self, cfg: &ExperimentConfig) -> bool {
        self.kind == RunKind::from(cfg.sampler)
    }

    /// Whether any swap happened in `(prev_step, step]`.
    pub fn swapped_between(&self, prev_step: u64, step: u64) -> bool {
        let start = self.swaps.partition_point(|r| r.step <= prev_step);
        self.swaps[start..].iter().take_while(|r| r.step <= step).any(|r| r.swapped)
    }
}

/// Wraps a model and accumulates the wall-clock time spent inside it.
pub struct Timed<'a, M: ?Sized> {
    inner: &'a M,
    nanos: AtomicU64,
}

impl<'a, M: EnergyModel<f64> + ?Sized> Timed<'a, M> {
    pub fn new(inner: &'a M) -> Self {
        Self {
            inner,
            nanos: AtomicU64::new(0),
        }
    }

    pub fn seconds(&self) -> f64 {
        self.nanos.load(Ordering::Relaxed) as f64 * 1e-9
    }

    fn time<T>(&self, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.nanos.fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        out
    }
}

impl<M: EnergyModel<f64> + ?Sized> EnergyModel<f64> for Timed<'_, M> {
    fn energy(&self, x: &[f64]) -> Result<f64, EnergyError> {
        self.time(|| self.inner.energy(x))
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EnergyError> {
        self.time(|| self.inner.gradient(x))
    }
    fn sigma(&self) -> f64 {
        self.inner.sigma()
    }
    fn in_support(&self, x: &[f64]) -> bool {
        self.inner.in_support(x)
    }
    fn joint_evaluation(&self) -> bool {
        self.inner.joint_evaluation()
    }
    fn energy_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EnergyError> {
        self.time(|| self.inner.energy_and_gradient(x))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Sigmas {
    pub low: f64,
    pub high: f64,
}

/// Runs one sampler. `fine` and `coarse` must already report `sigmas` through
/// [`EnergyModel::sigma`].
pub fn execute<F, C>(
    kind: RunKind,
    cfg: &ExperimentConfig,
    fine: &F,
    coarse: &C,
    sigmas: Sigmas,
    init_low: &[f64],
    init_high: &[f64],
) -> Result<RunOutput>
where
    F: EnergyModel<f64> + ?Sized,
    C: EnergyModel<f64> + ?Sized,
{
    let p = cfg.sampler_params()?;
    let start = Instant::now();
    let mut out = RunOutput {
        kind,
        low: Vec::new(),
        high: Vec::new(),
        swaps: Vec::new(),
        swap_stats: None,
        rejected_low: 0,
        rejected_high: 0,
        seconds: 0.0,
        model_seconds: 0.0,
    };
    let (fine, coarse) = (&Timed::new(fine), &Timed::new(coarse));
    match kind {
        RunKind::SgldLow | RunKind::SgldHigh => {
            let (tau, eta, sigma, init, stream) = if kind == RunKind::SgldLow {
                (p.tau_low, p.eta_low, sigmas.low, init_low, streams::LOW_CHAIN)
            } else {
                (p.tau_high, p.eta_high, sigmas.low, init_high, streams::HIGH_CHAIN)
            };
            let chain = ChainConfig::new(tau, eta, sigma)?;
            let tr = run_chain(
                init.to_vec().into(),
                &chain,
                fine,
                cfg.steps,
                cfg.thinning,
                &mut stream_rng(cfg.seed, stream),
            )?;
            out.low = tr.snapshots;
            out.rejected_low = tr.final_state.rejected;
        }
        RunKind::Resgld | RunKind::Mresgld => {
            let multi = kind == RunKind::Mresgld;
            let sigma_high = if multi { sigmas.high } else { sigmas.low };
            let swap = SwapConfig::new(p.tau_low, p.tau_high, p.intensity)?
                .with_weight(cfg.a1)?
                .with_sigmas(sigmas.low, sigma_high)?;
            let cl = ChainConfig::new(p.tau_low, p.eta_low, sigmas.low)?;
            let ch = ChainConfig::new(p.tau_high, p.eta_high, sigma_high)?;
            let schedule = PairSchedule::new(cfg.steps, cfg.swap_interval).with_thinning(cfg.thinning);
            let mut rngs = PairRngs::from_seed(cfg.seed);
            let tr = if multi {
                run_replica_pair(
                    init_low.to_vec().into(),
                    init_high.to_vec().into(),
                    fine,
                    coarse,
                    &swap,
                    SwapEstimator::MultiVariance,
                    (&cl, &ch),
                    &schedule,
                    &mut rngs,
                )?
            } else {
                run_replica_pair(
                    init_low.to_vec().into(),
                    init_high.to_vec().into(),
                    fine,
                    fine,
                    &swap,
                    SwapEstimator::SingleVariance { sigma: sigmas.low },
                    (&cl, &ch),
                    &schedule,
                    &mut rngs,
                )?
            };
            out.swap_stats = Some(SwapStats {
                attempts: tr.final_state.attempt_count,
                swaps: tr.final_state.swap_count,
                rate: tr.swap_rate(),
            });
            out.rejected_low = tr.final_state.low.rejected;
            out.rejected_high = tr.final_state.high.rejected;
            out.low = tr.low;
            out.high = tr.high;
            out.swaps = tr.swaps;
        }
    }
    out.seconds = start.elapsed().as_secs_f64();
    out.model_seconds = fine.seconds() + coarse.seconds();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mresgld::targets::DoubleWell;

    fn cfg(json: &str) -> ExperimentConfig {
        let c = ExperimentConfig::from_json(json).unwrap();
        c.validate().unwrap();
        c
    }

    #[test]
    fn plan_dedupes_baselines() {
        let c = cfg(r#"{"experiment": "double_well", "steps": 10, "tau_low": 0.5, "tau_high": 2, "eta_low": 0.01,
            "baselines": ["mresgld", "sgld_low", "sgld_low"]}"#);
        assert_eq!(planned_runs(&c), vec![RunKind::Mresgld, RunKind::SgldLow]);
    }

    #[test]
    fn pair_without_swaps_reproduces_the_low_chain() {
        // swap_interval beyond the run length: the low chain of the pair is the
        // plain SGLD chain on the same stream
        let c = cfg(r#"{"experiment": "double_well", "steps": 50, "tau_low": 0.5, "tau_high": 2, "eta_low": 0.01,
            "swap_interval": 1000}"#);
        let dw = DoubleWell::<f64>::default();
        let s = Sigmas { low: 0.0, high: 0.0 };
        let pair = execute(RunKind::Mresgld, &c, &dw, &dw, s, &[-1.0], &[1.0]).unwrap();
        let single = execute(RunKind::SgldLow, &c, &dw, &dw, s, &[-1.0], &[1.0]).unwrap();
        assert_eq!(pair.low, single.low);
        assert_eq!(pair.swap_stats.as_ref().unwrap().attempts, 0);
        assert!(!pair.swapped_between(0, 50));
    }
}
