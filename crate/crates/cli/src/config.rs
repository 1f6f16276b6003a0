//! Experiment configuration: one JSON document per run, validated before any
//! compute happens.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    TwoMode,
    InfiniteMode,
    QgdForward,
    QgdInverse,
    NonlinearInverse,
    SwapUnbiasedness,
    DoubleWell,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::TwoMode,
        ExperimentId::InfiniteMode,
        ExperimentId::QgdForward,
        ExperimentId::QgdInverse,
        ExperimentId::NonlinearInverse,
        ExperimentId::SwapUnbiasedness,
        ExperimentId::DoubleWell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::TwoMode => "two_mode",
            ExperimentId::InfiniteMode => "infinite_mode",
            ExperimentId::QgdForward => "qgd_forward",
            ExperimentId::QgdInverse => "qgd_inverse",
            ExperimentId::NonlinearInverse => "nonlinear_inverse",
            ExperimentId::SwapUnbiasedness => "swap_unbiasedness",
            ExperimentId::DoubleWell => "double_well",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentId::TwoMode => "source inversion with two sensors and two exact solutions",
            ExperimentId::InfiniteMode => "source inversion with one sensor; solutions form a circle",
            ExperimentId::QgdForward => "Bayesian PINN for the damped wave problem, forward",
            ExperimentId::QgdInverse => "Bayesian PINN for the damped wave problem, coefficient unknown",
            ExperimentId::NonlinearInverse => "Bayesian PINN for -u'' + a u^2 = f, coefficient unknown",
            ExperimentId::SwapUnbiasedness => "Monte-Carlo check that the swap estimator is unbiased",
            ExperimentId::DoubleWell => "double-well target with exact energies and a step-size study",
        }
    }

    pub fn is_pinn(self) -> bool {
        matches!(self, ExperimentId::QgdForward | ExperimentId::QgdInverse | ExperimentId::NonlinearInverse)
    }

    pub fn is_source_inversion(self) -> bool {
        matches!(self, ExperimentId::TwoMode | ExperimentId::InfiniteMode)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// One low-temperature chain on the fine model.
    Sgld,
    /// Fine model in both chains, single-variance swap rule.
    Resgld,
    /// Fine model in the low chain, coarse model in the high chain.
    Mresgld,
}

/// Additional runs executed next to the main sampler with the same seed and budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    SgldLow,
    SgldHigh,
    Resgld,
    Mresgld,
}

impl Baseline {
    pub fn label(self) -> &'static str {
        match self {
            Baseline::SgldLow => "sgld_low",
            Baseline::SgldHigh => "sgld_high",
            Baseline::Resgld => "resgld",
            Baseline::Mresgld => "mresgld",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    #[default]
    Reduced,
    TimeStepping,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAxis {
    #[default]
    Physical,
    Unit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseSection {
    #[serde(default = "defaults::obs_sigma")]
    pub obs_sigma: f64,
    #[serde(default = "defaults::capture_radius")]
    pub capture_radius: f64,
    /// Starting point of both chains; defaults to a point on the solution set.
    #[serde(default)]
    pub init: Option<[f64; 2]>,
    #[serde(default)]
    pub evaluator: EvaluatorKind,
}

impl Default for InverseSection {
    fn default() -> Self {
        Self {
            obs_sigma: defaults::obs_sigma(),
            capture_radius: defaults::capture_radius(),
            init: None,
            evaluator: EvaluatorKind::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinnSection {
    #[serde(default = "defaults::pinn_sigma")]
    pub sigma_u: f64,
    #[serde(default = "defaults::pinn_sigma")]
    pub sigma_f: f64,
    #[serde(default = "defaults::pinn_sigma")]
    pub sigma_b: f64,
    #[serde(default = "defaults::one")]
    pub prior_std: f64,
    #[serde(default)]
    pub time_axis: TimeAxis,
}

impl Default for PinnSection {
    fn default() -> Self {
        Self {
            sigma_u: defaults::pinn_sigma(),
            sigma_f: defaults::pinn_sigma(),
            sigma_b: defaults::pinn_sigma(),
            prior_std: 1.0,
            time_axis: TimeAxis::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleWellSection {
    #[serde(default = "defaults::one")]
    pub height: f64,
    #[serde(default = "defaults::init_low")]
    pub init_low: Vec<f64>,
    #[serde(default = "defaults::init_high")]
    pub init_high: Vec<f64>,
    /// Step sizes of the coupled `eta` vs `eta / 4` study. Empty skips it.
    #[serde(default = "defaults::coupled_etas")]
    pub coupled_etas: Vec<f64>,
    #[serde(default = "defaults::one")]
    pub coupled_horizon: f64,
    #[serde(default = "defaults::coupled_paths")]
    pub coupled_paths: usize,
}

impl Default for DoubleWellSection {
    fn default() -> Self {
        Self {
            height: 1.0,
            init_low: defaults::init_low(),
            init_high: defaults::init_high(),
            coupled_etas: defaults::coupled_etas(),
            coupled_horizon: 1.0,
            coupled_paths: defaults::coupled_paths(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "defaults::verify_draws")]
    pub draws: usize,
    #[serde(default = "defaults::z_threshold")]
    pub z_threshold: f64,
    /// Use the sign-flipped estimator, which is biased when the sigmas differ.
    #[serde(default)]
    pub negate_sign: bool,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            draws: defaults::verify_draws(),
            z_threshold: defaults::z_threshold(),
            negate_sign: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free text; default configs record how they were scaled down here.
    #[serde(default)]
    pub comment: String,
    pub experiment: ExperimentId,
    #[serde(default = "defaults::sampler")]
    pub sampler: SamplerKind,
    #[serde(default)]
    pub baselines: Vec<Baseline>,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default)]
    pub steps: u64,
    #[serde(default = "defaults::burn_in")]
    pub burn_in: f64,
    #[serde(default = "defaults::one_u64")]
    pub thinning: u64,
    #[serde(default)]
    pub tau_low: Option<f64>,
    #[serde(default)]
    pub tau_high: Option<f64>,
    #[serde(default)]
    pub eta_low: Option<f64>,
    /// Defaults to `eta_low`.
    #[serde(default)]
    pub eta_high: Option<f64>,
    #[serde(default = "defaults::one_u64")]
    pub swap_interval: u64,
    /// Swap intensity `r`; defaults to `1 / eta_low`.
    #[serde(default)]
    pub intensity: Option<f64>,
    /// Weight of the low-temperature energy difference; `a2 = 1 - a1`.
    #[serde(default = "defaults::a1")]
    pub a1: f64,
    #[serde(default)]
    pub sigma_low: f64,
    #[serde(default)]
    pub sigma_high: f64,
    /// Replace `sigma_high` by the empirical coarse-vs-fine energy spread.
    #[serde(default)]
    pub auto_calibrate: bool,
    #[serde(default = "defaults::calibration_draws")]
    pub calibration_draws: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub inverse: InverseSection,
    #[serde(default)]
    pub pinn: PinnSection,
    #[serde(default)]
    pub double_well: DoubleWellSection,
    #[serde(default)]
    pub verify: VerifySection,
}

mod defaults {
    pub fn obs_sigma() -> f64 {
        mresgld::inverse::DEFAULT_OBS_SIGMA
    }
    pub fn capture_radius() -> f64 {
        0.05
    }
    pub fn pinn_sigma() -> f64 {
        0.1
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn one_u64() -> u64 {
        1
    }
    pub fn init_low() -> Vec<f64> {
        vec![-1.0]
    }
    pub fn init_high() -> Vec<f64> {
        vec![-1.0]
    }
    pub fn coupled_etas() -> Vec<f64> {
        vec![1e-2, 2.5e-3, 6.25e-4]
    }
    pub fn coupled_paths() -> usize {
        1000
    }
    pub fn verify_draws() -> usize {
        100_000
    }
    pub fn z_threshold() -> f64 {
        4.0
    }
    pub fn sampler() -> super::SamplerKind {
        super::SamplerKind::Mresgld
    }
    pub fn seed() -> u64 {
        1
    }
    pub fn burn_in() -> f64 {
        0.5
    }
    pub fn a1() -> f64 {
        0.5
    }
    pub fn calibration_draws() -> usize {
        50
    }
}

/// Everything a sampler run needs, after defaults are resolved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerParams {
    pub tau_low: f64,
    pub tau_high: f64,
    pub eta_low: f64,
    pub eta_high: f64,
    pub intensity: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("config field `{name}`: must be positive and finite, got {v}");
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("config does not match the schema")?;
        Ok(cfg)
    }

    pub fn sampler_params(&self) -> Result<SamplerParams> {
        let need = |name: &str, v: Option<f64>| v.with_context(|| format!("config field `{name}` is required"));
        let tau_low = need("tau_low", self.tau_low)?;
        let tau_high = need("tau_high", self.tau_high)?;
        let eta_low = need("eta_low", self.eta_low)?;
        let eta_high = self.eta_high.unwrap_or(eta_low);
        let intensity = self.intensity.unwrap_or(1.0 / eta_low);
        Ok(SamplerParams {
            tau_low,
            tau_high,
            eta_low,
            eta_high,
            intensity,
        })
    }

    /// Field-level checks. Runs before any model is built.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.burn_in) {
            bail!("config field `burn_in`: must lie in [0, 1), got {}", self.burn_in);
        }
        if self.experiment == ExperimentId::SwapUnbiasedness {
            if self.verify.draws < 2 {
                bail!("config field `verify.draws`: need at least 2 draws");
            }
            positive("verify.z_threshold", self.verify.z_threshold)?;
            return Ok(());
        }
        if self.steps == 0 {
            bail!("config field `steps`: must be at least 1");
        }
        if self.thinning == 0 {
            bail!("config field `thinning`: must be at least 1");
        }
        if self.swap_interval == 0 {
            bail!("config field `swap_interval`: must be at least 1");
        }
        let p = self.sampler_params()?;
        positive("tau_low", p.tau_low)?;
        positive("tau_high", p.tau_high)?;
        positive("eta_low", p.eta_low)?;
        positive("eta_high", p.eta_high)?;
        positive("intensity", p.intensity)?;
        if p.tau_low >= p.tau_high {
            bail!("config fields `tau_low`/`tau_high`: need tau_low < tau_high");
        }
        if !(self.a1 > 0.0 && self.a1 < 1.0) {
            bail!("config field `a1`: must lie in (0, 1), got {}", self.a1);
        }
        if !(self.sigma_low >= 0.0 && self.sigma_low.is_finite()) {
            bail!("config field `sigma_low`: must be nonnegative");
        }
        if !(self.sigma_high >= 0.0 && self.sigma_high.is_finite()) {
            bail!("config field `sigma_high`: must be nonnegative");
        }
        if !self.auto_calibrate && self.sigma_high < self.sigma_low {
            bail!("config fields `sigma_low`/`sigma_high`: the coarse model cannot be more precise than the fine one");
        }
        if self.auto_calibrate && self.calibration_draws == 0 {
            bail!("config field `calibration_draws`: must be at least 1 when auto_calibrate is set");
        }
        let snapshots = self.steps / self.thinning;
        let kept = snapshots - (self.burn_in * snapshots as f64).floor() as u64;
        if kept == 0 {
            bail!("config fields `steps`/`thinning`/`burn_in`: no snapshot survives burn-in");
        }
        if self.experiment.is_source_inversion() {
            positive("inverse.obs_sigma", self.inverse.obs_sigma)?;
            positive("inverse.capture_radius", self.inverse.capture_radius)?;
            if let Some(k) = self.inverse.init {
                if !k.iter().all(|v| (0.0..=1.0).contains(v)) {
                    bail!("config field `inverse.init`: must lie in the unit box");
                }
            }
        }
        if self.experiment.is_pinn() {
            for (name, v) in [
                ("pinn.sigma_u", self.pinn.sigma_u),
                ("pinn.sigma_f", self.pinn.sigma_f),
                ("pinn.sigma_b", self.pinn.sigma_b),
                ("pinn.prior_std", self.pinn.prior_std),
            ] {
                positive(name, v)?;
            }
        }
        if self.experiment == ExperimentId::DoubleWell {
            let dw = &self.double_well;
            positive("double_well.height", dw.height)?;
            if dw.init_low.is_empty() || dw.init_low.len() != dw.init_high.len() {
                bail!("config fields `double_well.init_low`/`init_high`: need equal, nonzero lengths");
            }
            for &eta in &dw.coupled_etas {
                positive("double_well.coupled_etas", eta)?;
            }
            if !dw.coupled_etas.is_empty() {
                positive("double_well.coupled_horizon", dw.coupled_horizon)?;
                if dw.coupled_paths < 2 {
                    bail!("config field `double_well.coupled_paths`: need at least 2");
                }
            }
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(self.experiment.name()))
    }
}
