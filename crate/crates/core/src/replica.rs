//! Two-chain replica exchange.
//!
//! Swap factors:
//!
//! * exact: `S = exp(tau_d * (U(b1) - U(b2)))`, `tau_d = 1/tau_low - 1/tau_high`
//! * single variance (one noisy estimator shared by both chains):
//!   `S = exp(tau_d * (U_hat(b1) - U_hat(b2) - tau_d * sigma^2))`
//! * multi variance (estimator 1 with spread `sigma1`, estimator 2 with `sigma2`,
//!   each evaluated at both positions):
//!   `S = exp(tau_d * (a1 * dU1 + a2 * dU2 - (a1*sigma1 + a2*sigma2)^2 * tau_d))`
//!
//! The multi-variance factor combines the two estimator differences with a
//! plus sign; this is the combination whose expectation equals the exact
//! factor when the estimators share one Gaussian shock. The minus-sign
//! combination is kept behind [`CombineSign::Minus`] so the unbiasedness
//! check can show it fails.
//!
//! A swap is accepted with probability `min(1, r * eta * S)`.

use std::io::{self, Write};

use rand::Rng;

use crate::rng::{stream_rng, streams, uniform01, ChainRng};
use crate::sampler::{
    sgld_step, ChainConfig, ChainState, EnergyModel, ParameterVector, SamplerError, Snapshot,
};
use crate::{fmt_sig9, Scalar};

pub mod discretization;
pub mod verification;

pub const DEFAULT_MAX_FACTOR: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwapConfig<S> {
    pub tau_low: S,
    pub tau_high: S,
    /// Swap intensity `r`.
    pub intensity: S,
    pub a1: S,
    pub a2: S,
    pub sigma1: S,
    pub sigma2: S,
    /// Factors above this are clamped (and flagged).
    pub max_factor: S,
}

impl<S: Scalar> SwapConfig<S> {
    /// Symmetric weights `a1 = a2 = 1/2` and noiseless estimators.
    pub fn new(tau_low: S, tau_high: S, intensity: S) -> Result<Self, SamplerError> {
        let cfg = Self {
            tau_low,
            tau_high,
            intensity,
            a1: S::of(0.5),
            a2: S::of(0.5),
            sigma1: S::zero(),
            sigma2: S::zero(),
            max_factor: S::of(DEFAULT_MAX_FACTOR),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets `a1`; `a2` becomes `1 - a1`.
    pub fn with_weight(mut self, a1: S) -> Result<Self, SamplerError> {
        self.a1 = a1;
        self.a2 = S::one() - a1;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sigmas(mut self, sigma1: S, sigma2: S) -> Result<Self, SamplerError> {
        self.sigma1 = sigma1;
        self.sigma2 = sigma2;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_factor(mut self, max_factor: S) -> Result<Self, SamplerError> {
        self.max_factor = max_factor;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.to_string()));
        if !(self.tau_low > S::zero() && self.tau_low.is_finite()) {
            return bad("tau_low must be positive");
        }
        if !(self.tau_low < self.tau_high && self.tau_high.is_finite()) {
            return bad("tau_low must be strictly below tau_high");
        }
        if !(self.intensity > S::zero() && self.intensity.is_finite()) {
            return bad("swap intensity must be positive");
        }
        let unit = |a: S| a > S::zero() && a < S::one();
        if !(unit(self.a1) && unit(self.a2)) {
            return bad("a1 and a2 must lie in (0, 1)");
        }
        if (self.a1 + self.a2 - S::one()).abs() > S::epsilon() * S::of(4.0) {
            return bad("a1 + a2 must equal 1");
        }
        if !(self.sigma1 >= S::zero() && self.sigma2 >= S::zero()) {
            return bad("estimator sigmas must be non-negative");
        }
        if !(self.max_factor > S::one()) {
            return bad("max_factor must exceed 1");
        }
        Ok(())
    }

    /// `1/tau_low - 1/tau_high`.
    pub fn tau_delta(&self) -> S {
        self.tau_low.recip() - self.tau_high.recip()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwapFactor<S> {
    pub value: S,
    /// The raw factor exceeded `max_factor` (or overflowed) and was clamped.
    pub clamped: bool,
}

fn clamp_exp<S: Scalar>(exponent: S, max_factor: S) -> SwapFactor<S> {
    if exponent.is_nan() {
        return SwapFactor {
            value: S::zero(),
            clamped: true,
        };
    }
    if exponent > max_factor.ln() {
        SwapFactor {
            value: max_factor,
            clamped: true,
        }
    } else {
        SwapFactor {
            value: exponent.exp(),
            clamped: false,
        }
    }
}

pub fn swap_factor_exact<S: Scalar>(u1: S, u2: S, cfg: &SwapConfig<S>) -> SwapFactor<S> {
    let td = cfg.tau_delta();
    if td == S::zero() {
        return SwapFactor {
            value: S::one(),
            clamped: false,
        };
    }
    clamp_exp(td * (u1 - u2), cfg.max_factor)
}

/// Bias-corrected factor for one estimator with spread `sigma` in both chains.
pub fn swap_factor_single_variance<S: Scalar>(
    uhat1: S,
    uhat2: S,
    sigma: S,
    cfg: &SwapConfig<S>,
) -> SwapFactor<S> {
    let td = cfg.tau_delta();
    clamp_exp(td * (uhat1 - uhat2 - td * sigma * sigma), cfg.max_factor)
}

/// The four energy evaluations feeding the multi-variance factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwapEnergies<S> {
    /// Estimator 1 (low chain's model) at the low chain's position.
    pub u1_low: S,
    /// Estimator 1 at the high chain's position.
    pub u1_high: S,
    /// Estimator 2 (high chain's model) at the low chain's position.
    pub u2_low: S,
    /// Estimator 2 at the high chain's position.
    pub u2_high: S,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CombineSign {
    #[default]
    Plus,
    /// Subtracts the second estimator's difference. Biased; for verification only.
    Minus,
}

pub fn swap_factor_multi_variance<S: Scalar>(e: &SwapEnergies<S>, cfg: &SwapConfig<S>) -> SwapFactor<S> {
    swap_factor_multi_variance_signed(e, cfg, CombineSign::Plus)
}

pub fn swap_factor_multi_variance_signed<S: Scalar>(
    e: &SwapEnergies<S>,
    cfg: &SwapConfig<S>,
    sign: CombineSign,
) -> SwapFactor<S> {
    let td = cfg.tau_delta();
    let d1 = e.u1_low - e.u1_high;
    let d2 = e.u2_low - e.u2_high;
    let combined = match sign {
        CombineSign::Plus => cfg.a1 * d1 + cfg.a2 * d2,
        CombineSign::Minus => cfg.a1 * d1 - cfg.a2 * d2,
    };
    let spread = cfg.a1 * cfg.sigma1 + cfg.a2 * cfg.sigma2;
    clamp_exp(td * (combined - spread * spread * td), cfg.max_factor)
}

/// How a swap attempt estimates the swap factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SwapEstimator<S> {
    /// Cached energies treated as exact.
    Exact,
    /// Both chains use the same estimator with spread `sigma`; cached energies suffice.
    SingleVariance { sigma: S },
    /// Each chain's model is also evaluated at the other chain's position.
    MultiVariance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicaPairState<S> {
    pub low: ChainState<S>,
    pub high: ChainState<S>,
    pub swap_count: u64,
    pub attempt_count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwapRecord<S> {
    pub step: u64,
    pub s_hat: S,
    pub energies: SwapEnergies<S>,
    pub probability: S,
    pub swapped: bool,
    pub clamped: bool,
}

/// One swap attempt with acceptance probability `min(1, r * eta * S_hat)`.
///
/// On acceptance the positions are exchanged; each chain keeps its own
/// temperature and model, and its cached energy is replaced by its own
/// model's value at the new position.
pub fn attempt_swap<S, ML, MH, R>(
    pair: &mut ReplicaPairState<S>,
    model_low: &ML,
    model_high: &MH,
    cfg: &SwapConfig<S>,
    estimator: SwapEstimator<S>,
    step_size: S,
    rng: &mut R,
) -> Result<SwapRecord<S>, SamplerError>
where
    S: Scalar,
    ML: EnergyModel<S> + ?Sized,
    MH: EnergyModel<S> + ?Sized,
    R: Rng + ?Sized,
{
    let (energies, factor) = match estimator {
        SwapEstimator::Exact | SwapEstimator::SingleVariance { .. } => {
            let e = SwapEnergies {
                u1_low: pair.low.last_energy,
                u1_high: pair.high.last_energy,
                u2_low: pair.low.last_energy,
                u2_high: pair.high.last_energy,
            };
            let f = match estimator {
                SwapEstimator::SingleVariance { sigma } => {
                    swap_factor_single_variance(e.u1_low, e.u2_high, sigma, cfg)
                }
                _ => swap_factor_exact(e.u1_low, e.u2_high, cfg),
            };
            (e, f)
        }
        SwapEstimator::MultiVariance => {
            let e = SwapEnergies {
                u1_low: pair.low.last_energy,
                u1_high: model_low.energy(&pair.high.position)?,
                u2_low: model_high.energy(&pair.low.position)?,
                u2_high: pair.high.last_energy,
            };
            (e, swap_factor_multi_variance(&e, cfg))
        }
    };

    let probability = (cfg.intensity * step_size * factor.value).min(S::one());
    let u = uniform01(rng);
    let swapped = u < probability.as_f64();
    pair.attempt_count += 1;
    if swapped {
        pair.swap_count += 1;
        let low_pos = pair.low.position.clone();
        let high_pos = pair.high.position.clone();
        pair.low.relocate(high_pos, energies.u1_high);
        pair.high.relocate(low_pos, energies.u2_low);
    }
    Ok(SwapRecord {
        step: pair.low.step_count,
        s_hat: factor.value,
        energies,
        probability,
        swapped,
        clamped: factor.clamped,
    })
}

/// Independent random streams for the two chains and the swap coin.
pub struct PairRngs {
    pub low: ChainRng,
    pub high: ChainRng,
    pub swap: ChainRng,
}

impl PairRngs {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            low: stream_rng(seed, streams::LOW_CHAIN),
            high: stream_rng(seed, streams::HIGH_CHAIN),
            swap: stream_rng(seed, streams::SWAP),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PairSchedule {
    pub n_steps: u64,
    pub swap_interval: u64,
    pub thinning: u64,
}

impl PairSchedule {
    pub fn new(n_steps: u64, swap_interval: u64) -> Self {
        Self {
            n_steps,
            swap_interval,
            thinning: 1,
        }
    }

    pub fn with_thinning(mut self, thinning: u64) -> Self {
        self.thinning = thinning;
        self
    }
}

#[derive(Clone, Debug)]
pub struct PairTrajectory<S> {
    pub low: Vec<Snapshot<S>>,
    pub high: Vec<Snapshot<S>>,
    pub swaps: Vec<SwapRecord<S>>,
    pub final_state: ReplicaPairState<S>,
}

impl<S: Scalar> PairTrajectory<S> {
    pub fn swap_rate(&self) -> f64 {
        let st = &self.final_state;
        if st.attempt_count == 0 {
            0.0
        } else {
            st.swap_count as f64 / st.attempt_count as f64
        }
    }
}

/// Advances both chains by one SGLD step per iteration and attempts a swap
/// every `swap_interval` iterations.
#[allow(clippy::too_many_arguments)]
pub fn run_replica_pair<S, ML, MH>(
    init_low: ParameterVector<S>,
    init_high: ParameterVector<S>,
    model_low: &ML,
    model_high: &MH,
    cfg: &SwapConfig<S>,
    estimator: SwapEstimator<S>,
    chain_cfgs: (&ChainConfig<S>, &ChainConfig<S>),
    schedule: &PairSchedule,
    rngs: &mut PairRngs,
) -> Result<PairTrajectory<S>, SamplerError>
where
    S: Scalar,
    ML: EnergyModel<S> + ?Sized,
    MH: EnergyModel<S> + ?Sized,
{
    let (cfg_low, cfg_high) = chain_cfgs;
    cfg.validate()?;
    cfg_low.validate()?;
    cfg_high.validate()?;
    if cfg_low.temperature != cfg.tau_low || cfg_high.temperature != cfg.tau_high {
        return Err(SamplerError::InvalidConfig(
            "chain temperatures must match the swap configuration".into(),
        ));
    }
    if schedule.n_steps == 0 {
        return Err(SamplerError::ZeroSteps);
    }
    if schedule.swap_interval == 0 {
        return Err(SamplerError::InvalidConfig("swap_interval must be at least 1".into()));
    }
    if schedule.thinning == 0 {
        return Err(SamplerError::ZeroThinning);
    }

    let mut pair = ReplicaPairState {
        low: ChainState::new(init_low, model_low)?,
        high: ChainState::new(init_high, model_high)?,
        swap_count: 0,
        attempt_count: 0,
    };
    let cap = (schedule.n_steps / schedule.thinning) as usize;
    let mut low = Vec::with_capacity(cap);
    let mut high = Vec::with_capacity(cap);
    let mut swaps = Vec::new();

    for k in 1..=schedule.n_steps {
        let eta = cfg_low.step_size_at(pair.low.step_count);
        sgld_step(&mut pair.low, cfg_low, model_low, &mut rngs.low).map_err(|e| e.at_step(k))?;
        sgld_step(&mut pair.high, cfg_high, model_high, &mut rngs.high).map_err(|e| e.at_step(k))?;
        if k % schedule.swap_interval == 0 {
            let rec = attempt_swap(&mut pair, model_low, model_high, cfg, estimator, eta, &mut rngs.swap)
                .map_err(|e| e.at_step(k))?;
            swaps.push(rec);
        }
        if k % schedule.thinning == 0 {
            low.push(pair.low.snapshot());
            high.push(pair.high.snapshot());
        }
    }
    Ok(PairTrajectory {
        low,
        high,
        swaps,
        final_state: pair,
    })
}

pub const SWAP_LOG_HEADER: &str = "step,s_hat,u1_low,u1_high,u2_low,u2_high,swapped";

/// Writes the swap log as CSV with a header row.
pub fn write_swap_log<S: Scalar, W: Write>(mut w: W, records: &[SwapRecord<S>]) -> io::Result<()> {
    writeln!(w, "{SWAP_LOG_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.step,
            fmt_sig9(r.s_hat),
            fmt_sig9(r.energies.u1_low),
            fmt_sig9(r.energies.u1_high),
            fmt_sig9(r.energies.u2_low),
            fmt_sig9(r.energies.u2_high),
            u8::from(r.swapped)
        )?;
    }
    Ok(())
}
