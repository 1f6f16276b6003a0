//! Single-chain stochastic gradient Langevin dynamics.
//!
//! One step moves the chain by
//!
//! ```text
//! x' = x - eta * grad U_hat(x) + sqrt(2 * eta * tau) * xi,   xi ~ N(0, I_d)
//! ```
//!
//! With `tau = 0` and an exact gradient this is plain gradient descent.

use std::error::Error as StdError;
use std::ops::{Deref, DerefMut};

use rand::Rng;
use thiserror::Error;

use crate::rng::standard_normal;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("non-finite {what} at position {position:?}")]
    NonFinite {
        what: &'static str,
        position: Vec<f64>,
    },
    #[error("energy evaluation failed at {position:?}: {source}")]
    Evaluation {
        position: Vec<f64>,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
    #[error("n_steps must be positive")]
    ZeroSteps,
    #[error("thinning interval must be positive")]
    ZeroThinning,
    #[error("non-finite gradient at position {position:?}")]
    NonFiniteGradient { position: Vec<f64> },
    #[error("step produced a non-finite position (from {position:?})")]
    NonFinitePosition { position: Vec<f64> },
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("step {step}: {source}")]
    AtStep {
        step: u64,
        #[source]
        source: Box<SamplerError>,
    },
}

impl SamplerError {
    pub(crate) fn at_step(self, step: u64) -> Self {
        match self {
            e @ SamplerError::AtStep { .. } => e,
            e => SamplerError::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}

pub(crate) fn to_f64_vec<S: Scalar>(x: &[S]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}

/// Flat vector of sampled quantities.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParameterVector<S>(Vec<S>);

impl<S: Scalar> ParameterVector<S> {
    pub fn new(values: Vec<S>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![S::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_inner(self) -> Vec<S> {
        self.0
    }
}

impl<S> Deref for ParameterVector<S> {
    type Target = [S];
    fn deref(&self) -> &[S] {
        &self.0
    }
}

impl<S> DerefMut for ParameterVector<S> {
    fn deref_mut(&mut self) -> &mut [S] {
        &mut self.0
    }
}

impl<S> From<Vec<S>> for ParameterVector<S> {
    fn from(v: Vec<S>) -> Self {
        Self(v)
    }
}

/// Noisy energy `U_hat` with its gradient and the assumed estimator spread `sigma`.
pub trait EnergyModel<S: Scalar> {
    fn energy(&self, position: &[S]) -> Result<S, EnergyError>;

    fn gradient(&self, position: &[S]) -> Result<Vec<S>, EnergyError>;

    /// Standard deviation of `energy` around the true energy. Constant for a run.
    fn sigma(&self) -> S;

    /// Support of the prior. Steps leaving it are rejected.
    fn in_support(&self, _position: &[S]) -> bool {
        true
    }

    /// True when energy and gradient share most of their cost, in which case
    /// the sampler evaluates both at every new position.
    fn joint_evaluation(&self) -> bool {
        false
    }

    fn energy_and_gradient(&self, position: &[S]) -> Result<(S, Vec<S>), EnergyError> {
        Ok((self.energy(position)?, self.gradient(position)?))
    }
}

impl<S: Scalar, M: EnergyModel<S> + ?Sized> EnergyModel<S> for &M {
    fn energy(&self, position: &[S]) -> Result<S, EnergyError> {
        (**self).energy(position)
    }
    fn gradient(&self, position: &[S]) -> Result<Vec<S>, EnergyError> {
        (**self).gradient(position)
    }
    fn sigma(&self) -> S {
        (**self).sigma()
    }
    fn in_support(&self, position: &[S]) -> bool {
        (**self).in_support(position)
    }
    fn joint_evaluation(&self) -> bool {
        (**self).joint_evaluation()
    }
    fn energy_and_gradient(&self, position: &[S]) -> Result<(S, Vec<S>), EnergyError> {
        (**self).energy_and_gradient(position)
    }
}

/// Step-size schedule hook. Runs default to a constant step.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum StepSchedule {
    #[default]
    Constant,
    /// `eta_k = eta_0 / (1 + k / scale)^power`
    PolynomialDecay { scale: f64, power: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainConfig<S> {
    pub temperature: S,
    pub step_size: S,
    pub estimator_sigma: S,
    pub schedule: StepSchedule,
}

impl<S: Scalar> ChainConfig<S> {
    /// `temperature` may be zero (gradient descent); `step_size` must be positive.
    pub fn new(temperature: S, step_size: S, estimator_sigma: S) -> Result<Self, SamplerError> {
        let cfg = Self {
            temperature,
            step_size,
            estimator_sigma,
            schedule: StepSchedule::Constant,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_schedule(mut self, schedule: StepSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.to_string()));
        if !(self.temperature.is_finite() && self.temperature >= S::zero()) {
            return bad("temperature must be finite and non-negative");
        }
        if !(self.step_size.is_finite() && self.step_size > S::zero()) {
            return bad("step_size must be finite and positive");
        }
        if !(self.estimator_sigma.is_finite() && self.estimator_sigma >= S::zero()) {
            return bad("estimator_sigma must be finite and non-negative");
        }
        if let StepSchedule::PolynomialDecay { scale, power } = self.schedule {
            if !(scale > 0.0 && power >= 0.0) {
                return bad("decay schedule needs scale > 0 and power >= 0");
            }
        }
        Ok(())
    }

    pub fn step_size_at(&self, step: u64) -> S {
        match self.schedule {
            StepSchedule::Constant => self.step_size,
            StepSchedule::PolynomialDecay { scale, power } => {
                self.step_size / S::of((1.0 + step as f64 / scale).powf(power))
            }
        }
    }

    pub fn noise_scale_at(&self, step: u64) -> S {
        (S::of(2.0) * self.step_size_at(step) * self.temperature).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState<S> {
    pub position: ParameterVector<S>,
    pub step_count: u64,
    /// Most recent noisy energy at `position`, reused by swap decisions.
    pub last_energy: S,
    /// Steps rejected for leaving the model's support.
    pub rejected: u64,
    grad_cache: Option<Vec<S>>,
}

impl<S: Scalar> ChainState<S> {
    /// Starts a chain, evaluating the model once at `position`.
    pub fn new<M: EnergyModel<S> + ?Sized>(
        position: ParameterVector<S>,
        model: &M,
    ) -> Result<Self, SamplerError> {
        if !position.is_finite() {
            return Err(SamplerError::NonFinitePosition {
                position: to_f64_vec(&position),
            });
        }
        let (last_energy, grad_cache) = if model.joint_evaluation() {
            let (e, g) = model.energy_and_gradient(&position)?;
            (e, Some(g))
        } else {
            (model.energy(&position)?, None)
        };
        Ok(Self {
            position,
            step_count: 0,
            last_energy,
            rejected: 0,
            grad_cache,
        })
    }

    /// Moves the chain to a position whose energy under this chain's model is
    /// already known (used after a replica swap).
    pub fn relocate(&mut self, position: ParameterVector<S>, energy: S) {
        self.position = position;
        self.last_energy = energy;
        self.grad_cache = None;
    }

    pub fn snapshot(&self) -> Snapshot<S> {
        Snapshot {
            step: self.step_count,
            position: self.position.to_vec(),
            energy: self.last_energy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Moved,
    /// The proposal left the support; the chain stayed put.
    Rejected,
}

/// One SGLD update. `step_count` increases by one whether or not the
/// proposal is kept.
pub fn sgld_step<S, M, R>(
    state: &mut ChainState<S>,
    config: &ChainConfig<S>,
    model: &M,
    rng: &mut R,
) -> Result<StepOutcome, SamplerError>
where
    S: Scalar,
    M: EnergyModel<S> + ?Sized,
    R: Rng + ?Sized,
{
    let grad = match state.grad_cache.take() {
        Some(g) => g,
        None => model.gradient(&state.position)?,
    };
    if grad.len() != state.position.dim() || grad.iter().any(|g| !g.is_finite()) {
        return Err(SamplerError::NonFiniteGradient {
            position: to_f64_vec(&state.position),
        });
    }

    let eta = config.step_size_at(state.step_count);
    let noise = config.noise_scale_at(state.step_count);
    let proposal: Vec<S> = state
        .position
        .iter()
        .zip(&grad)
        .map(|(&x, &g)| {
            let xi: S = standard_normal(rng);
            x - eta * g + noise * xi
        })
        .collect();
    state.step_count += 1;

    if proposal.iter().any(|v| !v.is_finite()) {
        return Err(SamplerError::NonFinitePosition {
            position: to_f64_vec(&state.position),
        });
    }
    if !model.in_support(&proposal) {
        state.rejected += 1;
        state.grad_cache = Some(grad);
        return Ok(StepOutcome::Rejected);
    }

    if model.joint_evaluation() {
        let (e, g) = model.energy_and_gradient(&proposal)?;
        state.last_energy = e;
        state.grad_cache = Some(g);
    } else {
        state.last_energy = model.energy(&proposal)?;
    }
    state.position = ParameterVector::new(proposal);
    Ok(StepOutcome::Moved)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<S> {
    pub step: u64,
    pub position: Vec<S>,
    pub energy: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrajectory<S> {
    pub snapshots: Vec<Snapshot<S>>,
    pub final_state: ChainState<S>,
}

/// Runs `n_steps` SGLD steps and records a snapshot every `thinning` steps.
pub fn run_chain<S, M, R>(
    init: ParameterVector<S>,
    config: &ChainConfig<S>,
    model: &M,
    n_steps: u64,
    thinning: u64,
    rng: &mut R,
) -> Result<ChainTrajectory<S>, SamplerError>
where
    S: Scalar,
    M: EnergyModel<S> + ?Sized,
    R: Rng + ?Sized,
{
    if n_steps == 0 {
        return Err(SamplerError::ZeroSteps);
    }
    if thinning == 0 {
        return Err(SamplerError::ZeroThinning);
    }
    config.validate()?;
    let mut state = ChainState::new(init, model)?;
    let mut snapshots = Vec::with_capacity((n_steps / thinning) as usize);
    for k in 1..=n_steps {
        sgld_step(&mut state, config, model, rng).map_err(|e| e.at_step(k))?;
        if k % thinning == 0 {
            snapshots.push(state.snapshot());
        }
    }
    Ok(ChainTrajectory {
        snapshots,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    /// U(x) = sum x_i^2 / 2 with exact gradient.
    struct Quadratic;

    impl EnergyModel<f64> for Quadratic {
        fn energy(&self, x: &[f64]) -> Result<f64, EnergyError> {
            Ok(x.iter().map(|v| 0.5 * v * v).sum())
        }
        fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EnergyError> {
            Ok(x.to_vec())
        }
        fn sigma(&self) -> f64 {
            0.0
        }
    }

    struct Flat;

    impl EnergyModel<f64> for Flat {
        fn energy(&self, _: &[f64]) -> Result<f64, EnergyError> {
            Ok(0.0)
        }
        fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EnergyError> {
            Ok(vec![0.0; x.len()])
        }
        fn sigma(&self) -> f64 {
            0.0
        }
    }

    struct Exploding;

    impl EnergyModel<f64> for Exploding {
        fn energy(&self, _: &[f64]) -> Result<f64, EnergyError> {
            Ok(0.0)
        }
        fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EnergyError> {
            Ok(vec![f64::NAN; x.len()])
        }
        fn sigma(&self) -> f64 {
            0.0
        }
    }

    #[test]
    fn zero_temperature_is_gradient_descent() {
        let cfg = ChainConfig::new(0.0, 0.1, 0.0).unwrap();
        let mut st = ChainState::new(vec![1.0].into(), &Quadratic).unwrap();
        sgld_step(&mut st, &cfg, &Quadratic, &mut stream_rng(0, 0)).unwrap();
        assert_eq!(st.position[0], 0.9);
        assert_eq!(st.step_count, 1);
        assert_eq!(st.last_energy, 0.5 * 0.81);
    }

    #[test]
    fn drift_free_step_is_pure_noise() {
        let cfg = ChainConfig::new(1.0, 0.01, 0.0).unwrap();
        let mut st = ChainState::new(vec![0.0].into(), &Flat).unwrap();
        sgld_step(&mut st, &cfg, &Flat, &mut stream_rng(3, 9)).unwrap();
        let eps: f64 = standard_normal(&mut stream_rng(3, 9));
        assert_eq!(st.position[0], 0.02_f64.sqrt() * eps);
    }

    #[test]
    fn non_finite_gradient_reports_position() {
        let cfg = ChainConfig::new(1.0, 0.01, 0.0).unwrap();
        let mut st = ChainState::new(vec![0.25, 0.5].into(), &Exploding).unwrap();
        let err = sgld_step(&mut st, &cfg, &Exploding, &mut stream_rng(0, 0)).unwrap_err();
        match err {
            SamplerError::NonFiniteGradient { position } => assert_eq!(position, vec![0.25, 0.5]),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn run_chain_thinning_and_errors() {
        let cfg = ChainConfig::new(1.0, 0.01, 0.0).unwrap();
        let mut rng = stream_rng(1, 1);
        let tr = run_chain(vec![0.0].into(), &cfg, &Quadratic, 10, 1, &mut rng).unwrap();
        assert_eq!(tr.snapshots.len(), 10);
        let tr = run_chain(vec![0.0].into(), &cfg, &Quadratic, 10, 3, &mut rng).unwrap();
        assert_eq!(tr.snapshots.len(), 3);
        let err = run_chain(vec![0.0].into(), &cfg, &Quadratic, 0, 1, &mut rng).unwrap_err();
        assert_eq!(err.to_string(), "n_steps must be positive");
        let err = run_chain(vec![0.0].into(), &cfg, &Exploding, 5, 1, &mut rng).unwrap_err();
        assert!(matches!(err, SamplerError::AtStep { step: 1, .. }));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let cfg = ChainConfig::new(0.5, 0.01, 0.0).unwrap();
        let run = || {
            run_chain(vec![1.0, -1.0].into(), &cfg, &Quadratic, 200, 7, &mut stream_rng(11, 1)).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::new(-1.0, 0.1, 0.0).is_err());
        assert!(ChainConfig::new(1.0, 0.0, 0.0).is_err());
        assert!(ChainConfig::new(1.0, 0.1, -0.5).is_err());
        let cfg: ChainConfig<f64> = ChainConfig::new(1.0, 0.1, 0.0)
            .unwrap()
            .with_schedule(StepSchedule::PolynomialDecay { scale: 10.0, power: 1.0 });
        assert_eq!(cfg.step_size_at(0), 0.1);
        assert!((cfg.step_size_at(10) - 0.05).abs() < 1e-15);
    }
}
