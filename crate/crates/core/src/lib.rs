//! Multi-variance replica-exchange stochastic gradient Langevin dynamics.
//!
//! * [`sampler`]: single-chain SGLD and the [`EnergyModel`] contract.
//! * [`replica`]: two-chain replica exchange with exact, single-variance and
//!   multi-variance swap factors.
//! * [`fem`]: P1 finite elements for the 2-D contamination problem at two mesh
//!   fidelities.
//! * [`inverse`]: posterior energies for locating a contamination source from
//!   sensor readings, plus mode-coverage diagnostics.
//! * [`pinn`]: Bayesian physics-informed networks with exact input derivatives
//!   and parameter gradients.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod fem;
pub mod inverse;
pub mod pinn;
pub mod replica;
pub mod rng;
pub mod sampler;
pub mod targets;
mod scalar;

pub use replica::{SwapConfig, SwapEnergies, SwapEstimator};
pub use sampler::{ChainConfig, ChainState, EnergyError, EnergyModel, ParameterVector, SamplerError};
pub use scalar::{dot, fmt_sig9, norm2, Scalar};

pub type Params = ParameterVector<f64>;
pub type Chain = ChainState<f64>;
pub type ChainSettings = ChainConfig<f64>;
pub type Swap = SwapConfig<f64>;
