//! Strong discretization error of the replica pair, measured by coupling a
//! run at step `eta` with a run at `eta / 4` that shares its Brownian path.
//!
//! Each coarse step consumes four fine normal draws per chain; the coarse run
//! uses their scaled sum `(xi_1 + ... + xi_4) / 2`, which has unit variance and
//! is the same Brownian increment. Swaps share uniforms as well: the fine run
//! tests `u_j < min(1, r (eta/4) S)` after each substep, while the coarse run
//! swaps when some `u_j` falls below the per-substep level `q` that makes four
//! trials add up to `min(1, r eta S)`.

use super::{swap_factor_exact, SwapConfig};
use crate::rng::{standard_normal, stream_rng, uniform01};
use crate::sampler::{EnergyModel, SamplerError};

const SUBSTEPS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledRun {
    pub eta: f64,
    /// Mean over paths of the terminal distance between the two runs, both
    /// chains stacked.
    pub mean_deviation: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Paths whose coarse and fine runs disagreed on at least one swap.
    pub swap_mismatches: usize,
}

struct Pair {
    low: Vec<f64>,
    high: Vec<f64>,
}

fn langevin<M: EnergyModel<f64> + ?Sized>(
    model: &M,
    x: &mut [f64],
    eta: f64,
    tau: f64,
    noise: &[f64],
) -> Result<(), SamplerError> {
    let g = model.gradient(x)?;
    let scale = (2.0 * eta * tau).sqrt();
    for ((xi, gi), ni) in x.iter_mut().zip(&g).zip(noise) {
        *xi += -eta * gi + scale * ni;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SamplerError::NonFinitePosition { position: x.to_vec() });
    }
    Ok(())
}

fn swap_probability<M: EnergyModel<f64> + ?Sized>(
    model: &M,
    pair: &Pair,
    cfg: &SwapConfig<f64>,
    eta: f64,
) -> Result<f64, SamplerError> {
    let s = swap_factor_exact(model.energy(&pair.low)?, model.energy(&pair.high)?, cfg).value;
    Ok((cfg.intensity * eta * s).min(1.0))
}

/// Runs `n_paths` coupled path pairs over `[0, horizon]` with exact energies
/// from `model` (shared by both chains) and returns the terminal deviation.
#[allow(clippy::too_many_arguments)]
pub fn coupled_deviation<M: EnergyModel<f64> + ?Sized>(
    model: &M,
    cfg: &SwapConfig<f64>,
    eta: f64,
    horizon: f64,
    init_low: &[f64],
    init_high: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<CoupledRun, SamplerError> {
    cfg.validate()?;
    if !(eta > 0.0 && horizon >= eta) {
        return Err(SamplerError::InvalidConfig("need 0 < eta <= horizon".into()));
    }
    if n_paths < 2 || init_low.len() != init_high.len() {
        return Err(SamplerError::InvalidConfig(
            "need at least two paths and matching initial dimensions".into(),
        ));
    }
    let n_coarse = (horizon / eta).round() as usize;
    let fine_eta = eta / SUBSTEPS as f64;
    let d = init_low.len();
    let mut rng = stream_rng(seed, 0);
    let mut devs = Vec::with_capacity(n_paths);
    let mut mismatches = 0;

    for _ in 0..n_paths {
        let mut coarse = Pair {
            low: init_low.to_vec(),
            high: init_high.to_vec(),
        };
        let mut fine = Pair {
            low: init_low.to_vec(),
            high: init_high.to_vec(),
        };
        let mut mismatch = false;
        for _ in 0..n_coarse {
            let mut sum_low = vec![0.0; d];
            let mut sum_high = vec![0.0; d];
            let mut uniforms = [0.0; SUBSTEPS];
            let mut fine_swapped = false;
            for u in uniforms.iter_mut() {
                let nl: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
                let nh: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
                *u = uniform01(&mut rng);
                sum_low.iter_mut().zip(&nl).for_each(|(s, v)| *s += v);
                sum_high.iter_mut().zip(&nh).for_each(|(s, v)| *s += v);
                langevin(model, &mut fine.low, fine_eta, cfg.tau_low, &nl)?;
                langevin(model, &mut fine.high, fine_eta, cfg.tau_high, &nh)?;
                if *u < swap_probability(model, &fine, cfg, fine_eta)? {
                    std::mem::swap(&mut fine.low, &mut fine.high);
                    fine_swapped = !fine_swapped;
                }
            }
            let half = 1.0 / (SUBSTEPS as f64).sqrt();
            sum_low.iter_mut().chain(sum_high.iter_mut()).for_each(|s| *s *= half);
            langevin(model, &mut coarse.low, eta, cfg.tau_low, &sum_low)?;
            langevin(model, &mut coarse.high, eta, cfg.tau_high, &sum_high)?;
            let p = swap_probability(model, &coarse, cfg, eta)?;
            let q = 1.0 - (1.0 - p).powf(1.0 / SUBSTEPS as f64);
            let coarse_swapped = uniforms.iter().any(|&u| u < q);
            if coarse_swapped {
                std::mem::swap(&mut coarse.low, &mut coarse.high);
            }
            mismatch |= coarse_swapped != fine_swapped;
        }
        mismatches += usize::from(mismatch);
        let dist2: f64 = coarse
            .low
            .iter()
            .zip(&fine.low)
            .chain(coarse.high.iter().zip(&fine.high))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        devs.push(dist2.sqrt());
    }

    let n = devs.len() as f64;
    let mean = devs.iter().sum::<f64>() / n;
    let var = devs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(CoupledRun {
        eta,
        mean_deviation: mean,
        std_error: (var / n).sqrt(),
        n_paths: devs.len(),
        swap_mismatches: mismatches,
    })
}

/// Convenience wrapper over a ladder of step sizes, sharing the seed.
#[allow(clippy::too_many_arguments)]
pub fn deviation_ladder<M: EnergyModel<f64> + ?Sized>(
    model: &M,
    cfg: &SwapConfig<f64>,
    etas: &[f64],
    horizon: f64,
    init_low: &[f64],
    init_high: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<CoupledRun>, SamplerError> {
    etas.iter()
        .map(|&eta| coupled_deviation(model, cfg, eta, horizon, init_low, init_high, n_paths, seed))
        .collect()
}

/// True when every entry is strictly below its predecessor.
pub fn strictly_decreasing(runs: &[CoupledRun]) -> bool {
    runs.windows(2).all(|w| w[1].mean_deviation < w[0].mean_deviation)
}
