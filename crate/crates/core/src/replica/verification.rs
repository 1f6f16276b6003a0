//! Monte-Carlo check that the multi-variance swap factor is unbiased.
//!
//! Noise model (shared shock): with `xi, xi'` i.i.d. standard normal,
//!
//! ```text
//! U1_hat(b1) = U(b1) + sigma1 * xi     U1_hat(b2) = U(b2) + sigma1 * xi'
//! U2_hat(b1) = U(b1) + sigma2 * xi     U2_hat(b2) = U(b2) + sigma2 * xi'
//! ```
//!
//! so each estimator difference is `dU + sqrt(2) * sigma_i * W` with one
//! common `W`. The sample mean of the factor is compared against the exact
//! `exp(tau_d * dU)` through a z-score.

use rand::Rng;

use super::{swap_factor_multi_variance_signed, CombineSign, SwapConfig, SwapEnergies};
use crate::rng::{standard_normal, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellSpec {
    pub tau_low: f64,
    pub tau_high: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub a1: f64,
    /// True energy at the low chain's position.
    pub u_low: f64,
    /// True energy at the high chain's position.
    pub u_high: f64,
}

impl CellSpec {
    pub fn swap_config(&self) -> SwapConfig<f64> {
        SwapConfig::new(self.tau_low, self.tau_high, 1.0)
            .and_then(|c| c.with_weight(self.a1))
            .and_then(|c| c.with_sigmas(self.sigma1, self.sigma2))
            .and_then(|c| c.with_max_factor(f64::MAX))
            .expect("grid cell is a valid swap configuration")
    }

    /// `exp((1/tau_low - 1/tau_high) * (u_low - u_high))`, computed directly.
    pub fn exact_factor(&self) -> f64 {
        ((1.0 / self.tau_low - 1.0 / self.tau_high) * (self.u_low - self.u_high)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellReport {
    pub cell: CellSpec,
    pub exact: f64,
    pub mean: f64,
    pub std_error: f64,
    pub z: f64,
    /// Mean under four independent shocks; reported, never asserted.
    pub independent_mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnbiasednessReport {
    pub sign: CombineSign,
    pub draws: usize,
    pub z_threshold: f64,
    pub cells: Vec<CellReport>,
}

impl UnbiasednessReport {
    pub fn max_abs_z(&self) -> f64 {
        self.cells.iter().map(|c| c.z.abs()).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.cells.iter().all(|c| c.z.abs() <= self.z_threshold)
    }

    pub fn failing_cells(&self) -> impl Iterator<Item = &CellReport> {
        self.cells.iter().filter(|c| !(c.z.abs() <= self.z_threshold))
    }
}

/// 2 temperature pairs x 3 sigma pairs x 3 weights, with `U(b1) = 2`, `U(b2) = 0`.
pub fn default_grid() -> Vec<CellSpec> {
    let mut grid = Vec::new();
    for &(tau_low, tau_high) in &[(1.0, 2.0), (1.0, 10.0)] {
        for &(sigma1, sigma2) in &[(0.0, 0.0), (0.3, 1.0), (1.0, 1.0)] {
            for &a1 in &[0.3, 0.5, 0.7] {
                grid.push(CellSpec {
                    tau_low,
                    tau_high,
                    sigma1,
                    sigma2,
                    a1,
                    u_low: 2.0,
                    u_high: 0.0,
                });
            }
        }
    }
    grid
}

pub fn monte_carlo_cell<R: Rng + ?Sized>(
    cell: &CellSpec,
    draws: usize,
    sign: CombineSign,
    rng: &mut R,
) -> CellReport {
    assert!(draws >= 2, "need at least two draws");
    let cfg = cell.swap_config();
    let exact = cell.exact_factor();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut indep_sum = 0.0;
    for _ in 0..draws {
        let xi: f64 = standard_normal(rng);
        let xi2: f64 = standard_normal(rng);
        let shared = SwapEnergies {
            u1_low: cell.u_low + cell.sigma1 * xi,
            u1_high: cell.u_high + cell.sigma1 * xi2,
            u2_low: cell.u_low + cell.sigma2 * xi,
            u2_high: cell.u_high + cell.sigma2 * xi2,
        };
        let s = swap_factor_multi_variance_signed(&shared, &cfg, sign).value;
        sum += s;
        sum_sq += s * s;

        let z: [f64; 4] = std::array::from_fn(|_| standard_normal(rng));
        let independent = SwapEnergies {
            u1_low: cell.u_low + cell.sigma1 * z[0],
            u1_high: cell.u_high + cell.sigma1 * z[1],
            u2_low: cell.u_low + cell.sigma2 * z[2],
            u2_high: cell.u_high + cell.sigma2 * z[3],
        };
        indep_sum += swap_factor_multi_variance_signed(&independent, &cfg, sign).value;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    let std_error = (var / n).sqrt();
    let diff = mean - exact;
    let z = if std_error > 0.0 {
        diff / std_error
    } else if diff.abs() <= 1e-12 * exact.abs() {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    CellReport {
        cell: *cell,
        exact,
        mean,
        std_error,
        z,
        independent_mean: indep_sum / n,
    }
}

/// Runs every cell on its own random stream.
pub fn verify_grid(
    grid: &[CellSpec],
    draws: usize,
    seed: u64,
    sign: CombineSign,
    z_threshold: f64,
) -> UnbiasednessReport {
    let cells = grid
        .iter()
        .enumerate()
        .map(|(i, cell)| monte_carlo_cell(cell, draws, sign, &mut stream_rng(seed, 1000 + i as u64)))
        .collect();
    UnbiasednessReport {
        sign,
        draws,
        z_threshold,
        cells,
    }
}
