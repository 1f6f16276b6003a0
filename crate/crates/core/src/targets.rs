//! Small closed-form energies with exact gradients, for checking samplers.

use crate::sampler::{EnergyError, EnergyModel};
use crate::Scalar;

/// `U(x) = |x|^2 / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quadratic;

impl<S: Scalar> EnergyModel<S> for Quadratic {
    fn energy(&self, x: &[S]) -> Result<S, EnergyError> {
        Ok(x.iter().map(|&v| v * v).sum::<S>() * S::of(0.5))
    }

    fn gradient(&self, x: &[S]) -> Result<Vec<S>, EnergyError> {
        Ok(x.to_vec())
    }

    fn sigma(&self) -> S {
        S::zero()
    }
}

/// `U(x) = height * sum_i (x_i^2 - 1)^2`, minima at `x_i = +-1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubleWell<S> {
    pub height: S,
}

impl<S: Scalar> Default for DoubleWell<S> {
    fn default() -> Self {
        Self { height: S::one() }
    }
}

impl<S: Scalar> DoubleWell<S> {
    /// Unnormalized density `exp(-U(x)/tau)` of one coordinate.
    pub fn density(&self, x: f64, tau: f64) -> f64 {
        let w = x * x - 1.0;
        (-self.height.as_f64() * w * w / tau).exp()
    }
}

impl<S: Scalar> EnergyModel<S> for DoubleWell<S> {
    fn energy(&self, x: &[S]) -> Result<S, EnergyError> {
        Ok(x.iter()
            .map(|&v| {
                let w = v * v - S::one();
                w * w
            })
            .sum::<S>()
            * self.height)
    }

    fn gradient(&self, x: &[S]) -> Result<Vec<S>, EnergyError> {
        Ok(x.iter()
            .map(|&v| S::of(4.0) * self.height * v * (v * v - S::one()))
            .collect())
    }

    fn sigma(&self) -> S {
        S::zero()
    }
}

/// Equal-weight mixture of two 1-D normals at `+-center` with spread `std`:
/// `U(x) = -log(0.5 N(x; -c, s^2) + 0.5 N(x; c, s^2))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianMixture<S> {
    pub center: S,
    pub std: S,
}

impl<S: Scalar> GaussianMixture<S> {
    fn parts(&self, x: S) -> (S, S) {
        let two = S::of(2.0);
        let var = self.std * self.std;
        let a = (x + self.center) * (x + self.center) / (two * var);
        let b = (x - self.center) * (x - self.center) / (two * var);
        (a, b)
    }
}

impl<S: Scalar> EnergyModel<S> for GaussianMixture<S> {
    fn energy(&self, x: &[S]) -> Result<S, EnergyError> {
        let (a, b) = self.parts(x[0]);
        let m = a.min(b);
        // -log(0.5 e^-a + 0.5 e^-b) up to the normalizing constant
        let norm = (S::of(2.0 * std::f64::consts::PI).sqrt() * self.std).ln();
        Ok(m - (S::of(0.5) * ((m - a).exp() + (m - b).exp())).ln() + norm)
    }

    fn gradient(&self, x: &[S]) -> Result<Vec<S>, EnergyError> {
        let (a, b) = self.parts(x[0]);
        let m = a.min(b);
        let (wa, wb) = ((m - a).exp(), (m - b).exp());
        let var = self.std * self.std;
        let ga = (x[0] + self.center) / var;
        let gb = (x[0] - self.center) / var;
        Ok(vec![(wa * ga + wb * gb) / (wa + wb)])
    }

    fn sigma(&self) -> S {
        S::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<M: EnergyModel<f64>>(m: &M, x: f64) -> f64 {
        let h = 1e-6;
        (m.energy(&[x + h]).unwrap() - m.energy(&[x - h]).unwrap()) / (2.0 * h)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let dw = DoubleWell { height: 1.5 };
        let gm = GaussianMixture { center: 3.0, std: 0.5 };
        for x in [-2.2, -0.7, 0.0, 0.4, 1.3, 3.1] {
            assert!((dw.gradient(&[x]).unwrap()[0] - fd(&dw, x)).abs() < 1e-6);
            assert!((gm.gradient(&[x]).unwrap()[0] - fd(&gm, x)).abs() < 1e-5);
            assert!((EnergyModel::<f64>::gradient(&Quadratic, &[x]).unwrap()[0] - fd(&Quadratic, x)).abs() < 1e-6);
        }
    }

    #[test]
    fn double_well_minima_and_barrier() {
        let dw = DoubleWell::<f64>::default();
        assert_eq!(dw.energy(&[1.0]).unwrap(), 0.0);
        assert_eq!(dw.energy(&[-1.0]).unwrap(), 0.0);
        assert_eq!(dw.energy(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn mixture_is_symmetric_and_normalized() {
        let gm = GaussianMixture::<f64> { center: 3.0, std: 0.5 };
        assert!((gm.energy(&[2.0]).unwrap() - gm.energy(&[-2.0]).unwrap()).abs() < 1e-12);
        // trapezoid integral of exp(-U) over [-8, 8]
        let n = 16000;
        let h = 16.0 / n as f64;
        let mass: f64 = (0..=n)
            .map(|k| {
                let x = -8.0 + k as f64 * h;
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                w * (-gm.energy(&[x]).unwrap()).exp()
            })
            .sum::<f64>()
            * h;
        assert!((mass - 1.0).abs() < 1e-6);
    }
}
