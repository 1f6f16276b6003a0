//! Sensor readings of the time-stepped solution as linear functionals of the
//! initial nodal field and the source.
//!
//! For the manufactured problem every input separates in time
//! (`f^n = e^{-t_n} f^0`, `g^n = e^{-t_n} g^0`), and the backward-Euler map is
//! linear in `(u^0, f^0)`. One adjoint sweep per sensor therefore yields
//! nodal weights `w_u, w_f` with
//!
//! ```text
//! reading = w_u . u^0 + w_f . f^0
//! ```
//!
//! equal to observing [`FemSolver::solve`] up to the linear-solve tolerance.
//! Adjoint recursion, with `A = (M + dt K)_II` and `c` the interpolation weights:
//!
//! ```text
//! lambda_N = A^{-1} c_I,   lambda_{n-1} = A^{-1} M_II lambda_n
//! ```

use crate::Scalar;

use super::solver::FemSolver;
use super::{exact_solution, manufactured_source, FemError, Point, SensorSet, SourceParams};

#[derive(Clone, Debug)]
pub struct ReducedObservation<S> {
    nodes: Vec<Point<S>>,
    weights_u0: Vec<Vec<S>>,
    weights_f0: Vec<Vec<S>>,
    cells: usize,
}

impl<S: Scalar> ReducedObservation<S> {
    pub fn new(solver: &FemSolver<S>, sensors: &SensorSet<S>) -> Result<Self, FemError> {
        let t_final = solver.t_final();
        if (sensors.observation_time - t_final).abs() > S::of(1e-9).max(S::epsilon() * S::of(8.0)) {
            return Err(FemError::InvalidProblem(format!(
                "sensors observe at t = {} but the solver stops at t = {}",
                sensors.observation_time, t_final
            )));
        }
        let solver = solver.clone().with_tolerance(S::of(1e-13));
        let mesh = solver.mesh();
        let n_nodes = mesh.n_nodes();
        let interior = solver.interior();
        let boundary = solver.boundary();
        let dt = solver.dt();
        let n_steps = solver.n_steps();
        let decay = |step: usize| (-(dt * S::of(step as f64))).exp();

        let extend = |v: &[S]| {
            let mut full = vec![S::zero(); n_nodes];
            for (&k, &x) in interior.iter().zip(v) {
                full[k] = x;
            }
            full
        };
        let restrict = |full: &[S]| interior.iter().map(|&k| full[k]).collect::<Vec<S>>();

        let mut weights_u0 = Vec::with_capacity(sensors.len());
        let mut weights_f0 = Vec::with_capacity(sensors.len());
        for &p in &sensors.locations {
            let loc = mesh.locate(p)?;
            let mut c = vec![S::zero(); n_nodes];
            for k in 0..3 {
                c[loc.nodes[k]] += loc.weights[k];
            }

            let mut lambda = vec![S::zero(); interior.len()];
            solver.solve_interior(&restrict(&c), &mut lambda)?;
            let mut acc_f = vec![S::zero(); interior.len()];
            let mut acc_g_prev = vec![S::zero(); interior.len()];
            let mut acc_g_now = vec![S::zero(); interior.len()];
            let mut w_u0_interior = Vec::new();
            for step in (1..=n_steps).rev() {
                let (now, prev) = (decay(step), decay(step - 1));
                for i in 0..lambda.len() {
                    acc_f[i] += dt * now * lambda[i];
                    acc_g_prev[i] += prev * lambda[i];
                    acc_g_now[i] += now * lambda[i];
                }
                let m_lambda = restrict(&solver.mass().mul_vec(&extend(&lambda)));
                if step == 1 {
                    w_u0_interior = m_lambda;
                } else {
                    let mut next = lambda.clone();
                    solver.solve_interior(&m_lambda, &mut next)?;
                    lambda = next;
                }
            }

            let w_f0 = solver.mass().mul_vec(&extend(&acc_f));
            let m_g = solver.mass().mul_vec(&extend(&acc_g_prev));
            let a_g = solver.system().mul_vec(&extend(&acc_g_now));
            let mut w_u0 = extend(&w_u0_interior);
            for &k in boundary {
                w_u0[k] = m_g[k] - a_g[k] + decay(n_steps) * c[k];
            }
            weights_u0.push(w_u0);
            weights_f0.push(w_f0);
        }
        Ok(Self {
            nodes: mesh.nodes().to_vec(),
            weights_u0,
            weights_f0,
            cells: mesh.cells_per_side(),
        })
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells
    }

    pub fn n_sensors(&self) -> usize {
        self.weights_u0.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Sensor readings at the final time for a source at `source.x0`.
    pub fn observe(&self, source: &SourceParams<S>) -> Vec<S> {
        let mut out = vec![S::zero(); self.n_sensors()];
        self.observe_into(source, &mut out);
        out
    }

    pub fn observe_into(&self, source: &SourceParams<S>, out: &mut [S]) {
        out.iter_mut().for_each(|v| *v = S::zero());
        for (k, &x) in self.nodes.iter().enumerate() {
            let u0 = exact_solution(source, x, S::zero());
            if u0 == S::zero() {
                continue;
            }
            let f0 = manufactured_source(source, x, S::zero());
            for (s, o) in out.iter_mut().enumerate() {
                *o += self.weights_u0[s][k] * u0 + self.weights_f0[s][k] * f0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::observe;

    #[test]
    fn matches_time_stepping() {
        let solver: FemSolver<f64> = FemSolver::new(12, 0.0025, 12).unwrap();
        let sensors = SensorSet::new(vec![[0.5, 0.3], [0.37, 0.61], [0.0, 0.2]], 0.03);
        let reduced = ReducedObservation::new(&solver, &sensors).unwrap();
        for x0 in [[0.5, 0.45], [0.2, 0.8], [0.93, 0.1]] {
            let src = SourceParams::at(x0).unwrap();
            let direct = observe(&solver.solve(&src).unwrap(), &sensors).unwrap();
            let fast = reduced.observe(&src);
            for (a, b) in direct.iter().zip(&fast) {
                assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {b} at {x0:?}");
            }
        }
    }

    #[test]
    fn rejects_mismatched_observation_time() {
        let solver: FemSolver<f64> = FemSolver::new(4, 0.01, 3).unwrap();
        let sensors = SensorSet::new(vec![[0.5, 0.5]], 0.05);
        assert!(ReducedObservation::new(&solver, &sensors).is_err());
    }
}
