//! Finite-element forward model for a contaminant released from a point-like
//! source in the unit square.
//!
//! The concentration obeys `u_t = Laplace(u) + f` on `[0,1]^2`, with the
//! manufactured solution
//!
//! ```text
//! u(x, t) = beta * exp(-|x - x0|^2 / alpha) * exp(-t),   alpha = 2 h^2,  beta = M / (2 pi h^2)
//! ```
//!
//! supplying the initial condition, the Dirichlet data and the source `f`.

use std::io::{self, Write};

use thiserror::Error;

use crate::{fmt_sig9, Scalar};

pub mod mesh;
pub mod reduced;
pub mod solver;
pub mod sparse;

pub use mesh::Mesh;
pub use reduced::ReducedObservation;
pub use solver::{solve_forward, FemSolver};

pub type Point<S> = [S; 2];

#[derive(Debug, Error)]
pub enum FemError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("point {point:?} lies outside the mesh")]
    OutsideMesh { point: [f64; 2] },
    #[error("system matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {relative_residual:e})")]
    SolverDiverged {
        iterations: usize,
        relative_residual: f64,
    },
    #[error("linear solve failed on the {cells}x{cells} mesh with dt = {dt}: {source}")]
    LinearSolve {
        cells: usize,
        dt: f64,
        #[source]
        source: Box<FemError>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceParams<S> {
    /// Source location in the unit square.
    pub x0: Point<S>,
    /// Source radius `h`.
    pub radius: S,
    /// Contamination strength `M`.
    pub strength: S,
}

impl<S: Scalar> SourceParams<S> {
    pub fn new(x0: Point<S>, radius: S, strength: S) -> Result<Self, FemError> {
        let p = Self { x0, radius, strength };
        p.validate()?;
        Ok(p)
    }

    /// Radius 0.1 and unit strength.
    pub fn at(x0: Point<S>) -> Result<Self, FemError> {
        Self::new(x0, S::of(0.1), S::one())
    }

    pub fn validate(&self) -> Result<(), FemError> {
        let unit = |v: S| v >= S::zero() && v <= S::one();
        if !(unit(self.x0[0]) && unit(self.x0[1])) {
            return Err(FemError::InvalidProblem(format!(
                "source location ({}, {}) outside the unit square",
                self.x0[0], self.x0[1]
            )));
        }
        if !(self.radius > S::zero() && self.strength > S::zero()) {
            return Err(FemError::InvalidProblem("radius and strength must be positive".into()));
        }
        Ok(())
    }

    /// `2 h^2`
    pub fn alpha(&self) -> S {
        S::of(2.0) * self.radius * self.radius
    }

    /// `M / (2 pi h^2)`
    pub fn beta(&self) -> S {
        self.strength / (S::of(2.0 * std::f64::consts::PI) * self.radius * self.radius)
    }

    pub fn with_location(&self, x0: Point<S>) -> Self {
        Self { x0, ..*self }
    }
}

fn dist2<S: Scalar>(a: Point<S>, b: Point<S>) -> S {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

pub fn exact_solution<S: Scalar>(p: &SourceParams<S>, x: Point<S>, t: S) -> S {
    p.beta() * (-dist2(x, p.x0) / p.alpha()).exp() * (-t).exp()
}

/// `f = u_t - Laplace(u) = u * (4/alpha - 4 r^2 / alpha^2 - 1)` for the manufactured `u`.
pub fn manufactured_source<S: Scalar>(p: &SourceParams<S>, x: Point<S>, t: S) -> S {
    let alpha = p.alpha();
    let r2 = dist2(x, p.x0);
    let four = S::of(4.0);
    exact_solution(p, x, t) * (four / alpha - four * r2 / (alpha * alpha) - S::one())
}

/// Mesh resolution plus time grid for one forward solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParabolicProblem<S> {
    pub source: SourceParams<S>,
    /// Cells per side, i.e. `1 / dx`.
    pub cells_per_side: usize,
    pub dt: S,
    pub t_final: S,
}

pub const FINE_CELLS: usize = 50;
pub const COARSE_CELLS: usize = 25;
pub const DEFAULT_DT: f64 = 0.0005;
pub const DEFAULT_T_FINAL: f64 = 0.03;

impl<S: Scalar> ParabolicProblem<S> {
    pub fn new(source: SourceParams<S>, cells_per_side: usize, dt: S, t_final: S) -> Result<Self, FemError> {
        let p = Self {
            source,
            cells_per_side,
            dt,
            t_final,
        };
        p.validate()?;
        Ok(p)
    }

    /// `dx = 1/50`, `dt = 0.0005`, `T = 0.03`.
    pub fn fine(source: SourceParams<S>) -> Self {
        Self::new(source, FINE_CELLS, S::of(DEFAULT_DT), S::of(DEFAULT_T_FINAL)).expect("valid defaults")
    }

    /// `dx = 1/25`, same time grid as [`ParabolicProblem::fine`].
    pub fn coarse(source: SourceParams<S>) -> Self {
        Self::new(source, COARSE_CELLS, S::of(DEFAULT_DT), S::of(DEFAULT_T_FINAL)).expect("valid defaults")
    }

    pub fn validate(&self) -> Result<(), FemError> {
        self.source.validate()?;
        if self.cells_per_side == 0 {
            return Err(FemError::InvalidProblem("cells_per_side must be positive".into()));
        }
        if !(self.dt > S::zero() && self.t_final > S::zero()) {
            return Err(FemError::InvalidProblem("dt and t_final must be positive".into()));
        }
        let ratio = (self.t_final / self.dt).as_f64();
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return Err(FemError::InvalidProblem(format!(
                "t_final / dt = {ratio} is not an integer"
            )));
        }
        Ok(())
    }

    pub fn n_time_steps(&self) -> usize {
        (self.t_final / self.dt).as_f64().round() as usize
    }

    pub fn dx(&self) -> S {
        S::one() / S::of(self.cells_per_side as f64)
    }

    pub fn with_source(&self, source: SourceParams<S>) -> Self {
        Self { source, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorSet<S> {
    pub locations: Vec<Point<S>>,
    pub observation_time: S,
}

impl<S: Scalar> SensorSet<S> {
    pub fn new(locations: Vec<Point<S>>, observation_time: S) -> Self {
        Self {
            locations,
            observation_time,
        }
    }

    /// Moves every sensor to its nearest node of a `cells`-per-side mesh and
    /// returns the largest distance moved.
    pub fn snapped_to(locations: &[Point<S>], cells: usize, observation_time: S) -> Result<(Self, S), FemError> {
        let mesh = Mesh::unit_square(cells)?;
        let mut max_snap = S::zero();
        let mut snapped = Vec::with_capacity(locations.len());
        for &p in locations {
            mesh.locate(p)?;
            let (k, d) = mesh.nearest_node(p);
            max_snap = max_snap.max(d);
            snapped.push(mesh.nodes()[k]);
        }
        Ok((Self::new(snapped, observation_time), max_snap))
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Nodal field at the final time of a solve.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSolution<S> {
    pub mesh: Mesh<S>,
    pub values: Vec<S>,
    pub time: S,
}

impl<S: Scalar> FieldSolution<S> {
    /// Piecewise-linear interpolation; exact nodal value at mesh nodes.
    pub fn value_at(&self, p: Point<S>) -> Result<S, FemError> {
        let loc = self.mesh.locate(p)?;
        Ok((0..3).map(|k| loc.weights[k] * self.values[loc.nodes[k]]).sum())
    }

    /// Nodal relative L2 error against the exact solution at `self.time`.
    pub fn relative_l2_error(&self, source: &SourceParams<S>) -> S {
        let mut num = S::zero();
        let mut den = S::zero();
        for (x, &v) in self.mesh.nodes().iter().zip(&self.values) {
            let u = exact_solution(source, *x, self.time);
            num += (v - u) * (v - u);
            den += u * u;
        }
        (num / den).sqrt()
    }

    /// CSV dump of `(x, y, u)` nodal triples.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,y,u")?;
        for (x, v) in self.mesh.nodes().iter().zip(&self.values) {
            writeln!(w, "{},{},{}", fmt_sig9(x[0]), fmt_sig9(x[1]), fmt_sig9(*v))?;
        }
        Ok(())
    }
}

/// Sensor readings of a computed field.
pub fn observe<S: Scalar>(sol: &FieldSolution<S>, sensors: &SensorSet<S>) -> Result<Vec<S>, FemError> {
    sensors.locations.iter().map(|&p| sol.value_at(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(x0: Point<f64>) -> SourceParams<f64> {
        SourceParams::at(x0).unwrap()
    }

    #[test]
    fn peak_value_is_beta() {
        let p = src([0.3, 0.4]);
        let v = exact_solution(&p, [0.3, 0.4], 0.0);
        assert!((v - 15.915494309189533).abs() < 1e-12);
        assert!((p.alpha() - 0.02).abs() < 1e-16);
    }

    #[test]
    fn sensor_value_at_radius_point_two() {
        let p = src([0.5, 0.5]);
        let v = exact_solution(&p, [0.5, 0.7], 0.03);
        // beta * e^{-2} * e^{-0.03}
        let expected = 15.915494309189533 * (-2.0_f64).exp() * (-0.03_f64).exp();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 2.090270).abs() < 1e-6);
    }

    #[test]
    fn time_factor_separates() {
        let p = src([0.2, 0.9]);
        for &(x, t) in &[([0.1, 0.1], 0.3), ([0.7, 0.2], 1.5)] {
            let a = exact_solution(&p, x, t);
            let b = exact_solution(&p, x, 0.0) * (-t).exp();
            assert!((a - b).abs() <= 1e-14 * b.abs());
            let fa = manufactured_source(&p, x, t);
            let fb = manufactured_source(&p, x, 0.0) * (-t).exp();
            assert!((fa - fb).abs() <= 1e-13 * fb.abs());
        }
    }

    #[test]
    fn source_vanishes_on_its_sign_change_circle() {
        let p = src([0.5, 0.5]);
        // 4/alpha - 4 r^2/alpha^2 = 1  <=>  r^2 = alpha - alpha^2 / 4 = 0.0199
        let r = 0.0199_f64.sqrt();
        let f = manufactured_source(&p, [0.5 + r, 0.5], 0.1);
        assert!(f.abs() < 1e-12, "{f}");
        assert!(manufactured_source(&p, [0.5, 0.5], 0.0) > 0.0);
        assert!(manufactured_source(&p, [0.5, 0.9], 0.0) < 0.0);
    }

    #[test]
    fn problem_validation() {
        let s = src([0.5, 0.5]);
        assert!(ParabolicProblem::new(s, 10, 0.0007, 0.03).is_err());
        assert_eq!(ParabolicProblem::fine(s).n_time_steps(), 60);
        assert!(SourceParams::at([1.2, 0.5]).is_err());
    }

    #[test]
    fn sensors_snap_to_nodes() {
        let (s, d) = SensorSet::<f64>::snapped_to(&[[0.5, 0.3], [0.501, 0.6]], 50, 0.03).unwrap();
        assert!((d - 0.001).abs() < 1e-12);
        assert_eq!(s.locations[1], [0.5, 0.6]);
        assert!(SensorSet::snapped_to(&[[1.5, 0.3]], 50, 0.03).is_err());
    }
}
