//! P1 Galerkin in space, backward Euler in time, consistent mass.
//!
//! Each step solves, on interior nodes,
//!
//! ```text
//! (M + dt K)_II u_I^n = M_I. u^{n-1} + dt M_I. f^n - (M + dt K)_IB g^n
//! ```
//!
//! with `f^n` the nodal interpolant of the source and `g^n` the Dirichlet data.
//! Assembly depends only on the mesh and `dt`, so one solver serves every
//! source location.

use crate::Scalar;

use super::mesh::Mesh;
use super::sparse::{conjugate_gradient, CgInfo, CsrMatrix};
use super::{exact_solution, manufactured_source, FemError, FieldSolution, ParabolicProblem, Point, SourceParams};

#[derive(Clone, Debug)]
pub struct FemSolver<S> {
    mesh: Mesh<S>,
    dt: S,
    n_steps: usize,
    mass: CsrMatrix<S>,
    stiffness: CsrMatrix<S>,
    system: CsrMatrix<S>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    system_ii: CsrMatrix<S>,
    inv_diag_ii: Vec<S>,
    rel_tol: S,
    max_iter: usize,
}

/// Solves one problem from scratch.
pub fn solve_forward<S: Scalar>(prob: &ParabolicProblem<S>) -> Result<FieldSolution<S>, FemError> {
    FemSolver::for_problem(prob)?.solve(&prob.source)
}

impl<S: Scalar> FemSolver<S> {
    pub fn new(cells_per_side: usize, dt: S, n_steps: usize) -> Result<Self, FemError> {
        if !(dt > S::zero()) || n_steps == 0 {
            return Err(FemError::InvalidProblem("need dt > 0 and at least one time step".into()));
        }
        let mesh = Mesh::unit_square(cells_per_side)?;
        let (mass, stiffness) = assemble(&mesh);
        let system = mass.add_scaled(S::one(), &stiffness, dt);
        let interior = mesh.interior_nodes();
        let boundary = mesh.boundary_nodes();
        let system_ii = system.submatrix(&interior, &interior);
        let inv_diag_ii = system_ii.diagonal().iter().map(|d| d.recip()).collect();
        Ok(Self {
            mesh,
            dt,
            n_steps,
            mass,
            stiffness,
            system,
            interior,
            boundary,
            system_ii,
            inv_diag_ii,
            rel_tol: S::of(1e-10).max(S::solver_floor()),
            max_iter: 10_000,
        })
    }

    pub fn for_problem(prob: &ParabolicProblem<S>) -> Result<Self, FemError> {
        prob.validate()?;
        Self::new(prob.cells_per_side, prob.dt, prob.n_time_steps())
    }

    pub fn with_tolerance(mut self, rel_tol: S) -> Self {
        self.rel_tol = rel_tol.max(S::solver_floor());
        self
    }

    pub fn mesh(&self) -> &Mesh<S> {
        &self.mesh
    }

    pub fn dt(&self) -> S {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t_final(&self) -> S {
        self.dt * S::of(self.n_steps as f64)
    }

    pub fn mass(&self) -> &CsrMatrix<S> {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix<S> {
        &self.stiffness
    }

    /// `M + dt K` over all nodes.
    pub fn system(&self) -> &CsrMatrix<S> {
        &self.system
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Solves `(M + dt K)_II x = b` on interior unknowns; `x` is the initial guess.
    pub fn solve_interior(&self, b: &[S], x: &mut [S]) -> Result<CgInfo<S>, FemError> {
        conjugate_gradient(&self.system_ii, &self.inv_diag_ii, b, x, self.rel_tol, self.max_iter).map_err(|e| {
            FemError::LinearSolve {
                cells: self.mesh.cells_per_side(),
                dt: self.dt.as_f64(),
                source: Box::new(e),
            }
        })
    }

    /// Time-steps the manufactured problem for `source` to the final time.
    pub fn solve(&self, source: &SourceParams<S>) -> Result<FieldSolution<S>, FemError> {
        source.validate()?;
        let initial: Vec<S> = self.mesh.nodes().iter().map(|&x| exact_solution(source, x, S::zero())).collect();
        self.solve_with(
            initial,
            |x, t| manufactured_source(source, x, t),
            |x, t| exact_solution(source, x, t),
        )
    }

    /// Time-steps general data: nodal initial values, a source `f(x, t)` and
    /// Dirichlet data `g(x, t)`.
    pub fn solve_with(
        &self,
        initial: Vec<S>,
        f_of: impl Fn(Point<S>, S) -> S,
        g_of: impl Fn(Point<S>, S) -> S,
    ) -> Result<FieldSolution<S>, FemError> {
        let nodes = self.mesh.nodes();
        let n = nodes.len();
        if initial.len() != n {
            return Err(FemError::InvalidProblem(format!(
                "initial field has {} values for {} nodes",
                initial.len(),
                n
            )));
        }
        let mut u = initial;
        let mut u_int: Vec<S> = self.interior.iter().map(|&k| u[k]).collect();
        let mut mu = vec![S::zero(); n];
        let mut mf = vec![S::zero(); n];
        let mut ag = vec![S::zero(); n];
        let mut f = vec![S::zero(); n];
        let mut g = vec![S::zero(); n];
        let mut rhs = vec![S::zero(); self.interior.len()];

        for step in 1..=self.n_steps {
            let t = self.dt * S::of(step as f64);
            for (k, x) in nodes.iter().enumerate() {
                f[k] = f_of(*x, t);
            }
            for &k in &self.boundary {
                g[k] = g_of(nodes[k], t);
            }
            self.mass.mul_vec_into(&u, &mut mu);
            self.mass.mul_vec_into(&f, &mut mf);
            self.system.mul_vec_into(&g, &mut ag);
            for (r, &k) in rhs.iter_mut().zip(&self.interior) {
                *r = mu[k] + self.dt * mf[k] - ag[k];
            }
            self.solve_interior(&rhs, &mut u_int)?;
            for (&k, &v) in self.interior.iter().zip(&u_int) {
                u[k] = v;
            }
            for &k in &self.boundary {
                u[k] = g[k];
            }
        }
        Ok(FieldSolution {
            mesh: self.mesh.clone(),
            values: u,
            time: self.t_final(),
        })
    }
}

fn assemble<S: Scalar>(mesh: &Mesh<S>) -> (CsrMatrix<S>, CsrMatrix<S>) {
    let n = mesh.n_nodes();
    let mut m = Vec::with_capacity(9 * mesh.triangles().len());
    let mut k = Vec::with_capacity(9 * mesh.triangles().len());
    let twelfth = S::of(1.0 / 12.0);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (area, b, c) = mesh.element_geometry(t);
        for a in 0..3 {
            for e in 0..3 {
                let mass = if a == e { S::of(2.0) } else { S::one() } * area * twelfth;
                let stiff = (b[a] * b[e] + c[a] * c[e]) / (S::of(4.0) * area);
                m.push((tri[a], tri[e], mass));
                k.push((tri[a], tri[e], stiff));
            }
        }
    }
    (CsrMatrix::from_triplets(n, n, m), CsrMatrix::from_triplets(n, n, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembled_matrices_are_symmetric_with_expected_sums() {
        let s: FemSolver<f64> = FemSolver::new(8, 0.001, 1).unwrap();
        assert!(s.mass().is_symmetric(1e-15));
        assert!(s.stiffness().is_symmetric(1e-15));
        let ones = vec![1.0; s.mesh().n_nodes()];
        let total_mass: f64 = s.mass().mul_vec(&ones).iter().sum();
        assert!((total_mass - 1.0).abs() < 1e-13);
        // constants lie in the stiffness kernel
        assert!(s.stiffness().mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn stiffness_annihilates_linear_fields_at_interior_nodes() {
        let s: FemSolver<f64> = FemSolver::new(10, 0.001, 1).unwrap();
        let u: Vec<f64> = s.mesh().nodes().iter().map(|p| 3.0 * p[0] - 2.0 * p[1] + 1.0).collect();
        let ku = s.stiffness().mul_vec(&u);
        for &k in s.interior() {
            assert!(ku[k].abs() < 1e-12, "node {k}");
        }
    }

    #[test]
    fn boundary_values_are_exact() {
        let src = SourceParams::at([0.4, 0.55]).unwrap();
        let prob = ParabolicProblem::new(src, 10, 0.005, 0.03).unwrap();
        let sol = solve_forward(&prob).unwrap();
        for k in sol.mesh.boundary_nodes() {
            let x = sol.mesh.nodes()[k];
            assert_eq!(sol.values[k], exact_solution(&src, x, sol.time));
        }
    }
}
