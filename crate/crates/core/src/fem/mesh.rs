//! Uniform right-triangle meshes of the unit square.
//!
//! Each square cell is split along one diagonal. The diagonal direction is
//! mirrored between quadrants (`/` in the lower-left and upper-right quarters,
//! `\` elsewhere), so for an even number of cells the mesh is invariant under
//! the reflections `x -> 1 - x` and `y -> 1 - y`.

use crate::Scalar;

use super::{FemError, Point};

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh<S> {
    cells: usize,
    nodes: Vec<Point<S>>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
}

/// Containing triangle and barycentric weights of a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Location<S> {
    pub nodes: [usize; 3],
    pub weights: [S; 3],
}

impl<S: Scalar> Mesh<S> {
    pub fn unit_square(cells: usize) -> Result<Self, FemError> {
        if cells == 0 {
            return Err(FemError::InvalidProblem("mesh needs at least one cell per side".into()));
        }
        let n = cells;
        let coord = |i: usize| S::of(i as f64 / n as f64);
        let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
        let mut boundary = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                nodes.push([coord(i), coord(j)]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                if Self::slash_diagonal(n, i, j) {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
        Ok(Self {
            cells,
            nodes,
            triangles,
            boundary,
        })
    }

    fn slash_diagonal(n: usize, i: usize, j: usize) -> bool {
        let left = 2 * i + 1 < n;
        let bottom = 2 * j + 1 < n;
        left == bottom
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> S {
        S::one() / S::of(self.cells as f64)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point<S>] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.cells + 1) + i
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&k| !self.boundary[k]).collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&k| self.boundary[k]).collect()
    }

    /// Node closest to `p`, with its distance.
    pub fn nearest_node(&self, p: Point<S>) -> (usize, S) {
        let n = S::of(self.cells as f64);
        let snap = |v: S| {
            let k = (v * n).round().max(S::zero()).min(n);
            k.to_usize().expect("index fits")
        };
        let k = self.node_index(snap(p[0]), snap(p[1]));
        let q = self.nodes[k];
        let dist = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        (k, dist)
    }

    /// Triangle containing `p` and the barycentric weights of its vertices.
    pub fn locate(&self, p: Point<S>) -> Result<Location<S>, FemError> {
        let tol = S::epsilon() * S::of(16.0);
        let inside = |v: S| v >= -tol && v <= S::one() + tol;
        if !(inside(p[0]) && inside(p[1])) {
            return Err(FemError::OutsideMesh {
                point: [p[0].as_f64(), p[1].as_f64()],
            });
        }
        let n = self.cells;
        let cell = |v: S| {
            let c = (v * S::of(n as f64)).floor().max(S::zero());
            c.to_usize().expect("index fits").min(n - 1)
        };
        let (i, j) = (cell(p[0]), cell(p[1]));
        let t0 = 2 * (j * n + i);
        for t in [t0, t0 + 1] {
            let w = self.barycentric(t, p);
            if w.iter().all(|&x| x >= -tol * S::of(n as f64)) {
                return Ok(Location {
                    nodes: self.triangles[t],
                    weights: w,
                });
            }
        }
        // Rounding on the shared diagonal; either triangle is valid.
        Ok(Location {
            nodes: self.triangles[t0],
            weights: self.barycentric(t0, p),
        })
    }

    fn barycentric(&self, t: usize, p: Point<S>) -> [S; 3] {
        let [a, b, c] = self.triangles[t].map(|k| self.nodes[k]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((b[0] - p[0]) * (c[1] - p[1]) - (c[0] - p[0]) * (b[1] - p[1])) / det;
        let l2 = ((c[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (c[1] - p[1])) / det;
        [l1, l2, S::one() - l1 - l2]
    }

    /// Signed-area-free P1 element data: area and the gradient numerators
    /// `(b_i, c_i)` with `grad phi_i = (b_i, c_i) / (2 * area)`.
    pub(crate) fn element_geometry(&self, t: usize) -> (S, [S; 3], [S; 3]) {
        let [p1, p2, p3] = self.triangles[t].map(|k| self.nodes[k]);
        let b = [p2[1] - p3[1], p3[1] - p1[1], p1[1] - p2[1]];
        let c = [p3[0] - p2[0], p1[0] - p3[0], p2[0] - p1[0]];
        let det = (p2[0] - p1[0]) * (p3[1] - p1[1]) - (p3[0] - p1[0]) * (p2[1] - p1[1]);
        (det.abs() / S::of(2.0), b, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_boundary() {
        let m: Mesh<f64> = Mesh::unit_square(4).unwrap();
        assert_eq!(m.n_nodes(), 25);
        assert_eq!(m.triangles().len(), 32);
        assert_eq!(m.boundary_nodes().len(), 16);
        assert_eq!(m.interior_nodes().len(), 9);
        let total: f64 = (0..32).map(|t| m.element_geometry(t).0).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mesh_is_mirror_symmetric_for_even_cells() {
        let m: Mesh<f64> = Mesh::unit_square(6).unwrap();
        let mirror = |k: usize| {
            let p = m.nodes()[k];
            m.nearest_node([1.0 - p[0], p[1]]).0
        };
        let mut tris: Vec<[usize; 3]> = m
            .triangles()
            .iter()
            .map(|t| {
                let mut s = t.map(mirror);
                s.sort();
                s
            })
            .collect();
        let mut orig: Vec<[usize; 3]> = m
            .triangles()
            .iter()
            .map(|t| {
                let mut s = *t;
                s.sort();
                s
            })
            .collect();
        tris.sort();
        orig.sort();
        assert_eq!(tris, orig);
    }

    #[test]
    fn locate_reproduces_linear_functions() {
        let m: Mesh<f64> = Mesh::unit_square(5).unwrap();
        let f = |p: Point<f64>| 2.0 * p[0] - 3.0 * p[1] + 0.5;
        for p in [[0.13, 0.77], [0.5, 0.3], [1.0, 1.0], [0.0, 0.41], [0.6, 0.6]] {
            let loc = m.locate(p).unwrap();
            let v: f64 = (0..3).map(|k| loc.weights[k] * f(m.nodes()[loc.nodes[k]])).sum();
            assert!((v - f(p)).abs() < 1e-12, "{p:?}");
        }
        assert!(m.locate([1.2, 0.5]).is_err());
    }
}
