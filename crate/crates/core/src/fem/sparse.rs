//! Compressed sparse row matrices and Jacobi-preconditioned conjugate gradients.

use crate::{dot, Scalar};

use super::FemError;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<S> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<S>,
}

impl<S: Scalar> CsrMatrix<S> {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, S)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<S> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().expect("non-empty") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.row(i).find(|&(c, _)| c == j).map_or(S::zero(), |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<S> {
        (0..self.n_rows).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[S], y: &mut [S]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = S::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        let mut y = vec![S::zero(); self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Linear combination `a * self + b * other` of two matrices of equal shape.
    pub fn add_scaled(&self, a: S, other: &Self, b: S) -> Self {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n_rows {
            trip.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
            trip.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        Self::from_triplets(self.n_rows, self.n_cols, trip)
    }

    /// Submatrix with the given rows and columns (each list maps new index -> old index).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut trip = Vec::new();
        for (ni, &oi) in rows.iter().enumerate() {
            for (oj, v) in self.row(oi) {
                let nj = col_map[oj];
                if nj != usize::MAX {
                    trip.push((ni, nj, v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), trip)
    }

    pub fn is_symmetric(&self, tol: S) -> bool {
        (0..self.n_rows).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgInfo<S> {
    pub iterations: usize,
    pub relative_residual: S,
}

/// Solves `A x = b` for SPD `A` with Jacobi preconditioning. `x` holds the
/// initial guess on entry.
pub fn conjugate_gradient<S: Scalar>(
    a: &CsrMatrix<S>,
    inv_diag: &[S],
    b: &[S],
    x: &mut [S],
    rel_tol: S,
    max_iter: usize,
) -> Result<CgInfo<S>, FemError> {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == S::zero() {
        x.iter_mut().for_each(|v| *v = S::zero());
        return Ok(CgInfo {
            iterations: 0,
            relative_residual: S::zero(),
        });
    }
    let mut r = a.mul_vec(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<S> = r.iter().zip(inv_diag).map(|(&ri, &d)| ri * d).collect();
    let mut p = z.clone();
    let mut ap = vec![S::zero(); n];
    let mut rz = dot(&r, &z);
    let target = rel_tol * b_norm;
    for it in 0..=max_iter {
        let res = dot(&r, &r).sqrt();
        if res <= target {
            return Ok(CgInfo {
                iterations: it,
                relative_residual: res / b_norm,
            });
        }
        if it == max_iter {
            return Err(FemError::SolverDiverged {
                iterations: it,
                relative_residual: (res / b_norm).as_f64(),
            });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > S::zero()) {
            return Err(FemError::NotPositiveDefinite);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    unreachable!("loop returns on its last iteration")
}
