//! Dense square matrices, a cyclic Jacobi eigensolver for the symmetric case, and
//! an LU solver used as the independent route in round-trip checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square, row-major, dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidDimensions(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// `self + t * I`
    pub fn shifted(&self, t: f64) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.n {
            m[(i, i)] += t;
        }
        m
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n);
        Matrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `vᵀ A v`
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    /// First index pair violating exact (bitwise) symmetry.
    pub fn symmetry_violation(&self) -> Option<(usize, usize)> {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self[(i, j)].to_bits() != self[(j, i)].to_bits() {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Convergence threshold of the Jacobi solver, relative to `‖A‖_F`.
pub const JACOBI_REL_TOL: f64 = 1e-10;
/// Maximum number of cyclic sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Output of [`symmetric_eigen`]. Eigenvalues are sorted ascending; column `k` of
/// `vectors` is the unit eigenvector for `values[k]`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Option<Matrix>,
    pub sweeps: usize,
    /// Off-diagonal Frobenius norm at exit. Bounds the eigenvalue error (Weyl).
    pub off_norm: f64,
}

impl Eigen {
    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Option<Vec<f64>> {
        let v = self.vectors.as_ref()?;
        Some((0..v.size()).map(|i| v[(i, k)]).collect())
    }

    /// `max_k ‖A v_k − λ_k v_k‖` over all computed pairs.
    pub fn residual(&self, a: &Matrix) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..self.values.len() {
            let v = self.vector(k)?;
            let av = a.mul_vec(&v);
            let r = av
                .iter()
                .zip(&v)
                .map(|(x, y)| (x - self.values[k] * y).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        Some(worst)
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.size();
    let mut s = 0.0;
    for i in 0..n {
        for (j, &x) in a.row(i).iter().enumerate() {
            if i != j {
                s += x * x;
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Each sweep visits every pair `(p, q)` with `p < q` in row order and applies the plane
/// rotation annihilating `a[p][q]`. Iteration stops once the off-diagonal Frobenius norm
/// drops below `JACOBI_REL_TOL · ‖A‖_F`; [`Error::NoConvergence`] is returned if that does
/// not happen within `JACOBI_MAX_SWEEPS` sweeps. Only the upper triangle of `a` is
/// trusted to be symmetric with the lower one; the caller validates symmetry.
pub fn symmetric_eigen(a: &Matrix, want_vectors: bool) -> Result<Eigen> {
    let n = a.size();
    let mut w = a.clone();
    let mut vt = want_vectors.then(|| Matrix::identity(n));
    let target = JACOBI_REL_TOL * a.frobenius_norm();

    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&w);
    while off > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = w[(p, p)];
                let aqq = w[(q, q)];
                // Skip rotations that can no longer change the diagonal in floating point.
                if sweeps > 4 && apq.abs() * 1e17 < app.abs().min(aqq.abs()) {
                    w[(p, q)] = 0.0;
                    w[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut w, p, q, c, s);
                w[(p, p)] = app - t * apq;
                w[(q, q)] = aqq + t * apq;
                w[(p, q)] = 0.0;
                w[(q, p)] = 0.0;
                if let Some(vt) = vt.as_mut() {
                    rotate_rows(vt, p, q, c, s);
                }
            }
        }
        off = off_diagonal_norm(&w);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(i, i)].total_cmp(&w[(j, j)]));
    let values = order.iter().map(|&i| w[(i, i)]).collect();
    let vectors = vt.map(|vt| Matrix::from_fn(n, |i, k| vt[(order[k], i)]));
    Ok(Eigen {
        values,
        vectors,
        sweeps,
        off_norm: off,
    })
}

/// Applies the rotation to rows `p`, `q` and mirrors them into columns `p`, `q`.
/// Diagonal and `(p, q)` entries are fixed up by the caller.
#[inline]
fn rotate(w: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = w.n;
    let (head, tail) = w.data.split_at_mut(q * n);
    let rp = &mut head[p * n..(p + 1) * n];
    let rq = &mut tail[..n];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
    for k in 0..n {
        if k != p && k != q {
            w.data[k * n + p] = w.data[p * n + k];
            w.data[k * n + q] = w.data[q * n + k];
        }
    }
}

#[inline]
fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.n;
    let (head, tail) = m.data.split_at_mut(q * n);
    let rp = &mut head[p * n..(p + 1) * n];
    let rq = &mut tail[..n];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.size();
    assert_eq!(b.size(), n);
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| lu[(i, col)].abs().total_cmp(&lu[(j, col)].abs()))
            .unwrap();
        if lu[(pivot, col)].abs() <= 1e-14 * scale {
            return Err(Error::Singular);
        }
        if pivot != col {
            for j in 0..n {
                lu.data.swap(pivot * n + j, col * n + j);
                x.data.swap(pivot * n + j, col * n + j);
            }
        }
        let d = lu[(col, col)];
        for i in (col + 1)..n {
            let f = lu[(i, col)] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                lu[(i, j)] -= f * lu[(col, j)];
            }
            for j in 0..n {
                x[(i, j)] -= f * x[(col, j)];
            }
        }
    }
    for col in (0..n).rev() {
        let d = lu[(col, col)];
        for j in 0..n {
            x[(col, j)] /= d;
        }
        for i in 0..col {
            let f = lu[(i, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                x[(i, j)] -= f * x[(col, j)];
            }
        }
    }
    Ok(x)
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve(a, &Matrix::identity(a.size()))
}
