//! Dense helpers for the small (at most 11×11) symmetric systems that show up
//! in local polynomial fitting.

use std::fmt;
use std::ops::{Index, IndexMut};

/// Largest supported polynomial degree; systems are at most 11×11.
pub const MAX_DEGREE: usize = 10;

/// Row-major square matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from rows; panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "row {i} has wrong length");
            m.data[i * dim..(i + 1) * dim].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add_to_diagonal(&mut self, shift: f64) {
        for i in 0..self.dim {
            self[(i, i)] += shift;
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.dim {
            for j in 0..i {
                let (a, b) = (self[(i, j)], self[(j, i)]);
                if (a - b).abs() > tol * (1.0 + a.abs().max(b.abs())) {
                    return false;
                }
            }
        }
        true
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.dim).map(|i| self.row(i)))
            .finish()
    }
}

/// All eigenvalues of a symmetric matrix, ascending.
///
/// Cyclic Jacobi rotations until the off-diagonal mass drops below
/// `1e-15 * ‖M‖_F`; for the dimensions used here this converges in a
/// handful of sweeps and is accurate to a few ulps relative to ‖M‖.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.dim();
    match n {
        0 => return Vec::new(),
        1 => return vec![m[(0, 0)]],
        2 => {
            let (a, b, c) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
            let mean = 0.5 * (a + c);
            let radius = (0.5 * (a - c)).hypot(b);
            return vec![mean - radius, mean + radius];
        }
        _ => {}
    }

    let mut a = m.clone();
    // symmetrize so rounding in the input cannot bias the rotations
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let frob: f64 = a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    if frob == 0.0 {
        return vec![0.0; n];
    }
    let target = 1e-15 * frob;

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig = a.diag();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Smallest eigenvalue λ(M) of a symmetric matrix.
pub fn smallest_eigenvalue(m: &Matrix) -> f64 {
    symmetric_eigenvalues(m).first().copied().unwrap_or(0.0)
}

const MAX_DIM: usize = MAX_DEGREE + 1;

/// Solves `A θ = b` for symmetric positive semidefinite `A`.
///
/// The system is first equilibrated by the inverse square root of its
/// diagonal, then factored by Cholesky; if a pivot collapses the solve
/// falls back to Gaussian elimination with full pivoting. Either way the
/// residual is re-checked against the unscaled system. Returns `None` when
/// the matrix is numerically singular.
pub fn solve_symmetric(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    let mut out = [0.0; MAX_DIM];
    solve_symmetric_into(a.as_slice(), b, &mut out[..n]).then(|| out[..n].to_vec())
}

/// [`solve_symmetric`] on a row-major slice, writing into `out`.
pub(crate) fn solve_symmetric_into(a: &[f64], b: &[f64], out: &mut [f64]) -> bool {
    let n = b.len();
    assert!(n <= MAX_DIM && a.len() == n * n && out.len() == n);
    if n == 0 {
        return true;
    }
    let mut scale = [0.0; MAX_DIM];
    for i in 0..n {
        let d = a[i * n + i];
        scale[i] = if d > 0.0 && d.is_finite() { 1.0 / d.sqrt() } else { 1.0 };
    }
    let mut scaled = [0.0; MAX_DIM * MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            scaled[i * n + j] = scale[i] * a[i * n + j] * scale[j];
        }
    }
    let mut rhs = [0.0; MAX_DIM];
    for i in 0..n {
        rhs[i] = scale[i] * b[i];
    }
    let mut y = [0.0; MAX_DIM];
    let (scaled, rhs) = (&scaled[..n * n], &rhs[..n]);
    if !cholesky_solve(scaled, rhs, &mut y[..n]) && !full_pivot_solve(scaled, rhs, &mut y[..n]) {
        return false;
    }
    for i in 0..n {
        out[i] = scale[i] * y[i];
    }

    let mut residual = 0.0f64;
    let mut row_norm = 0.0f64;
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let ax: f64 = row.iter().zip(out.iter()).map(|(p, q)| p * q).sum();
        residual = residual.max((ax - b[i]).abs());
        row_norm = row_norm.max(row.iter().map(|v| v.abs()).sum::<f64>());
    }
    let b_norm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let theta_norm = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.iter().all(|v| v.is_finite()) && residual <= 1e-8 * (b_norm + row_norm * theta_norm)
}

fn cholesky_solve(a: &[f64], b: &[f64], y: &mut [f64]) -> bool {
    const PIVOT_FLOOR: f64 = 1e-13;
    let n = b.len();
    let mut l = [0.0; MAX_DIM * MAX_DIM];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > PIVOT_FLOOR) {
            return false;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    true
}

fn full_pivot_solve(a: &[f64], b: &[f64], x: &mut [f64]) -> bool {
    let n = b.len();
    let mut m = [0.0; MAX_DIM * MAX_DIM];
    m[..n * n].copy_from_slice(a);
    let mut rhs = [0.0; MAX_DIM];
    rhs[..n].copy_from_slice(b);
    let mut col_perm = [0usize; MAX_DIM];
    for (k, c) in col_perm.iter_mut().enumerate() {
        *c = k;
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return false;
    }
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, 0.0);
        for i in k..n {
            for j in k..n {
                if m[i * n + j].abs() > best {
                    best = m[i * n + j].abs();
                    pi = i;
                    pj = j;
                }
            }
        }
        if best <= 1e-15 * scale {
            return false;
        }
        if pi != k {
            for j in 0..n {
                m.swap(k * n + j, pi * n + j);
            }
            rhs.swap(k, pi);
        }
        if pj != k {
            for i in 0..n {
                m.swap(i * n + k, i * n + pj);
            }
            col_perm.swap(k, pj);
        }
        for i in k + 1..n {
            let f = m[i * n + k] / m[k * n + k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[i * n + j] -= f * m[k * n + j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut z = [0.0; MAX_DIM];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in i + 1..n {
            s -= m[i * n + j] * z[j];
        }
        z[i] = s / m[i * n + i];
    }
    for k in 0..n {
        x[col_perm[k]] = z[k];
    }
    true
}
