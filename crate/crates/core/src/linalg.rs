//! Small dense linear algebra: symmetric Jacobi eigensolver, Cholesky,
//! triangular solves. Matrices are row-major `Vec<f64>`.

use crate::error::{Error, Result};

/// Eigendecomposition `A = Q diag(values) Q^T` of a symmetric matrix.
/// `vectors` is row-major `n x n`; column `k` is the eigenvector of `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub n: usize,
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    pub sweeps: usize,
}

impl SymmetricEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|r| self.vectors[r * self.n + k]).collect()
    }

    /// Indices of eigenvalues sorted in decreasing order.
    pub fn order_desc(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]));
        idx
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.vectors[i * n + k] * self.values[k] * self.vectors[j * n + k];
                }
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
        out
    }
}

pub const JACOBI_TOL: f64 = 1e-10;
pub const JACOBI_MAX_SWEEPS: usize = 100;

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi rotations. Converged once the off-diagonal Frobenius mass
/// falls below `tol * ||A||_F`.
pub fn jacobi_eigen(matrix: &[f64], n: usize, tol: f64, max_sweeps: usize) -> Result<SymmetricEigen> {
    if matrix.len() != n * n {
        return Err(Error::ShapeMismatch { expected: n * n, got: matrix.len() });
    }
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = if total > 0.0 { tol * total } else { 0.0 };

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a, n);
        if off <= target {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(Error::EigenNoConvergence { sweeps, residual: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let np = c * arp - s * arq;
                    let nq = s * arp + c * arq;
                    a[r * n + p] = np;
                    a[p * n + r] = np;
                    a[r * n + q] = nq;
                    a[q * n + r] = nq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i * n + i]).collect();
    Ok(SymmetricEigen { n, values, vectors: v, sweeps })
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn forward_substitution(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Solves `L^T x = y` for lower-triangular `L`.
pub fn backward_substitution_transposed(l: &[f64], n: usize, y: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let y = forward_substitution(l, n, b);
    backward_substitution_transposed(l, n, &y)
}

/// `A^T A` and `A^T y` for a row-major `rows x cols` design.
pub fn normal_equations(design: &[f64], rows: usize, cols: usize, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut gram = vec![0.0; cols * cols];
    let mut rhs = vec![0.0; cols];
    for r in 0..rows {
        let row = &design[r * cols..(r + 1) * cols];
        for i in 0..cols {
            rhs[i] += row[i] * y[r];
            for j in i..cols {
                gram[i * cols + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..cols {
        for j in 0..i {
            gram[i * cols + j] = gram[j * cols + i];
        }
    }
    (gram, rhs)
}

/// Least-squares solution of `design * x ~ y` through the normal equations.
/// A tiny ridge proportional to the trace is added only if the Gram matrix is
/// numerically singular.
pub fn least_squares(design: &[f64], rows: usize, cols: usize, y: &[f64]) -> Vec<f64> {
    let (mut gram, rhs) = normal_equations(design, rows, cols, y);
    let trace: f64 = (0..cols).map(|i| gram[i * cols + i]).sum();
    let mut ridge = 0.0;
    loop {
        if let Some(l) = cholesky(&gram, cols) {
            return cholesky_solve(&l, cols, &rhs);
        }
        let bump = if ridge == 0.0 { 1e-14 * trace.max(1e-300) } else { ridge * 9.0 };
        for i in 0..cols {
            gram[i * cols + i] += bump;
        }
        ridge += bump;
    }
}

/// `C = alpha * op(A) op(B) + beta * C` on strided row/column layouts, where
/// `A` is `m x k`, `B` is `k x n` and `C` is `m x n`. Strides are in
/// elements: `(row_stride, col_stride)`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    beta: f64,
    c: &mut [f64],
    c_strides: (usize, usize),
) {
    let span = |rows: usize, cols: usize, (rs, cs): (usize, usize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs + (cols - 1) * cs + 1
        }
    };
    assert!(a.len() >= span(m, k, a_strides), "gemm: A too short");
    assert!(b.len() >= span(k, n, b_strides), "gemm: B too short");
    assert!(c.len() >= span(m, n, c_strides), "gemm: C too short");
    // SAFETY: the asserts above guarantee every strided access stays in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            c_strides.0 as isize,
            c_strides.1 as isize,
        );
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_small_matrix() {
        let a = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 1.0];
        let eig = jacobi_eigen(&a, 3, 1e-14, 100).unwrap();
        let back = eig.reconstruct();
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).abs() < 1e-12);
        }
        let trace: f64 = eig.values.iter().sum();
        assert!((trace - 8.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_handles_diagonal_and_zero() {
        let eig = jacobi_eigen(&[0.0; 4], 2, 1e-10, 10).unwrap();
        assert_eq!(eig.sweeps, 0);
        let eig = jacobi_eigen(&[2.0, 0.0, 0.0, -1.0], 2, 1e-10, 10).unwrap();
        assert_eq!(eig.order_desc(), vec![0, 1]);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&a, 2).unwrap();
        let x = cholesky_solve(&l, 2, &[2.0, 1.0]);
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-14);
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }

    #[test]
    fn gemm_matches_naive_product() {
        // A is 2x3, B is 3x2, both row-major; also use B transposed via strides.
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
        let mut c = [0.0; 4];
        gemm(2, 3, 2, 1.0, &a, (3, 1), &b, (2, 1), 0.0, &mut c, (2, 1));
        assert_eq!(c, [58.0, 64.0, 139.0, 154.0]);
        let mut g = [1.0; 4];
        // A A^T, reading A^T through swapped strides.
        gemm(2, 3, 2, 1.0, &a, (3, 1), &a, (1, 3), 2.0, &mut g, (2, 1));
        assert_eq!(g, [16.0, 34.0, 34.0, 79.0]);
    }

    #[test]
    fn least_squares_recovers_exact_fit() {
        let design = [1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0];
        let y: Vec<f64> = (0..4).map(|i| 0.5 + 2.0 * i as f64).collect();
        let x = least_squares(&design, 4, 2, &y);
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }
}
