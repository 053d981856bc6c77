//! Small dense linear-algebra kernels shared by the spectral, loss and eval
//! modules. Everything here is deterministic: loops run in a fixed order and
//! no work is split across threads.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Relative stopping threshold for the cyclic Jacobi sweeps.
pub const JACOBI_TOLERANCE: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Unsorted eigenpairs of a symmetric matrix. Column `i` of `vectors` pairs
/// with `values[i]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
    pub sweeps: usize,
}

pub fn frobenius_sq(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub fn frobenius(a: ArrayView2<'_, f64>) -> f64 {
    frobenius_sq(a).sqrt()
}

fn off_diagonal_sq(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s
}

/// Returns an error naming the worst entry if `a` is not square or deviates
/// from symmetry by more than `tol`.
pub fn check_symmetric(a: ArrayView2<'_, f64>, tol: f64) -> Result<()> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::DimensionMismatch(format!("expected a square matrix, got {n}x{m}")));
    }
    let mut worst = (0, 0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (a[[i, j]] - a[[j, i]]).abs();
            if d > worst.2 || d.is_nan() {
                worst = (i, j, d);
            }
        }
    }
    if worst.2 > tol || worst.2.is_nan() {
        return Err(Error::NotSymmetric { row: worst.0, col: worst.1, diff: worst.2 });
    }
    Ok(())
}

/// Cyclic Jacobi eigensolver for a dense symmetric matrix.
///
/// Sweeps visit the pairs `(p, q)` with `p < q` in row-major order and stop
/// once the off-diagonal Frobenius norm drops below
/// `JACOBI_TOLERANCE * ||a||_F`. Only the symmetric part of `a` is used.
pub fn symmetric_eigen(a: ArrayView2<'_, f64>) -> Result<SymmetricEigen> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::DimensionMismatch(format!("expected a square matrix, got {n}x{m}")));
    }
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let scale = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_TOLERANCE * scale;
    let mut sweeps = 0;
    loop {
        if off_diagonal_sq(&w, n).sqrt() <= threshold {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence(sweeps));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (w[q * n + q] - w[p * n + p]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // w <- J^T w J with J = [[c, s], [-s, c]] in the (p, q) plane
                for k in 0..n {
                    let wkp = w[k * n + p];
                    let wkq = w[k * n + q];
                    w[k * n + p] = c * wkp - s * wkq;
                    w[k * n + q] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let wpk = w[p * n + k];
                    let wqk = w[q * n + k];
                    w[p * n + k] = c * wpk - s * wqk;
                    w[q * n + k] = s * wpk + c * wqk;
                }
                w[p * n + q] = 0.0;
                w[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let values = Array1::from_iter((0..n).map(|i| w[i * n + i]));
    let vectors = Array2::from_shape_vec((n, n), v).expect("n*n buffer");
    Ok(SymmetricEigen { values, vectors, sweeps })
}

/// Moore-Penrose pseudoinverse of a symmetric matrix. Eigenvalues at or below
/// `rel_tol * max|lambda|` are treated as zero.
pub fn pinv_symmetric(a: ArrayView2<'_, f64>, rel_tol: f64) -> Result<Array2<f64>> {
    let eig = symmetric_eigen(a)?;
    let n = a.nrows();
    let max_abs = eig.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut out = Array2::zeros((n, n));
    if max_abs == 0.0 {
        return Ok(out);
    }
    for (i, &lambda) in eig.values.iter().enumerate() {
        if lambda.abs() <= rel_tol * max_abs {
            continue;
        }
        let col = eig.vectors.column(i);
        for r in 0..n {
            for c in 0..n {
                out[[r, c]] += col[r] * col[c] / lambda;
            }
        }
    }
    Ok(out)
}

/// Orthogonal projector onto the column span of `basis` (any full-column-rank
/// or rank-deficient matrix; the pseudoinverse handles the latter).
pub fn column_projector(basis: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let gram = basis.t().dot(&basis);
    let gram_pinv = pinv_symmetric(gram.view(), 1e-12)?;
    Ok(basis.dot(&gram_pinv).dot(&basis.t()))
}

/// Sum of every entry.
pub fn total_sum(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().sum()
}

pub fn row_sums(a: ArrayView2<'_, f64>) -> Array1<f64> {
    a.sum_axis(Axis(1))
}
