//! Small dense linear-algebra routines: covariance, leading eigenpairs and
//! Cholesky factorization.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Column means of `data` (rows are samples).
pub fn column_means(data: ArrayView2<f64>) -> Array1<f64> {
    let n = data.nrows().max(1) as f64;
    data.sum_axis(Axis(0)) / n
}

/// Population covariance (divides by the sample count).
pub fn covariance(data: ArrayView2<f64>) -> Array2<f64> {
    let mean = column_means(data);
    let centered = &data - &mean;
    let n = data.nrows().max(1) as f64;
    centered.t().dot(&centered) / n
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Array1<f64>,
}

/// Iteration cap for the subspace iteration.
pub const EIGEN_ITERATION_CAP: usize = 2000;

/// Computes the `count` largest eigenpairs of a symmetric positive
/// semi-definite matrix.
///
/// Orthogonal (subspace) iteration on a block of `count + 2` vectors with a
/// Rayleigh–Ritz step, so equal or nearly equal leading eigenvalues do not
/// slow it down; only the gap below the block matters. The start block comes
/// from a fixed-seed generator, which keeps results deterministic. Each
/// vector's largest component is positive.
///
/// Returns `None` when the iteration does not converge within
/// [`EIGEN_ITERATION_CAP`] steps. Pairs are sorted by decreasing eigenvalue.
pub fn top_eigenpairs(matrix: ArrayView2<f64>, count: usize) -> Option<Vec<EigenPair>> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n || count > n {
        return None;
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return None;
    }
    if count == 0 {
        return Some(Vec::new());
    }
    let scale = matrix.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    let block = (count + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q = Array2::from_shape_fn((n, block), |_| rng.random_range(-1.0..1.0));
    orthonormalize(&mut q);
    for _ in 0..EIGEN_ITERATION_CAP {
        let z = matrix.dot(&q);
        let (values, rotation) = jacobi_eigen(q.t().dot(&z));
        let x = q.dot(&rotation);
        let ax = z.dot(&rotation);
        let converged = (0..count).all(|i| {
            let r = &ax.column(i) - &(values[i] * &x.column(i));
            r.dot(&r).sqrt() <= tol
        });
        if converged {
            let pairs = (0..count)
                .map(|i| {
                    let mut vector = x.column(i).to_owned();
                    let lead = vector.iter().fold(0.0f64, |m, &v| if v.abs() > m.abs() { v } else { m });
                    if lead < 0.0 {
                        vector.mapv_inplace(|v| -v);
                    }
                    EigenPair {
                        value: values[i],
                        vector,
                    }
                })
                .collect();
            return Some(pairs);
        }
        q = ax;
        orthonormalize(&mut q);
    }
    None
}

/// Modified Gram–Schmidt with one reorthogonalization pass. A column that
/// collapses into the span of the earlier ones is replaced by the first unit
/// vector that does not.
fn orthonormalize(q: &mut Array2<f64>) {
    let (n, b) = q.dim();
    let project_out = |q: &Array2<f64>, j: usize, v: &mut Array1<f64>| {
        for _ in 0..2 {
            for k in 0..j {
                let c = q.column(k).dot(v);
                v.scaled_add(-c, &q.column(k));
            }
        }
    };
    for j in 0..b {
        let mut v = q.column(j).to_owned();
        let before = v.dot(&v).sqrt();
        project_out(q, j, &mut v);
        let mut norm = v.dot(&v).sqrt();
        if !(norm > 1e-8 * before) || norm == 0.0 {
            for e in 0..n {
                let mut u = Array1::zeros(n);
                u[e] = 1.0;
                project_out(q, j, &mut u);
                let un = u.dot(&u).sqrt();
                if un > 1e-3 {
                    v = u;
                    norm = un;
                    break;
                }
            }
        }
        q.column_mut(j).assign(&(v / norm));
    }
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues in decreasing order and the matching
/// eigenvectors as columns.
fn jacobi_eigen(mut a: Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut v = Array2::<f64>::eye(n);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        let diag: f64 = (0..n).map(|i| a[[i, i]] * a[[i, i]]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                if a[[p, r]] == 0.0 {
                    continue;
                }
                let theta = (a[[r, r]] - a[[p, p]]) / (2.0 * a[[p, r]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akr) = (a[[k, p]], a[[k, r]]);
                    a[[k, p]] = c * akp - s * akr;
                    a[[k, r]] = s * akp + c * akr;
                }
                for k in 0..n {
                    let (apk, ark) = (a[[p, k]], a[[r, k]]);
                    a[[p, k]] = c * apk - s * ark;
                    a[[r, k]] = s * apk + c * ark;
                }
                for k in 0..n {
                    let (vkp, vkr) = (v[[k, p]], v[[k, r]]);
                    v[[k, p]] = c * vkp - s * vkr;
                    v[[k, r]] = s * vkp + c * vkr;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(k, c)| v[[k, order[c]]]);
    (values, vectors)
}

pub fn outer(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = a`.
pub fn cholesky(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            actual: a.ncols(),
        });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::Numerical(format!(
                "matrix is not positive definite (pivot {j} = {diag:e})"
            )));
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn forward_substitute(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}
