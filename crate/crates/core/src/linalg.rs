//! Small dense linear-algebra kernels: cyclic Jacobi eigensolver for
//! symmetric matrices, Cholesky factorization, and the generalized
//! symmetric-definite eigenproblem built from the two.
//!
//! The matrices here are tiny (circuit networks, reduced density matrices),
//! so a dependency-free Jacobi sweep is both simpler and more portable than
//! pulling in a LAPACK backend.

use ndarray::{Array1, Array2};
use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
    #[error("jacobi eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),
}

/// Eigenvalues and eigenvectors of a real symmetric matrix, ascending order.
///
/// Column `k` of `vectors` is the eigenvector of `values[k]`.
pub struct SymEig<T> {
    pub values: Array1<T>,
    pub vectors: Array2<T>,
}

/// Cyclic Jacobi diagonalization of a real symmetric matrix.
pub fn eigh<T: Real>(a: &Array2<T>) -> Result<SymEig<T>, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare(a.nrows(), a.ncols()));
    }
    let mut m = a.clone();
    let mut v = Array2::<T>::eye(n);
    let max_sweeps = 64;
    let tol = T::epsilon() * T::of(16.0);
    for _sweep in 0..max_sweeps {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + m[[i, j]] * m[[i, j]];
            }
        }
        let scale: T = (0..n).map(|i| m[[i, i]] * m[[i, i]]).sum::<T>() + off + T::min_positive_value();
        if off <= tol * tol * scale {
            return Ok(sorted_eig(m, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (T::of(2.0) * apq);
                // Stable rotation: t = sign(theta) / (|theta| + sqrt(theta^2 + 1))
                let t = if theta >= T::zero() {
                    T::one() / (theta + (theta * theta + T::one()).sqrt())
                } else {
                    -T::one() / (-theta + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(LinalgError::NoConvergence(max_sweeps))
}

fn sorted_eig<T: Real>(m: Array2<T>, v: Array2<T>) -> SymEig<T> {
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap());
    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (k, &idx) in order.iter().enumerate() {
        values[k] = m[[idx, idx]];
        for r in 0..n {
            vectors[[r, k]] = v[[r, idx]];
        }
    }
    SymEig { values, vectors }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky<T: Real>(a: &Array2<T>) -> Result<Array2<T>, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare(a.nrows(), a.ncols()));
    }
    let mut l = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum = sum - l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= T::zero() {
                    return Err(LinalgError::NotPositiveDefinite(i));
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Generalized symmetric-definite eigenproblem `M v = λ B v` with `B` positive
/// definite, solved by Cholesky reduction to a standard symmetric problem.
///
/// Returned eigenvectors are the generalized ones (`v`, B-orthonormal),
/// column per eigenvalue, ascending.
pub fn eigh_generalized<T: Real>(
    m: &Array2<T>,
    b: &Array2<T>,
) -> Result<SymEig<T>, LinalgError> {
    let l = cholesky(b)?;
    let n = m.nrows();
    // W = L^-1 M L^-T via two triangular solves.
    let mut w = m.clone();
    // Forward solve L X = M (columns).
    for col in 0..n {
        for i in 0..n {
            let mut sum = w[[i, col]];
            for k in 0..i {
                sum = sum - l[[i, k]] * w[[k, col]];
            }
            w[[i, col]] = sum / l[[i, i]];
        }
    }
    // Now solve X L^T = W, i.e. forward solve on rows.
    for row in 0..n {
        for j in 0..n {
            let mut sum = w[[row, j]];
            for k in 0..j {
                sum = sum - w[[row, k]] * l[[j, k]];
            }
            w[[row, j]] = sum / l[[j, j]];
        }
    }
    // Symmetrize against roundoff before Jacobi.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (w[[i, j]] + w[[j, i]]) / T::of(2.0);
            w[[i, j]] = avg;
            w[[j, i]] = avg;
        }
    }
    let eig = eigh(&w)?;
    // Back-transform eigenvectors: v = L^-T y (solve L^T v = y per column).
    let mut vectors = eig.vectors;
    for col in 0..n {
        for i in (0..n).rev() {
            let mut sum = vectors[[i, col]];
            for k in (i + 1)..n {
                sum = sum - l[[k, i]] * vectors[[k, col]];
            }
            vectors[[i, col]] = sum / l[[i, i]];
        }
    }
    Ok(SymEig {
        values: eig.values,
        vectors,
    })
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
pub fn spd_inverse<T: Real>(a: &Array2<T>) -> Result<Array2<T>, LinalgError> {
    let l = cholesky(a)?;
    let n = a.nrows();
    let mut inv = Array2::<T>::eye(n);
    for col in 0..n {
        // Forward solve L y = e_col.
        for i in 0..n {
            let mut sum = inv[[i, col]];
            for k in 0..i {
                sum = sum - l[[i, k]] * inv[[k, col]];
            }
            inv[[i, col]] = sum / l[[i, i]];
        }
        // Back solve L^T x = y.
        for i in (0..n).rev() {
            let mut sum = inv[[i, col]];
            for k in (i + 1)..n {
                sum = sum - l[[k, i]] * inv[[k, col]];
            }
            inv[[i, col]] = sum / l[[i, i]];
        }
    }
    Ok(inv)
}

/// Eigenvalues of a complex Hermitian matrix via the real 2n×2n embedding
/// `[[X, -Y], [Y, X]]`; each eigenvalue appears twice, so every other one of
/// the sorted list is returned.
pub fn eigvals_hermitian<T: Real>(a: &Array2<Complex<T>>) -> Result<Array1<T>, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare(a.nrows(), a.ncols()));
    }
    let mut big = Array2::<T>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let z = a[[i, j]];
            big[[i, j]] = z.re;
            big[[n + i, n + j]] = z.re;
            big[[i, n + j]] = -z.im;
            big[[n + i, j]] = z.im;
        }
    }
    let eig = eigh(&big)?;
    let mut out = Array1::zeros(n);
    for k in 0..n {
        out[k] = eig.values[2 * k];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn eigh_2x2_known() {
        let a = array![[2.0_f64, 1.0], [1.0, 2.0]];
        let eig = eigh(&a).unwrap();
        assert_abs_diff_eq!(eig.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.values[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn eigh_reconstructs_matrix() {
        let a = array![
            [4.0_f64, 1.0, 0.5, 0.0],
            [1.0, 3.0, 0.2, 0.1],
            [0.5, 0.2, 2.0, 0.3],
            [0.0, 0.1, 0.3, 1.0]
        ];
        let eig = eigh(&a).unwrap();
        let n = 4;
        for i in 0..n {
            for j in 0..n {
                let mut sum = 0.0;
                for k in 0..n {
                    sum += eig.vectors[[i, k]] * eig.values[k] * eig.vectors[[j, k]];
                }
                assert_abs_diff_eq!(sum, a[[i, j]], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = array![[4.0_f64, 2.0], [2.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let lt = l.t();
        let back = l.dot(&lt);
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(back[[i, j]], a[[i, j]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0_f64, 2.0], [2.0, 1.0]];
        assert!(cholesky(&a).is_err());
    }

    #[test]
    fn generalized_matches_scaled_standard() {
        // M v = λ B v with B = 2 I has eigenvalues half of M's.
        let m = array![[2.0_f64, 1.0], [1.0, 2.0]];
        let b = array![[2.0_f64, 0.0], [0.0, 2.0]];
        let eig = eigh_generalized(&m, &b).unwrap();
        assert_abs_diff_eq!(eig.values[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.values[1], 1.5, epsilon = 1e-12);
        // Residual check M v = λ B v.
        for k in 0..2 {
            for i in 0..2 {
                let mv: f64 = (0..2).map(|j| m[[i, j]] * eig.vectors[[j, k]]).sum();
                let bv: f64 = (0..2).map(|j| b[[i, j]] * eig.vectors[[j, k]]).sum();
                assert_abs_diff_eq!(mv, eig.values[k] * bv, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn spd_inverse_roundtrip() {
        let a = array![[4.0_f64, 1.0, 0.2], [1.0, 3.0, 0.5], [0.2, 0.5, 2.0]];
        let inv = spd_inverse(&a).unwrap();
        let prod = a.dot(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod[[i, j]], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_eigvals() {
        use num_complex::Complex;
        let a = array![
            [Complex::new(1.0_f64, 0.0), Complex::new(0.0, -1.0)],
            [Complex::new(0.0, 1.0), Complex::new(1.0, 0.0)]
        ];
        let vals = eigvals_hermitian(&a).unwrap();
        assert_abs_diff_eq!(vals[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 2.0, epsilon = 1e-12);
    }
}
