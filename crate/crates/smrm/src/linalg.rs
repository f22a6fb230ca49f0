//! Dense symmetric positive definite (SPD) helpers built on a Cholesky
//! factorization: triangular solves, inverses, and log-determinants.
//!
//! All SPD matrices in this crate are small (response-by-response blocks), so
//! an unblocked O(q^3) factorization is plenty fast. Definiteness is
//! established by whether the factorization succeeds — a failed pivot is the
//! SPD check itself, not a numerical accident to be patched up.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
///
/// Reads only the lower triangle of `a`; callers that care about symmetry
/// must check it themselves. Fails with [`Error::NotSpd`] when a pivot is
/// nonpositive or not finite. `context` names the matrix in the error.
pub fn cholesky(a: &ArrayView2<f64>, context: &str) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{context}: expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotSpd(format!("{context}: pivot {j} is {d:.3e}")));
        }
        let ljj = d.sqrt();
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

/// Solves `A x = b` given the Cholesky factor `L` of `A` (forward then back
/// substitution).
pub fn chol_solve_vec(l: &Array2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    debug_assert_eq!(b.len(), n);
    let mut x = b.to_owned();
    // L z = b
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[[i, k]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    // L^T x = z
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Inverse of `A` from its Cholesky factor, symmetrized exactly.
pub fn chol_inverse(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    // Invert L by forward substitution on the identity, then A^-1 = L^-T L^-1.
    let mut linv = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        linv[[j, j]] = 1.0 / l[[j, j]];
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[[i, k]] * linv[[k, j]];
            }
            linv[[i, j]] = s / l[[i, i]];
        }
    }
    let mut inv = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            // (L^-T L^-1)_{ij} = sum_k L^-1_{ki} L^-1_{kj}, nonzero for k >= max(i, j).
            for k in i..n {
                s += linv[[k, i]] * linv[[k, j]];
            }
            inv[[i, j]] = s;
            inv[[j, i]] = s;
        }
    }
    inv
}

/// `log det A` from the Cholesky factor of `A`.
pub fn chol_logdet(l: &Array2<f64>) -> f64 {
    2.0 * l.diag().iter().map(|d| d.ln()).sum::<f64>()
}

/// Inverse of an SPD matrix via Cholesky; fails if `a` is not SPD.
pub fn spd_inverse(a: &ArrayView2<f64>, context: &str) -> Result<Array2<f64>> {
    Ok(chol_inverse(&cholesky(a, context)?))
}

/// Relative symmetry check: `|a_ij - a_ji| <= rel_tol * max|a|` everywhere.
pub fn is_symmetric(a: &ArrayView2<f64>, rel_tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = rel_tol * scale.max(1e-300);
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[[i, j]] - a[[j, i]]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Gathers the submatrix `a[rows, cols]` into a freshly allocated array.
pub fn gather(a: &ArrayView2<f64>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((rows.len(), cols.len()));
    for (oi, &i) in rows.iter().enumerate() {
        for (oj, &j) in cols.iter().enumerate() {
            out[[oi, oj]] = a[[i, j]];
        }
    }
    out
}
