use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative eigenvalue tolerance used when none is given.
pub const DEFAULT_NEGATIVE_TYPE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NegativeTypeReport {
    pub valid: bool,
    /// Smallest eigenvalue of `−½·J·D·J`.
    pub worst_eigenvalue: f64,
}

/// Checks the Schoenberg condition on a finite distance matrix: `D` is of
/// negative type iff `−½·J·D·J` is positive semidefinite, with
/// `J = I − (1/n)·11ᵀ`.
///
/// Valid when the smallest eigenvalue is at least `−tol` times the largest
/// absolute eigenvalue.
pub fn validate_negative_type(d: &DMatrix<f64>, tol: f64) -> Result<NegativeTypeReport> {
    let n = d.nrows();
    if n == 0 || d.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "distance matrix must be square and nonempty, got {}x{}",
            d.nrows(),
            d.ncols()
        )));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be ≥ 0, got {tol}"
        )));
    }
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sym_tol = 1e-12 * scale.max(1.0);
    for i in 0..n {
        if !d[(i, i)].is_finite() || d[(i, i)] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "diagonal entry ({i},{i}) is {}, expected 0",
                d[(i, i)]
            )));
        }
        for j in (i + 1)..n {
            let (a, b) = (d[(i, j)], d[(j, i)]);
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::NonFinite {
                    value: if a.is_finite() { b } else { a },
                    context: format!("entry ({i},{j})"),
                });
            }
            if (a - b).abs() > sym_tol {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric: ({i},{j}) = {a} but ({j},{i}) = {b}"
                )));
            }
        }
    }

    let b = double_center(d) * -0.5;
    let eig = SymmetricEigen::new(b).eigenvalues;
    let worst = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let largest = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(NegativeTypeReport {
        valid: worst >= -tol * largest,
        worst_eigenvalue: worst,
    })
}

/// `J·D·J` by row/column mean subtraction.
fn double_center(d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| d.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| d.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| d[(i, j)] - row_means[i] - col_means[j] + grand)
}
