//! Matrix aliases and small helpers shared by the other modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

/// Frobenius norm of a complex matrix.
pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Thin QR factorization `a = q r` with a non-negative diagonal in `r`.
///
/// `a` must have at least as many rows as columns. Fixing the sign of the
/// diagonal makes the factorization unique for full-rank input.
pub fn qr_positive(a: &RMatrix) -> Result<(RMatrix, RMatrix)> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::Dimension(format!("QR needs rows >= cols, got {rows}x{cols}")));
    }
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for k in 0..cols {
        if r[(k, k)] < 0.0 {
            r.row_mut(k).neg_mut();
            q.column_mut(k).neg_mut();
        }
    }
    Ok((q, r))
}

/// Returns true when every entry above the diagonal is exactly zero.
pub fn is_lower_triangular(m: &RMatrix) -> bool {
    (0..m.nrows()).all(|i| ((i + 1)..m.ncols()).all(|j| m[(i, j)] == 0.0))
}
