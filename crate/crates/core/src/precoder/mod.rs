//! Linear precoders of a user's real effective channel and the triangular
//! factor that drives the perturbation search.
//!
//! The search minimizes `‖L (s + τ t)‖²`. For zero forcing, factoring
//! `H_rᵀ = Q R` gives `‖H_r⁻¹ x‖ = ‖R⁻ᵀ x‖`, so `L = R⁻ᵀ`. For MMSE, factoring
//! the extended matrix `[H_rᵀ; √α I] = [Q₁; Q₂] R` gives `R⁻¹ = Q₂ / √α`, so
//! `L = Q₂ᵀ` minimizes `xᵀ (H_r H_rᵀ + α I)⁻¹ x` without inverting `R`.

mod constellation;

use std::fmt;
use std::str::FromStr;

use crate::linalg::{qr_positive, RMatrix, RVector};
use crate::{Error, Result};

pub use constellation::Constellation;

/// Condition-number ceiling for zero forcing.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    Zf,
    Mmse,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Zf => "zf",
            Criterion::Mmse => "mmse",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zf" => Ok(Criterion::Zf),
            "mmse" => Ok(Criterion::Mmse),
            other => Err(Error::Parameter(format!("unknown criterion '{other}'"))),
        }
    }
}

/// Everything the perturbation search and the transmitter need for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchFactor {
    /// Lower-triangular search factor; entries above the diagonal are exactly 0.
    pub lower: RMatrix,
    /// Precoding matrix `G` applied to the perturbed vector.
    pub precoder: RMatrix,
    pub criterion: Criterion,
    /// Regularization, 0 for zero forcing.
    pub alpha: f64,
    pub tau: f64,
}

fn check_square(h: &RMatrix) -> Result<()> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "effective channel must be square and non-empty, got {:?}",
            h.shape()
        )));
    }
    Ok(())
}

fn one_norm(m: &RMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Zero-forcing precoder `G = H_r⁻¹`.
pub fn zf_matrix(h: &RMatrix) -> Result<RMatrix> {
    check_square(h)?;
    let inv = h
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("effective channel is not invertible".into()))?;
    let cond = one_norm(h) * one_norm(&inv);
    if !cond.is_finite() || cond >= MAX_CONDITION {
        return Err(Error::SingularMatrix(format!(
            "effective channel condition number {cond:e} exceeds {MAX_CONDITION:e}"
        )));
    }
    Ok(inv)
}

/// Regularization `α = N σ² / P`.
pub fn mmse_alpha(n: usize, sigma2: f64, power: f64) -> Result<f64> {
    if !(power > 0.0) {
        return Err(Error::Parameter(format!("power budget must be positive, got {power}")));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::Parameter(format!("noise variance must be >= 0, got {sigma2}")));
    }
    Ok(n as f64 * sigma2 / power)
}

/// Regularized inverse `G = H_rᵀ (H_r H_rᵀ + α I)⁻¹`, equal to the zero-forcing
/// precoder at `α = 0`.
pub fn mmse_matrix(h: &RMatrix, alpha: f64) -> Result<RMatrix> {
    check_square(h)?;
    if !(alpha >= 0.0) {
        return Err(Error::Parameter(format!("alpha must be >= 0, got {alpha}")));
    }
    let n = h.nrows();
    let gram = h * h.transpose() + RMatrix::identity(n, n) * alpha;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::SingularMatrix("H Hᵀ + αI is not positive definite".into()))?;
    // The Gram matrix is symmetric, so Hᵀ A⁻¹ = (A⁻¹ H)ᵀ.
    Ok(chol.solve(h).transpose())
}

/// Builds the precoder and the triangular search factor of `h`.
pub fn search_factor(h: &RMatrix, criterion: Criterion, alpha: f64, tau: f64) -> Result<SearchFactor> {
    check_square(h)?;
    let n = h.nrows();
    let (precoder, alpha, raw) = match criterion {
        Criterion::Zf => {
            let g = zf_matrix(h)?;
            let (_, r) = qr_positive(&h.transpose())?;
            let r_inv = r
                .solve_upper_triangular(&RMatrix::identity(n, n))
                .ok_or_else(|| Error::SingularMatrix("R has a zero pivot".into()))?;
            (g, 0.0, r_inv.transpose())
        }
        Criterion::Mmse => {
            if !(alpha > 0.0) {
                return Err(Error::Parameter(format!(
                    "MMSE search factor needs alpha > 0, got {alpha}"
                )));
            }
            let g = mmse_matrix(h, alpha)?;
            let mut extended = RMatrix::zeros(2 * n, n);
            extended.rows_mut(0, n).copy_from(&h.transpose());
            extended
                .rows_mut(n, n)
                .copy_from(&(RMatrix::identity(n, n) * alpha.sqrt()));
            let (q, _) = qr_positive(&extended)?;
            (g, alpha, q.rows(n, n).transpose())
        }
    };
    let lower = RMatrix::from_fn(n, n, |i, j| if j <= i { raw[(i, j)] } else { 0.0 });
    if (0..n).any(|k| lower[(k, k)] == 0.0 || !lower[(k, k)].is_finite()) {
        return Err(Error::SingularMatrix("search factor has a zero diagonal".into()));
    }
    Ok(SearchFactor {
        lower,
        precoder,
        criterion,
        alpha,
        tau,
    })
}

/// Perturbation modulus `τ = 2 (c_max + Δ/2)`.
pub fn tau(c: Constellation) -> f64 {
    2.0 * (c.max_amplitude() + c.spacing() / 2.0)
}

/// Reduces `y` into `[-K, K)`.
pub fn modulo_scalar(y: f64, k: f64) -> f64 {
    let period = 2.0 * k;
    let r = y - period * ((y + k) / period).floor();
    // Rounding can land exactly on the excluded right endpoint.
    if r >= k {
        r - period
    } else {
        r
    }
}

/// Elementwise [`modulo_scalar`].
pub fn modulo(y: &RVector, k: f64) -> RVector {
    y.map(|v| modulo_scalar(v, k))
}
