//! Block diagonalization through two SVD stages per user.
//!
//! For user `i` the first SVD, of the stacked channels of every other user,
//! yields an orthonormal basis `V0` of their common null space. The second
//! SVD, of `H_i · V0`, rotates that basis onto the dominant right singular
//! vectors of user `i`. The beamformer is `B_i = V0 · V1`, so `H_j · B_i = 0`
//! for every `j ≠ i`.

use nalgebra::SVD;

use crate::channel::StackedChannel;
use crate::linalg::{frobenius, CMatrix};
use crate::{Error, Result};

/// Singular values at or below this fraction of the largest one are zero.
pub const ZERO_SINGULAR_VALUE_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BdResult {
    /// `B_i`, each `n_T × n_R` with orthonormal columns.
    pub beamformers: Vec<CMatrix>,
    /// `H_eff,i = H_i · B_i`, each `n_R × n_R`.
    pub effective_channels: Vec<CMatrix>,
    /// `B = [B_1 … B_{n_U}]`.
    pub composite: CMatrix,
}

/// Right singular vectors of `a`, all `n` of them, sorted by descending
/// singular value, together with the `min(m, n)` singular values.
///
/// Wide and short inputs are padded with zero rows to a square matrix so that
/// the returned `V` is complete.
fn full_right_singular(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let (m, n) = a.shape();
    let padded = if m < n {
        let mut p = CMatrix::zeros(n, n);
        p.rows_mut(0, m).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = SVD::try_new(padded, false, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::DegenerateChannel("SVD did not converge".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::DegenerateChannel("SVD returned no right singular vectors".into()))?;
    let sv: Vec<f64> = svd.singular_values.iter().copied().take(m.min(n)).collect();
    Ok((sv, v_t.adjoint()))
}

/// Orthonormal basis of the null space of a full-row-rank `m × n` matrix,
/// `m < n`. An empty (0-row) input yields the `n × n` identity.
pub fn null_space_basis(a: &CMatrix) -> Result<CMatrix> {
    let (m, n) = a.shape();
    if m == 0 {
        return Ok(CMatrix::identity(n, n));
    }
    if m >= n {
        return Err(Error::Dimension(format!(
            "null space of a {m}x{n} matrix is trivial for full row rank"
        )));
    }
    let (sv, v) = full_right_singular(a)?;
    let largest = sv[0];
    let rank = sv.iter().filter(|&&s| s > ZERO_SINGULAR_VALUE_RTOL * largest).count();
    if largest == 0.0 || rank != m {
        return Err(Error::DegenerateChannel(format!(
            "complement matrix has rank {rank}, expected {m}"
        )));
    }
    Ok(v.columns(m, n - m).into_owned())
}

/// `B_i = V0 · V1` where `V1` holds the right singular vectors of `H_i · V0`
/// for its `n_R` nonzero singular values, strongest first.
pub fn user_beamformer(h_i: &CMatrix, v0: &CMatrix) -> Result<CMatrix> {
    let n_r = h_i.nrows();
    if h_i.ncols() != v0.nrows() {
        return Err(Error::Dimension(format!(
            "H_i is {:?} but V0 is {:?}",
            h_i.shape(),
            v0.shape()
        )));
    }
    if v0.ncols() < n_r {
        return Err(Error::Dimension(format!(
            "null space has {} columns, need at least n_R={n_r}",
            v0.ncols()
        )));
    }
    let projected = h_i * v0;
    let (sv, v1) = full_right_singular(&projected)?;
    let largest = sv[0];
    if largest == 0.0 || sv[n_r - 1] <= ZERO_SINGULAR_VALUE_RTOL * largest {
        return Err(Error::DegenerateChannel(format!(
            "H_i·V0 is rank deficient (singular values {sv:?})"
        )));
    }
    Ok(v0 * v1.columns(0, n_r))
}

/// Computes the block-diagonalizing beamformers of every user.
pub fn block_diagonalize(h: &StackedChannel) -> Result<BdResult> {
    let dims = h.dims();
    let n_r = dims.receive_antennas();
    let mut beamformers = Vec::with_capacity(dims.users());
    let mut effective_channels = Vec::with_capacity(dims.users());
    let mut composite = CMatrix::zeros(dims.transmit_antennas(), dims.transmit_antennas());
    for i in 1..=dims.users() {
        let h_i = h.user_submatrix(i)?;
        let v0 = null_space_basis(&h.complement_matrix(i)?)?;
        let b_i = user_beamformer(&h_i, &v0)?;
        composite.columns_mut((i - 1) * n_r, n_r).copy_from(&b_i);
        effective_channels.push(&h_i * &b_i);
        beamformers.push(b_i);
    }
    Ok(BdResult {
        beamformers,
        effective_channels,
        composite,
    })
}

/// Outcome of [`verify_block_diagonal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDiagonalCheck {
    pub holds: bool,
    /// Largest `‖H_i B_j‖_F / max(1, ‖H_i‖_F)` over `i ≠ j`; zero for one user.
    pub worst_ratio: f64,
}

/// Checks that the composite beamformer leaves no inter-user interference.
pub fn verify_block_diagonal(h: &StackedChannel, composite: &CMatrix, tol: f64) -> Result<BlockDiagonalCheck> {
    let dims = h.dims();
    let n_r = dims.receive_antennas();
    if composite.shape() != (dims.transmit_antennas(), dims.users() * n_r) {
        return Err(Error::Dimension(format!(
            "composite beamformer is {:?}, expected {}x{}",
            composite.shape(),
            dims.transmit_antennas(),
            dims.users() * n_r
        )));
    }
    let mut worst = 0.0f64;
    for i in 1..=dims.users() {
        let h_i = h.user_submatrix(i)?;
        let scale = frobenius(&h_i).max(1.0);
        for j in (1..=dims.users()).filter(|&j| j != i) {
            let leak = &h_i * composite.columns((j - 1) * n_r, n_r);
            worst = worst.max(frobenius(&leak) / scale);
        }
    }
    Ok(BlockDiagonalCheck {
        holds: worst <= tol,
        worst_ratio: worst,
    })
}
