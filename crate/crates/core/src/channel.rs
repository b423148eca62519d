//! Stacked MU-MIMO channel, per-user partitioning and the complex-to-real
//! embedding used by the perturbation search.
//!
//! Users are numbered from 1. User `i` owns rows `(i-1)·n_R .. i·n_R` of the
//! stacked channel.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMatrix, CVector, RMatrix, RVector};
use crate::{rng, Error, Result};

/// Antenna configuration `(n_T, n_U, n_R)` with `n_T = n_U · n_R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemDims {
    n_t: usize,
    n_u: usize,
    n_r: usize,
}

impl SystemDims {
    pub fn new(n_t: usize, n_u: usize, n_r: usize) -> Result<Self> {
        if n_u == 0 || n_r == 0 {
            return Err(Error::Dimension(format!(
                "need at least one user and one receive antenna, got n_U={n_u}, n_R={n_r}"
            )));
        }
        if n_t != n_u * n_r {
            return Err(Error::Dimension(format!("n_T={n_t} must equal n_U·n_R={}", n_u * n_r)));
        }
        Ok(Self { n_t, n_u, n_r })
    }

    pub fn transmit_antennas(&self) -> usize {
        self.n_t
    }

    pub fn users(&self) -> usize {
        self.n_u
    }

    pub fn receive_antennas(&self) -> usize {
        self.n_r
    }

    /// Real dimension of one user's perturbation search, `2·n_R`.
    pub fn search_dim(&self) -> usize {
        2 * self.n_r
    }
}

/// The stacked channel `H = [H_1; H_2; …; H_{n_U}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedChannel {
    entries: CMatrix,
    dims: SystemDims,
}

impl StackedChannel {
    pub fn new(entries: CMatrix, dims: SystemDims) -> Result<Self> {
        let expected = (dims.users() * dims.receive_antennas(), dims.transmit_antennas());
        if entries.shape() != expected {
            return Err(Error::Dimension(format!(
                "channel is {:?}, expected {:?}",
                entries.shape(),
                expected
            )));
        }
        Ok(Self { entries, dims })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    fn check_user(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.dims.users() {
            return Err(Error::UserIndex {
                index: i,
                users: self.dims.users(),
            });
        }
        Ok(())
    }

    /// Channel `H_i` of user `i` (1-based), `n_R × n_T`.
    pub fn user_submatrix(&self, i: usize) -> Result<CMatrix> {
        self.check_user(i)?;
        let n_r = self.dims.receive_antennas();
        Ok(self.entries.rows((i - 1) * n_r, n_r).into_owned())
    }

    /// Stack of every user channel except user `i`, in the original order.
    /// Has zero rows in the single-user case.
    pub fn complement_matrix(&self, i: usize) -> Result<CMatrix> {
        self.check_user(i)?;
        let n_r = self.dims.receive_antennas();
        let n_t = self.dims.transmit_antennas();
        let rows = (self.dims.users() - 1) * n_r;
        let skip = (i - 1) * n_r;
        Ok(CMatrix::from_fn(rows, n_t, |r, c| {
            let src = if r < skip { r } else { r + n_r };
            self.entries[(src, c)]
        }))
    }
}

/// Draws a circularly symmetric complex Gaussian sample with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws an i.i.d. Rayleigh channel from `rng`, row by row.
pub fn sample_channel<R: Rng + ?Sized>(dims: SystemDims, rng: &mut R) -> StackedChannel {
    let rows = dims.users() * dims.receive_antennas();
    let cols = dims.transmit_antennas();
    let mut entries = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            entries[(r, c)] = complex_normal(rng);
        }
    }
    StackedChannel { entries, dims }
}

/// Draws an i.i.d. Rayleigh channel; identical seeds give identical channels.
pub fn generate_channel(dims: SystemDims, seed: u64) -> StackedChannel {
    sample_channel(dims, &mut rng::stream(seed, 0))
}

/// Real embedding `[[Re M, -Im M], [Im M, Re M]]` of an `m × n` complex matrix.
pub fn complex_to_real(m: &CMatrix) -> RMatrix {
    let (rows, cols) = m.shape();
    RMatrix::from_fn(2 * rows, 2 * cols, |r, c| {
        let z = m[(r % rows, c % cols)];
        match (r < rows, c < cols) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Real embedding `[Re v; Im v]` of a complex vector.
pub fn complex_vec_to_real(v: &CVector) -> RVector {
    let n = v.len();
    RVector::from_fn(2 * n, |k, _| if k < n { v[k].re } else { v[k - n].im })
}

/// Inverse of [`complex_vec_to_real`].
pub fn real_vec_to_complex(v: &RVector) -> Result<CVector> {
    if !v.len().is_multiple_of(2) {
        return Err(Error::Dimension(format!(
            "real embedding must have even length, got {}",
            v.len()
        )));
    }
    let n = v.len() / 2;
    Ok(CVector::from_fn(n, |k, _| Complex64::new(v[k], v[k + n])))
}
