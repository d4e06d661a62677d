//! Zero-forcing beamformers under the bilinear pairing `h^T v`.
//!
//! For an estimate matrix `E` (`n x M`, rows `e_j^T`) we want `V` (`M x n`)
//! with `E V = I`, i.e. `e_j^T v_k = delta_jk`. With the thin QR factorization
//! `E^H = Q R` this is `V = Q R^{-H}`; no Gram matrix is formed. Each column
//! is then scaled to unit norm.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::CMatrix;
use crate::error::{Error, Result};
use crate::Scheme;

/// Relative threshold on the diagonal of `R` below which the estimate matrix
/// is treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Unit-norm beams for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub scheme: Scheme,
    /// `M x K` (massive MIMO) or `M x K/2` (NOMA, one column per group).
    pub v: CMatrix,
}

impl BeamformerSet {
    /// Column of `v` carrying `user`'s signal.
    pub fn beam_of(&self, user: usize) -> usize {
        match self.scheme {
            Scheme::MassiveMimo => user,
            Scheme::Noma => user % self.v.ncols(),
        }
    }
}

/// Unit-norm ZF directions against the rows of `est`.
pub fn zero_forcing(est: &CMatrix) -> Result<CMatrix> {
    let (n, m) = est.shape();
    if m < n {
        return Err(Error::TooFewAntennas { m, needed: n });
    }
    let qr = est.adjoint().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..n).map(|i| r[(i, i)].norm()).collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    let smallest = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if n > 0 && !(largest > 0.0 && smallest / largest > RANK_TOLERANCE) {
        return Err(Error::Singular(if largest > 0.0 { smallest / largest } else { 0.0 }));
    }
    let rh = r.adjoint();
    let x = rh
        .solve_lower_triangular(&DMatrix::<Complex64>::identity(n, n))
        .ok_or(Error::Singular(0.0))?;
    let mut v = qr.q() * x;
    for mut col in v.column_iter_mut() {
        let norm = col.norm();
        col.unscale_mut(norm);
    }
    Ok(v)
}

/// One beam per user, nulling every other user's estimated channel.
pub fn zf_mmimo(h_hat: &CMatrix) -> Result<BeamformerSet> {
    Ok(BeamformerSet { scheme: Scheme::MassiveMimo, v: zero_forcing(h_hat)? })
}

/// One beam per NOMA group, nulling the other groups' cell-center channels.
/// Cell-edge channels play no part in the construction.
pub fn zf_noma(h_hat_center: &CMatrix) -> Result<BeamformerSet> {
    Ok(BeamformerSet { scheme: Scheme::Noma, v: zero_forcing(h_hat_center)? })
}

/// `|h_k^T v_j|^2` for every user row `k` of `h` and beam column `j`.
pub fn beam_gains(h: &CMatrix, v: &CMatrix) -> DMatrix<f64> {
    (h * v).map(|z| z.norm_sqr())
}
