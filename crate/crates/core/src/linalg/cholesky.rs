//! Banded Cholesky factorization.
//!
//! The structured meshes used here number unknowns lexicographically, so the
//! bandwidth is at most one mesh row and a dense band is the natural storage.

use crate::error::{check_dim, Error, Result};
use crate::linalg::SpatialMatrix;

/// `L L^T` factorization of an SPD [`SpatialMatrix`], stored as a band.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    bandwidth: usize,
    // Row i holds L[i, i - bandwidth ..= i] in band[i * (bandwidth + 1) ..].
    band: Vec<f64>,
}

impl CholeskyFactor {
    pub fn new(matrix: &SpatialMatrix) -> Result<Self> {
        let dim = matrix.dim();
        let bw = matrix.bandwidth();
        let width = bw + 1;
        let mut band = vec![0.0; dim * width];
        // Fill the lower band with the symmetric entries: L[j, i] slot holds A[i, j].
        for (i, j, v) in matrix.upper_entries() {
            band[j * width + (bw - (j - i))] = v;
        }
        for i in 0..dim {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = band[i * width + (bw - (i - j))];
                for k in jlo..j {
                    s -= band[i * width + (bw - (i - k))] * band[j * width + (bw - (j - k))];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite(format!(
                            "Cholesky pivot {s:.3e} at row {i}"
                        )));
                    }
                    band[i * width + bw] = s.sqrt();
                } else {
                    band[i * width + (bw - (i - j))] = s / band[j * width + bw];
                }
            }
        }
        Ok(Self { dim, bandwidth: bw, band })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.dim, "cholesky solve: length");
        let bw = self.bandwidth;
        let width = bw + 1;
        for i in 0..self.dim {
            let lo = i.saturating_sub(bw);
            let row = &self.band[i * width..(i + 1) * width];
            let mut s = x[i];
            for k in lo..i {
                s -= row[bw - (i - k)] * x[k];
            }
            x[i] = s / row[bw];
        }
        for i in (0..self.dim).rev() {
            let hi = (i + bw).min(self.dim - 1);
            let mut s = x[i];
            for k in i + 1..=hi {
                s -= self.band[k * width + (bw - (k - i))] * x[k];
            }
            x[i] = s / self.band[i * width + bw];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, b.len())?;
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }
}

/// Solves `L x = b` for SPD `L`.
pub fn cholesky_solve(matrix: &SpatialMatrix, b: &[f64]) -> Result<Vec<f64>> {
    CholeskyFactor::new(matrix)?.solve(b)
}
