//! Discrete sine transforms over the time index of a [`BlockVector`].
//!
//! With `s(k, n) = sin((2k - 1) n pi / (2N))` and the weight `w_n` equal to 1
//! except `w_N = 1/2`:
//!
//! * forward (type III): `u_hat_k = (2/N) sum_n w_n u_n s(k, n)`
//! * inverse (type II): `u_n = sum_k u_hat_k s(k, n)`
//!
//! plus both transposes. Every transform is one of two sine sums (over `k`
//! or over `n`) combined with diagonal scalings. Power-of-two lengths
//! evaluate the sums with a complex FFT of length `2N`; other lengths fall
//! back to direct summation.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_dim, Error, Result};
use crate::linalg::BlockVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SineSum {
    /// `y_n = sum_k x_k s(k, n)`
    OverK,
    /// `y_k = sum_n x_n s(k, n)`
    OverN,
}

/// Which of the four transforms to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Forward,
    Inverse,
    ForwardTranspose,
    InverseTranspose,
}

/// Precomputed transform machinery for one length `N`.
#[derive(Clone)]
pub struct DstPlan {
    n: usize,
    fft: Option<Arc<dyn Fft<f64>>>,
    /// `exp(i pi n / (2N))`, n = 0..N.
    twiddles: Vec<Complex64>,
    /// Dense sine table for the direct path, `table[(k-1) * N + (n-1)]`.
    table: Vec<f64>,
}

impl std::fmt::Debug for DstPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DstPlan").field("n", &self.n).field("fast", &self.is_fast()).finish()
    }
}

impl DstPlan {
    /// Fast plan when `n` is a power of two, direct summation otherwise.
    pub fn new(n: usize) -> Result<Self> {
        Self::build(n, n.is_power_of_two())
    }

    /// Always uses direct `O(N^2)` summation.
    pub fn naive(n: usize) -> Result<Self> {
        Self::build(n, false)
    }

    fn build(n: usize, fast: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("transform length must be positive".into()));
        }
        let twiddles = (0..=n)
            .map(|j| Complex64::from_polar(1.0, PI * j as f64 / (2.0 * n as f64)))
            .collect();
        let (fft, table) = if fast {
            (Some(FftPlanner::new().plan_fft_inverse(2 * n)), Vec::new())
        } else {
            let mut table = vec![0.0; n * n];
            for k in 1..=n {
                for j in 1..=n {
                    table[(k - 1) * n + (j - 1)] = sine(k, j, n);
                }
            }
            (None, table)
        };
        Ok(Self { n, fft, twiddles, table })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_fast(&self) -> bool {
        self.fft.is_some()
    }

    fn weight(&self, n: usize) -> f64 {
        if n + 1 == self.n {
            0.5
        } else {
            1.0
        }
    }

    /// Applies a transform to a scalar sequence of length `N`.
    pub fn apply_scalar(&self, transform: Transform, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        let mut out = vec![0.0; self.n];
        let mut scratch = self.scratch();
        self.apply_column(transform, x, &mut out, &mut scratch);
        Ok(out)
    }

    fn scratch(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        match &self.fft {
            Some(fft) => (
                vec![Complex64::new(0.0, 0.0); 2 * self.n],
                vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
            ),
            None => (Vec::new(), Vec::new()),
        }
    }

    fn apply_column(&self, transform: Transform, x: &[f64], out: &mut [f64], scratch: &mut (Vec<Complex64>, Vec<Complex64>)) {
        let n = self.n;
        let scale = 2.0 / n as f64;
        match transform {
            Transform::Forward => {
                // (2/N) S_n(w x)
                let wx: Vec<f64> = (0..n).map(|j| self.weight(j) * x[j]).collect();
                self.sine_sum(SineSum::OverN, &wx, out, scratch);
                out.iter_mut().for_each(|v| *v *= scale);
            }
            Transform::Inverse => self.sine_sum(SineSum::OverK, x, out, scratch),
            Transform::ForwardTranspose => {
                // (2/N) w S_k(x)
                self.sine_sum(SineSum::OverK, x, out, scratch);
                for (j, v) in out.iter_mut().enumerate() {
                    *v *= scale * self.weight(j);
                }
            }
            Transform::InverseTranspose => self.sine_sum(SineSum::OverN, x, out, scratch),
        }
    }

    fn sine_sum(&self, kind: SineSum, x: &[f64], out: &mut [f64], scratch: &mut (Vec<Complex64>, Vec<Complex64>)) {
        let n = self.n;
        match &self.fft {
            None => match kind {
                SineSum::OverK => {
                    for (j, o) in out.iter_mut().enumerate() {
                        *o = (0..n).map(|k| x[k] * self.table[k * n + j]).sum();
                    }
                }
                SineSum::OverN => {
                    for (k, o) in out.iter_mut().enumerate() {
                        let row = &self.table[k * n..(k + 1) * n];
                        *o = row.iter().zip(x).map(|(s, v)| s * v).sum();
                    }
                }
            },
            Some(fft) => {
                let (buf, fft_scratch) = scratch;
                buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                match kind {
                    SineSum::OverK => {
                        // sum_m x_{m+1} exp(i pi n (m + 1/2) / N) = e^{i pi n/2N} Z_n
                        for m in 0..n {
                            buf[m] = Complex64::new(x[m], 0.0);
                        }
                        fft.process_with_scratch(buf, fft_scratch);
                        for j in 1..=n {
                            out[j - 1] = (self.twiddles[j] * buf[j]).im;
                        }
                    }
                    SineSum::OverN => {
                        // sum_n x_n e^{-i pi n/2N} exp(i pi n k / N)
                        for j in 1..=n {
                            buf[j] = x[j - 1] * self.twiddles[j].conj();
                        }
                        fft.process_with_scratch(buf, fft_scratch);
                        for k in 1..=n {
                            out[k - 1] = buf[k].im;
                        }
                    }
                }
            }
        }
    }

    /// Applies a transform blockwise: component `i` of every block is one
    /// scalar sequence of length `N`.
    pub fn apply(&self, transform: Transform, u: &BlockVector) -> Result<BlockVector> {
        check_dim(self.n, u.steps())?;
        let dim = u.dim();
        let n = self.n;
        let src = u.as_slice();
        // Component-major scratch, one column of length N per component.
        let mut columns = vec![0.0; dim * n];
        columns.par_chunks_mut(n).enumerate().for_each_init(
            || (vec![0.0; n], self.scratch()),
            |(col_in, scratch), (i, col_out)| {
                for (t, c) in col_in.iter_mut().enumerate() {
                    *c = src[t * dim + i];
                }
                self.apply_column(transform, col_in, col_out, scratch);
            },
        );
        let mut out = BlockVector::zeros(n, dim);
        out.par_blocks_mut().enumerate().for_each(|(t, block)| {
            for (i, b) in block.iter_mut().enumerate() {
                *b = columns[i * n + t];
            }
        });
        Ok(out)
    }

    /// `Phi u`.
    pub fn forward(&self, u: &BlockVector) -> Result<BlockVector> {
        self.apply(Transform::Forward, u)
    }

    /// `Phi^{-1} u_hat`.
    pub fn inverse(&self, u: &BlockVector) -> Result<BlockVector> {
        self.apply(Transform::Inverse, u)
    }

    /// `Phi^T v`.
    pub fn forward_transpose(&self, v: &BlockVector) -> Result<BlockVector> {
        self.apply(Transform::ForwardTranspose, v)
    }

    /// `Phi^{-T} v`.
    pub fn inverse_transpose(&self, v: &BlockVector) -> Result<BlockVector> {
        self.apply(Transform::InverseTranspose, v)
    }
}

/// `sin((2k - 1) n pi / (2N))` for 1-based `k`, `n`.
pub fn sine(k: usize, n: usize, len: usize) -> f64 {
    ((2 * k - 1) as f64 * n as f64 * PI / (2.0 * len as f64)).sin()
}

/// `mu_k = 2 sin((2k - 1) pi / (4N))`, 1-based `k`.
pub fn frequency_weight(k: usize, len: usize) -> f64 {
    2.0 * ((2 * k - 1) as f64 * PI / (4.0 * len as f64)).sin()
}
