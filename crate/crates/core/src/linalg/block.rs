//! Time-blocked vectors.

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Element of `V^N`: one spatial vector per time step, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    steps: usize,
    dim: usize,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(steps: usize, dim: usize) -> Self {
        assert!(steps >= 1 && dim >= 1, "block vector needs N >= 1 and dim >= 1");
        Self { steps, dim, data: vec![0.0; steps * dim] }
    }

    pub fn from_fn(steps: usize, dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut v = Self::zeros(steps, dim);
        for n in 0..steps {
            for i in 0..dim {
                v.data[n * dim + i] = f(n, i);
            }
        }
        v
    }

    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidInput("block vector needs at least one block".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidInput("blocks must be non-empty".into()));
        }
        let mut data = Vec::with_capacity(dim * blocks.len());
        for b in blocks {
            check_dim(dim, b.len())?;
            data.extend_from_slice(b);
        }
        Ok(Self { steps: blocks.len(), dim, data })
    }

    pub fn from_vec(steps: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(steps * dim, data.len())?;
        if steps == 0 || dim == 0 {
            return Err(Error::InvalidInput("block vector needs N >= 1 and dim >= 1".into()));
        }
        Ok(Self { steps, dim, data })
    }

    /// Number of time blocks `N`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Zero-based block access: `block(0)` is `u_1`.
    pub fn block(&self, n: usize) -> &[f64] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn block_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn blocks(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.dim)
    }

    pub fn par_blocks_mut(&mut self) -> rayon::slice::ChunksMut<'_, f64> {
        self.data.par_chunks_mut(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &BlockVector) -> bool {
        self.steps == other.steps && self.dim == other.dim
    }

    pub fn check_shape(&self, other: &BlockVector) -> Result<()> {
        check_dim(self.steps, other.steps)?;
        check_dim(self.dim, other.dim)
    }

    /// Euclidean inner product, summed blockwise in a fixed order.
    pub fn dot(&self, other: &BlockVector) -> f64 {
        assert!(self.same_shape(other), "dot: shape mismatch");
        let partial: Vec<f64> = self
            .data
            .par_chunks(self.dim)
            .zip(other.data.par_chunks(self.dim))
            .map(|(a, b)| dot(a, b))
            .collect();
        partial.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &BlockVector) {
        assert!(self.same_shape(x), "axpy: shape mismatch");
        self.data.par_iter_mut().zip(x.data.par_iter()).for_each(|(s, v)| *s += a * v);
    }

    pub fn scale(&mut self, a: f64) {
        self.data.par_iter_mut().for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn sub(&self, other: &BlockVector) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &BlockVector) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Saddle-point state `[p, u]`: auxiliary and principal variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleVector {
    pub p: BlockVector,
    pub u: BlockVector,
}

impl SaddleVector {
    pub fn new(p: BlockVector, u: BlockVector) -> Result<Self> {
        p.check_shape(&u)?;
        Ok(Self { p, u })
    }

    pub fn zeros(steps: usize, dim: usize) -> Self {
        Self { p: BlockVector::zeros(steps, dim), u: BlockVector::zeros(steps, dim) }
    }

    pub fn steps(&self) -> usize {
        self.u.steps()
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    pub fn dot(&self, other: &SaddleVector) -> f64 {
        self.p.dot(&other.p) + self.u.dot(&other.u)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn axpy(&mut self, a: f64, x: &SaddleVector) {
        self.p.axpy(a, &x.p);
        self.u.axpy(a, &x.u);
    }

    pub fn scale(&mut self, a: f64) {
        self.p.scale(a);
        self.u.scale(a);
    }

    pub fn sub(&self, other: &SaddleVector) -> Self {
        Self { p: self.p.sub(&other.p), u: self.u.sub(&other.u) }
    }
}
