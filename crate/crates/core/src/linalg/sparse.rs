//! Sparse matrices on the spatial space.
//!
//! [`SpatialMatrix`] stores a symmetric operator through its upper triangle
//! (diagonal included) in compressed-row form. [`CsrMatrix`] is a plain
//! general-pattern matrix used for grid transfer operators.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};

/// Symmetric sparse matrix, upper triangle only.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SpatialMatrix {
    /// Builds a matrix from `(row, col, value)` triplets.
    ///
    /// Entries from either triangle are folded onto the upper triangle and
    /// duplicates are summed, so a full symmetric triplet list must only
    /// list each off-diagonal pair once.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("matrix dimension must be positive".into()));
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); dim];
        for &(i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::InvalidInput(format!(
                    "triplet ({i}, {j}) outside a {dim}x{dim} matrix"
                )));
            }
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            *rows[r].entry(c).or_insert(0.0) += v;
        }
        Ok(Self::from_rows(dim, rows))
    }

    fn from_rows(dim: usize, rows: Vec<BTreeMap<usize, f64>>) -> Self {
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, values }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal_matrix(&vec![1.0; dim])
    }

    pub fn diagonal_matrix(diag: &[f64]) -> Self {
        let dim = diag.len();
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            cols: (0..dim).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds the matrix from the upper triangle of a dense symmetric matrix.
    pub fn from_dense(dense: &DMatrix<f64>) -> Result<Self> {
        check_dim(dense.nrows(), dense.ncols())?;
        let n = dense.nrows();
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = dense[(i, j)];
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, &triplets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored (upper triangle) entries.
    pub fn nnz_upper(&self) -> usize {
        self.values.len()
    }

    /// Iterates over stored upper-triangle entries `(i, j, v)` with `i <= j`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (i, self.cols[p], self.values[p]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.upper_entries().map(|(i, j, _)| j - i).max().unwrap_or(0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.upper_entries()
            .map(|(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }

    /// `y = L x`, panicking on mismatched lengths.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim, "spmv: input length");
        assert_eq!(y.len(), self.dim, "spmv: output length");
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.dim {
            let xi = x[i];
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[p];
                let v = self.values[p];
                acc += v * x[j];
                if j != i {
                    y[j] += v * xi;
                }
            }
            y[i] += acc;
        }
    }

    /// `y += s * L x`.
    pub fn mul_add_into(&self, s: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim, "spmv: input length");
        assert_eq!(y.len(), self.dim, "spmv: output length");
        for i in 0..self.dim {
            let xi = s * x[i];
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[p];
                let v = self.values[p];
                acc += v * x[j];
                if j != i {
                    y[j] += v * xi;
                }
            }
            y[i] += s * acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_into(x, &mut y);
        y
    }

    /// Checked matrix-vector product.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(self.mul_vec(x))
    }

    /// `x^T L x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.dim {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[p];
                let v = self.values[p];
                total += if i == j { v * x[i] * x[i] } else { 2.0 * v * x[i] * x[j] };
            }
        }
        total
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| s * v).collect(),
            ..self.clone()
        }
    }

    /// `a * self + b * other` on the union pattern.
    pub fn linear_combination(&self, a: f64, other: &SpatialMatrix, b: f64) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.dim];
        for (i, j, v) in self.upper_entries() {
            *rows[i].entry(j).or_insert(0.0) += a * v;
        }
        for (i, j, v) in other.upper_entries() {
            *rows[i].entry(j).or_insert(0.0) += b * v;
        }
        Ok(Self::from_rows(self.dim, rows))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.upper_entries() {
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
        d
    }

    /// Galerkin triple product `P^T L P` for a prolongation `P` (fine x coarse).
    pub fn galerkin(&self, prolongation: &CsrMatrix) -> Result<Self> {
        check_dim(self.dim, prolongation.nrows())?;
        let coarse = prolongation.ncols();
        // L P column by column through rows of P: (L P)[i, c] = sum_j L[i, j] P[j, c].
        let mut lp: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.dim];
        for (i, j, v) in self.upper_entries() {
            for (c, w) in prolongation.row(j) {
                *lp[i].entry(c).or_insert(0.0) += v * w;
            }
            if i != j {
                for (c, w) in prolongation.row(i) {
                    *lp[j].entry(c).or_insert(0.0) += v * w;
                }
            }
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); coarse];
        for (i, row) in lp.iter().enumerate() {
            for (r, pw) in prolongation.row(i) {
                for (&c, &v) in row.iter().filter(|(&c, _)| c >= r) {
                    *rows[r].entry(c).or_insert(0.0) += pw * v;
                }
            }
        }
        Ok(Self::from_rows(coarse, rows))
    }
}

/// General sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nrows];
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidInput(format!(
                    "triplet ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            *rows[i].entry(j).or_insert(0.0) += v;
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { nrows, ncols, row_ptr, cols, values })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.cols[p], self.values[p]))
    }

    /// `y = P x`.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `y = P^T x`.
    pub fn mul_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }
}
