//! P1 finite element mass and stiffness matrices on the unit interval and
//! the unit square with homogeneous Dirichlet conditions.

use crate::error::{Error, Result};
use crate::linalg::SpatialMatrix;

/// Spatial dimension of a model problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    OneD,
    TwoD,
}

impl Space {
    pub fn dimension(self) -> usize {
        match self {
            Space::OneD => 1,
            Space::TwoD => 2,
        }
    }
}

/// Uniform structured mesh of the unit interval or square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mesh {
    pub space: Space,
    /// Cells per side.
    pub cells: usize,
}

impl Mesh {
    pub fn new(space: Space, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 cells per side, got {cells}")));
        }
        Ok(Self { space, cells })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Number of interior unknowns.
    pub fn dofs(&self) -> usize {
        let m = self.cells - 1;
        match self.space {
            Space::OneD => m,
            Space::TwoD => m * m,
        }
    }

    /// Unknown index of grid point `(i, j)`; `None` on the boundary.
    /// In 1D only `i` is used.
    pub fn dof(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.cells;
        match self.space {
            Space::OneD => (i >= 1 && i < n).then(|| i - 1),
            Space::TwoD => (i >= 1 && i < n && j >= 1 && j < n).then(|| (j - 1) * (n - 1) + (i - 1)),
        }
    }

    /// Coordinates of the interior unknowns, in unknown order.
    pub fn dof_coordinates(&self) -> Vec<[f64; 2]> {
        let h = self.h();
        let m = self.cells - 1;
        match self.space {
            Space::OneD => (1..=m).map(|i| [i as f64 * h, 0.0]).collect(),
            Space::TwoD => (1..=m)
                .flat_map(|j| (1..=m).map(move |i| [i as f64 * h, j as f64 * h]))
                .collect(),
        }
    }

    /// Nodal interpolant of `f` on the interior unknowns.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.dof_coordinates().iter().map(|&[x, y]| f(x, y)).collect()
    }

    /// `(M, A)` on this mesh.
    pub fn assemble(&self) -> Result<(SpatialMatrix, SpatialMatrix)> {
        match self.space {
            Space::OneD => assemble_mass_stiffness_1d(self.cells),
            Space::TwoD => assemble_mass_stiffness_2d(self.cells),
        }
    }
}

/// Mass and stiffness for P1 elements on `num_cells` uniform cells of (0, 1).
pub fn assemble_mass_stiffness_1d(num_cells: usize) -> Result<(SpatialMatrix, SpatialMatrix)> {
    let mesh = Mesh::new(Space::OneD, num_cells)?;
    let h = mesh.h();
    let local_mass = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
    let local_stiff = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
    let mut mass = Vec::new();
    let mut stiff = Vec::new();
    for e in 0..num_cells {
        let nodes = [mesh.dof(e, 0), mesh.dof(e + 1, 0)];
        for a in 0..2 {
            for b in a..2 {
                if let (Some(i), Some(j)) = (nodes[a], nodes[b]) {
                    mass.push((i, j, local_mass[a][b]));
                    stiff.push((i, j, local_stiff[a][b]));
                }
            }
        }
    }
    Ok((
        SpatialMatrix::from_triplets(mesh.dofs(), &mass)?,
        SpatialMatrix::from_triplets(mesh.dofs(), &stiff)?,
    ))
}

/// Mass and stiffness for P1 elements on the unit square. Each square cell
/// is split along its lower-left to upper-right diagonal.
pub fn assemble_mass_stiffness_2d(cells_per_side: usize) -> Result<(SpatialMatrix, SpatialMatrix)> {
    let mesh = Mesh::new(Space::TwoD, cells_per_side)?;
    let h = mesh.h();
    let mut mass = Vec::new();
    let mut stiff = Vec::new();
    for cj in 0..cells_per_side {
        for ci in 0..cells_per_side {
            let lower = [(ci, cj), (ci + 1, cj), (ci + 1, cj + 1)];
            let upper = [(ci, cj), (ci + 1, cj + 1), (ci, cj + 1)];
            for tri in [lower, upper] {
                let coords = tri.map(|(i, j)| [i as f64 * h, j as f64 * h]);
                let (lm, ls) = p1_triangle(&coords);
                let dofs = tri.map(|(i, j)| mesh.dof(i, j));
                for a in 0..3 {
                    for b in 0..3 {
                        if let (Some(i), Some(j)) = (dofs[a], dofs[b]) {
                            if i <= j {
                                mass.push((i, j, lm[a][b]));
                                stiff.push((i, j, ls[a][b]));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((
        SpatialMatrix::from_triplets(mesh.dofs(), &mass)?,
        SpatialMatrix::from_triplets(mesh.dofs(), &stiff)?,
    ))
}

/// Local P1 mass and stiffness matrices of a triangle.
fn p1_triangle(x: &[[f64; 2]; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let det = (x[1][0] - x[0][0]) * (x[2][1] - x[0][1]) - (x[2][0] - x[0][0]) * (x[1][1] - x[0][1]);
    let area = 0.5 * det.abs();
    // grad phi_a = (y_b - y_c, x_c - x_b) / det for (a, b, c) cyclic.
    let grads: [[f64; 2]; 3] = std::array::from_fn(|a| {
        let b = (a + 1) % 3;
        let c = (a + 2) % 3;
        [(x[b][1] - x[c][1]) / det, (x[c][0] - x[b][0]) / det]
    });
    let mut lm = [[0.0; 3]; 3];
    let mut ls = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            lm[a][b] = area / 12.0 * if a == b { 2.0 } else { 1.0 };
            ls[a][b] = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
        }
    }
    (lm, ls)
}
