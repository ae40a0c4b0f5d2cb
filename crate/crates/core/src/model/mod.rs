//! Discrete model problems: finite element heat equations on structured
//! meshes, time grids and the quasi-uniformity constant.

mod assembly;
mod grid;
pub mod io;
mod problem;

pub use assembly::{assemble_mass_stiffness_1d, assemble_mass_stiffness_2d, Mesh, Space};
pub use grid::{build_time_grid, GridKind, TimeGrid};
pub use problem::{compute_alpha, make_heat_problem, Coefficient, HeatData, HeatProblem, ProblemSpec, ScaledMatrix};
