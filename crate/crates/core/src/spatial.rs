//! Spatial solvers: fixed linear SPD approximations `W^{-1}` of the inverse
//! of `c_M M + c_A A`, plus estimators for their quality.
//!
//! Every solver is one application of a fixed linear operator. The
//! multigrid solver shares one hierarchy of `(M_l, A_l)` pairs between all
//! operators of the form `c_M M + c_A A`, so building a solver per time step
//! or per frequency only costs the level diagonals and a tiny coarse factor.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, lanczos_extremal, BlockVector, CholeskyFactor, CsrMatrix, LanczosOptions, SpatialMatrix};
use crate::model::{Mesh, ProblemSpec, Space};

/// Which approximate inverse to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    Direct,
    /// `sweeps` damped Jacobi steps from a zero guess.
    Jacobi { sweeps: usize, damping: f64 },
    /// `cycles` symmetric V-cycles with `smoothing` damped Jacobi steps
    /// before and after each coarse correction. `damping = None` picks
    /// 2/3 in 1D and 4/5 in 2D.
    Multigrid { cycles: usize, smoothing: usize, damping: Option<f64> },
}

impl SolverKind {
    /// `cycles` V-cycles with two pre- and two post-smoothing steps.
    pub fn mg(cycles: usize) -> Self {
        SolverKind::Multigrid { cycles, smoothing: 2, damping: None }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, SolverKind::Direct)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SolverKind::Direct => Ok(()),
            SolverKind::Jacobi { sweeps, damping } => {
                if sweeps == 0 || !(damping > 0.0) {
                    return Err(Error::InvalidInput("Jacobi needs sweeps >= 1 and positive damping".into()));
                }
                Ok(())
            }
            SolverKind::Multigrid { cycles, smoothing, damping } => {
                if cycles == 0 || smoothing == 0 || damping.is_some_and(|d| !(d > 0.0)) {
                    return Err(Error::InvalidInput(
                        "multigrid needs cycles >= 1, smoothing >= 1 and positive damping".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverKind::Direct => write!(f, "direct"),
            SolverKind::Jacobi { sweeps, .. } => write!(f, "jacobi({sweeps})"),
            SolverKind::Multigrid { cycles, .. } => write!(f, "mg({cycles})"),
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    /// `direct`, `jacobi`, `jacobi(3)`, `mg`, `mg(2)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once('(') {
            Some((n, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::InvalidInput(format!("malformed solver '{s}'")))?;
                let v: usize = inner
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("malformed solver count in '{s}'")))?;
                (n.trim().to_string(), Some(v))
            }
            None => (s.clone(), None),
        };
        let kind = match name.as_str() {
            "direct" if arg.is_none() => SolverKind::Direct,
            "jacobi" => SolverKind::Jacobi { sweeps: arg.unwrap_or(1), damping: 2.0 / 3.0 },
            "mg" | "multigrid" => SolverKind::mg(arg.unwrap_or(1)),
            _ => return Err(Error::InvalidInput(format!("unknown solver '{s}'"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// One level of a geometric multigrid hierarchy.
#[derive(Debug, Clone)]
pub struct MgLevel {
    pub mesh: Mesh,
    pub mass: SpatialMatrix,
    pub stiffness: SpatialMatrix,
    /// Interpolation from the next coarser level; `None` on the coarsest.
    pub prolongation: Option<CsrMatrix>,
}

/// Nested P1 spaces on uniformly refined meshes, finest level first.
#[derive(Debug, Clone)]
pub struct MgHierarchy {
    levels: Vec<MgLevel>,
}

impl MgHierarchy {
    pub fn levels(&self) -> &[MgLevel] {
        &self.levels
    }

    pub fn fine(&self) -> &MgLevel {
        &self.levels[0]
    }

    pub fn space(&self) -> Space {
        self.levels[0].mesh.space
    }

    pub fn dim(&self) -> usize {
        self.levels[0].mass.dim()
    }
}

/// Linear interpolation from `coarse` to its uniform refinement.
pub fn prolongation(coarse: &Mesh) -> Result<CsrMatrix> {
    let fine = Mesh::new(coarse.space, 2 * coarse.cells)?;
    let mut triplets = Vec::new();
    let n = fine.cells;
    let mut add = |fi: usize, sources: &[(usize, usize, f64)]| {
        for &(ci, cj, w) in sources {
            if let Some(c) = coarse.dof(ci, cj) {
                triplets.push((fi, c, w));
            }
        }
    };
    match coarse.space {
        Space::OneD => {
            for i in 1..n {
                let fi = fine.dof(i, 0).expect("interior");
                if i % 2 == 0 {
                    add(fi, &[(i / 2, 0, 1.0)]);
                } else {
                    add(fi, &[((i - 1) / 2, 0, 0.5), ((i + 1) / 2, 0, 0.5)]);
                }
            }
        }
        Space::TwoD => {
            for j in 1..n {
                for i in 1..n {
                    let fi = fine.dof(i, j).expect("interior");
                    match (i % 2, j % 2) {
                        (0, 0) => add(fi, &[(i / 2, j / 2, 1.0)]),
                        (1, 0) => add(fi, &[((i - 1) / 2, j / 2, 0.5), ((i + 1) / 2, j / 2, 0.5)]),
                        (0, _) => add(fi, &[(i / 2, (j - 1) / 2, 0.5), (i / 2, (j + 1) / 2, 0.5)]),
                        // midpoint of the element diagonal (ci, cj)-(ci+1, cj+1)
                        _ => add(fi, &[((i - 1) / 2, (j - 1) / 2, 0.5), ((i + 1) / 2, (j + 1) / 2, 0.5)]),
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(fine.dofs(), coarse.dofs(), &triplets)
}

/// Halves the mesh until two cells per side remain; coarse operators are
/// Galerkin products `P^T L P`.
pub fn build_mg_hierarchy(space: Space, fine_cells: usize) -> Result<MgHierarchy> {
    if fine_cells < 4 || !fine_cells.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "multigrid needs a power-of-two number of cells >= 4, got {fine_cells}"
        )));
    }
    let fine = Mesh::new(space, fine_cells)?;
    let (mass, stiffness) = fine.assemble()?;
    let mut levels = vec![MgLevel { mesh: fine, mass, stiffness, prolongation: None }];
    while levels.last().expect("non-empty").mesh.cells > 2 {
        let finer = levels.last_mut().expect("non-empty");
        let coarse_mesh = Mesh::new(space, finer.mesh.cells / 2)?;
        let p = prolongation(&coarse_mesh)?;
        let mass = finer.mass.galerkin(&p)?;
        let stiffness = finer.stiffness.galerkin(&p)?;
        finer.prolongation = Some(p);
        levels.push(MgLevel { mesh: coarse_mesh, mass, stiffness, prolongation: None });
    }
    Ok(MgHierarchy { levels })
}

#[derive(Debug, Clone)]
struct Multigrid {
    hierarchy: Arc<MgHierarchy>,
    c_mass: f64,
    c_stiff: f64,
    cycles: usize,
    smoothing: usize,
    damping: f64,
    inv_diag: Vec<Vec<f64>>,
    coarse: CholeskyFactor,
}

impl Multigrid {
    fn level_apply(&self, l: usize, x: &[f64], y: &mut [f64]) {
        let lv = &self.hierarchy.levels[l];
        lv.mass.mul_into(x, y);
        y.iter_mut().for_each(|v| *v *= self.c_mass);
        lv.stiffness.mul_add_into(self.c_stiff, x, y);
    }

    fn smooth(&self, l: usize, b: &[f64], x: &mut [f64], work: &mut [f64]) {
        let d = &self.inv_diag[l];
        for _ in 0..self.smoothing {
            self.level_apply(l, x, work);
            for i in 0..x.len() {
                x[i] += self.damping * d[i] * (b[i] - work[i]);
            }
        }
    }

    /// One V-cycle from a zero initial guess.
    fn vcycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        let levels = &self.hierarchy.levels;
        if l + 1 == levels.len() {
            let mut x = b.to_vec();
            self.coarse.solve_in_place(&mut x);
            return x;
        }
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut work = vec![0.0; n];
        self.smooth(l, b, &mut x, &mut work);
        self.level_apply(l, &x, &mut work);
        let r: Vec<f64> = b.iter().zip(&work).map(|(b, a)| b - a).collect();
        let p = levels[l].prolongation.as_ref().expect("prolongation below the coarsest level");
        let mut rc = vec![0.0; p.ncols()];
        p.mul_transpose_into(&r, &mut rc);
        let ec = self.vcycle(l + 1, &rc);
        p.mul_into(&ec, &mut work);
        x.iter_mut().zip(&work).for_each(|(x, e)| *x += e);
        self.smooth(l, b, &mut x, &mut work);
        x
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.vcycle(0, b);
        let mut work = vec![0.0; b.len()];
        for _ in 1..self.cycles {
            self.level_apply(0, &x, &mut work);
            let r: Vec<f64> = b.iter().zip(&work).map(|(b, a)| b - a).collect();
            let e = self.vcycle(0, &r);
            x.iter_mut().zip(&e).for_each(|(x, e)| *x += e);
        }
        x
    }
}

#[derive(Debug, Clone)]
enum Imp {
    Direct(CholeskyFactor),
    Jacobi { matrix: SpatialMatrix, inv_diag: Vec<f64>, sweeps: usize, damping: f64 },
    Multigrid(Box<Multigrid>),
}

/// A fixed linear approximate inverse `W^{-1}` of `c_M M + c_A A`.
#[derive(Debug, Clone)]
pub struct SpatialSolver {
    dim: usize,
    kind: SolverKind,
    imp: Imp,
}

impl SpatialSolver {
    /// Builds a solver for `c_mass * mass + c_stiff * stiffness`.
    ///
    /// Multigrid needs a hierarchy whose finest level carries exactly these
    /// `mass` and `stiffness` matrices.
    pub fn build(
        kind: SolverKind,
        mass: &SpatialMatrix,
        stiffness: &SpatialMatrix,
        c_mass: f64,
        c_stiff: f64,
        hierarchy: Option<&Arc<MgHierarchy>>,
    ) -> Result<Self> {
        kind.validate()?;
        check_dim(mass.dim(), stiffness.dim())?;
        if c_mass < 0.0 || c_stiff < 0.0 || c_mass + c_stiff <= 0.0 {
            return Err(Error::InvalidInput(format!("bad operator coefficients ({c_mass}, {c_stiff})")));
        }
        let dim = mass.dim();
        let assemble = || mass.linear_combination(c_mass, stiffness, c_stiff);
        let imp = match kind {
            SolverKind::Direct => Imp::Direct(CholeskyFactor::new(&assemble()?)?),
            SolverKind::Jacobi { sweeps, damping } => {
                let matrix = assemble()?;
                let inv_diag = inverse_diagonal(&matrix.diagonal())?;
                Imp::Jacobi { matrix, inv_diag, sweeps, damping }
            }
            SolverKind::Multigrid { cycles, smoothing, damping } => {
                let h = hierarchy.ok_or_else(|| Error::InvalidInput("multigrid solver needs a mesh hierarchy".into()))?;
                check_dim(h.dim(), dim)?;
                if h.fine().mass != *mass || h.fine().stiffness != *stiffness {
                    return Err(Error::InvalidInput("operator does not match the multigrid hierarchy".into()));
                }
                let damping = damping.unwrap_or(match h.space() {
                    Space::OneD => 2.0 / 3.0,
                    Space::TwoD => 0.8,
                });
                let inv_diag = h
                    .levels
                    .iter()
                    .map(|lv| {
                        let d: Vec<f64> = lv
                            .mass
                            .diagonal()
                            .iter()
                            .zip(lv.stiffness.diagonal())
                            .map(|(m, a)| c_mass * m + c_stiff * a)
                            .collect();
                        inverse_diagonal(&d)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let last = h.levels.last().expect("non-empty");
                let coarse = CholeskyFactor::new(&last.mass.linear_combination(c_mass, &last.stiffness, c_stiff)?)?;
                Imp::Multigrid(Box::new(Multigrid {
                    hierarchy: h.clone(),
                    c_mass,
                    c_stiff,
                    cycles,
                    smoothing,
                    damping,
                    inv_diag,
                    coarse,
                }))
            }
        };
        Ok(Self { dim, kind, imp })
    }

    /// Direct or Jacobi solver for an explicit matrix.
    pub fn for_matrix(kind: SolverKind, matrix: &SpatialMatrix) -> Result<Self> {
        if matches!(kind, SolverKind::Multigrid { .. }) {
            return Err(Error::InvalidInput("multigrid solvers are built from a mesh hierarchy".into()));
        }
        let zero = SpatialMatrix::from_triplets(matrix.dim(), &[])?;
        Self::build(kind, &zero, matrix, 0.0, 1.0, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    pub fn apply_inverse(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim, "spatial solver: input length");
        match &self.imp {
            Imp::Direct(f) => {
                let mut x = b.to_vec();
                f.solve_in_place(&mut x);
                x
            }
            Imp::Jacobi { matrix, inv_diag, sweeps, damping } => {
                let mut x: Vec<f64> = b.iter().zip(inv_diag).map(|(b, d)| damping * d * b).collect();
                let mut ax = vec![0.0; b.len()];
                for _ in 1..*sweeps {
                    matrix.mul_into(&x, &mut ax);
                    for i in 0..x.len() {
                        x[i] += damping * inv_diag[i] * (b[i] - ax[i]);
                    }
                }
                x
            }
            Imp::Multigrid(mg) => mg.apply(b),
        }
    }

    /// Checked variant of [`SpatialSolver::apply_inverse`].
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, b.len())?;
        Ok(self.apply_inverse(b))
    }
}

fn inverse_diagonal(d: &[f64]) -> Result<Vec<f64>> {
    d.iter()
        .map(|&v| {
            if v > 0.0 {
                Ok(1.0 / v)
            } else {
                Err(Error::NotPositiveDefinite(format!("diagonal entry {v}")))
            }
        })
        .collect()
}

/// Outcome of the linearity and symmetry probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeReport {
    /// `max |W(ax + by) - aWx - bWy| / scale`.
    pub linearity: f64,
    /// `max |x.Wy - y.Wx| / scale`.
    pub symmetry: f64,
    /// `min x.Wx / |x|^2` over the probes.
    pub min_rayleigh: f64,
}

impl ProbeReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.linearity <= tol && self.symmetry <= tol && self.min_rayleigh > 0.0
    }
}

/// Probes `apply` on `trials` seeded random triples.
pub fn probe_operator(dim: usize, trials: usize, seed: u64, apply: impl Fn(&[f64]) -> Vec<f64>) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rand_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let mut report = ProbeReport { linearity: 0.0, symmetry: 0.0, min_rayleigh: f64::INFINITY };
    for _ in 0..trials {
        let x = rand_vec(&mut rng);
        let y = rand_vec(&mut rng);
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let wx = apply(&x);
        let wy = apply(&y);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(x, y)| a * x + b * y).collect();
        let wc = apply(&combo);
        let scale = wx.iter().chain(&wy).fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let lin = wc
            .iter()
            .zip(wx.iter().zip(&wy))
            .map(|(c, (p, q))| (c - a * p - b * q).abs())
            .fold(0.0, f64::max);
        report.linearity = report.linearity.max(lin / (scale * (a.abs() + b.abs()).max(1.0)));
        let (xwy, ywx) = (dot(&x, &wy), dot(&y, &wx));
        report.symmetry = report.symmetry.max((xwy - ywx).abs() / xwy.abs().max(ywx.abs()).max(scale));
        report.min_rayleigh = report.min_rayleigh.min(dot(&x, &wx) / dot(&x, &x));
    }
    report
}

/// `||I - W^{-1} A||_W` for SPD `a`: the largest `|1 - lambda|` over the
/// spectrum of `W^{-1} A`, estimated by Lanczos in the `A` inner product.
/// Ritz values lie inside the spectrum, so the estimate approaches the true
/// value from below.
pub fn estimate_rho_a(a: &SpatialMatrix, solver: &SpatialSolver, opts: &LanczosOptions) -> Result<f64> {
    check_dim(a.dim(), solver.dim())?;
    if solver.kind().is_direct() {
        return Ok(0.0);
    }
    let r = lanczos_extremal(a.dim(), |x| Ok(a.mul_vec(x)), |_, ax| Ok(solver.apply_inverse(ax)), opts)?;
    Ok((1.0 - r.lambda_min).abs().max((r.lambda_max - 1.0).abs()))
}

/// Extremal eigenvalues `(gamma, Gamma)` of the pencil
/// `(H A^{-1} H, W A^{-1} W)` where `W^{-1}` is the solver for `H`.
pub fn estimate_gamma_gamma(
    h: &SpatialMatrix,
    solver: &SpatialSolver,
    a: &SpatialMatrix,
    opts: &LanczosOptions,
) -> Result<(f64, f64)> {
    check_dim(h.dim(), solver.dim())?;
    check_dim(h.dim(), a.dim())?;
    let a_fac = CholeskyFactor::new(a)?;
    // T = W^{-1} A W^{-1} (H A^{-1} H) is self-adjoint in the H A^{-1} H product.
    let inner = |x: &[f64]| {
        let mut y = h.mul_vec(x);
        a_fac.solve_in_place(&mut y);
        Ok(h.mul_vec(&y))
    };
    let op = |_: &[f64], yx: &[f64]| {
        let z = solver.apply_inverse(yx);
        Ok(solver.apply_inverse(&a.mul_vec(&z)))
    };
    let r = lanczos_extremal(h.dim(), inner, op, opts)?;
    Ok((r.lambda_min, r.lambda_max))
}

/// Hierarchy matching a problem's mesh, when it has one with power-of-two
/// cells.
pub fn hierarchy_for(spec: &ProblemSpec) -> Result<Option<Arc<MgHierarchy>>> {
    match spec.mesh() {
        Some(mesh) if mesh.cells >= 4 && mesh.cells.is_power_of_two() => {
            Ok(Some(Arc::new(build_mg_hierarchy(mesh.space, mesh.cells)?)))
        }
        _ => Ok(None),
    }
}

/// Block-diagonal `A~^{-1}` with blocks `(tau_n A_n)^{-1}` approximated by
/// one solver per distinct stiffness base: a solver for `c A` is `1/c` times
/// the solver for `A`.
#[derive(Debug, Clone)]
pub struct BlockDiagonalSolver {
    solvers: Vec<Arc<SpatialSolver>>,
    index: Vec<usize>,
    scale: Vec<f64>,
}

impl BlockDiagonalSolver {
    pub fn build(spec: &ProblemSpec, kind: SolverKind, hierarchy: Option<&Arc<MgHierarchy>>) -> Result<Self> {
        let mut bases: Vec<&Arc<SpatialMatrix>> = Vec::new();
        let mut solvers = Vec::new();
        let mut index = Vec::with_capacity(spec.steps());
        let mut scale = Vec::with_capacity(spec.steps());
        for (n, a) in spec.stiffness().iter().enumerate() {
            let id = match bases.iter().position(|b| Arc::ptr_eq(b, &a.base)) {
                Some(id) => id,
                None => {
                    solvers.push(Arc::new(SpatialSolver::build(kind, spec.mass(), &a.base, 0.0, 1.0, hierarchy)?));
                    bases.push(&a.base);
                    solvers.len() - 1
                }
            };
            index.push(id);
            scale.push(1.0 / (spec.tau(n) * a.scale));
        }
        Ok(Self { solvers, index, scale })
    }

    pub fn kind(&self) -> SolverKind {
        self.solvers[0].kind()
    }

    pub fn steps(&self) -> usize {
        self.index.len()
    }

    /// Spatial solver and scalar factor used for step `n`.
    pub fn step(&self, n: usize) -> (&SpatialSolver, f64) {
        (&self.solvers[self.index[n]], self.scale[n])
    }

    pub fn apply(&self, r: &BlockVector) -> Result<BlockVector> {
        check_dim(self.steps(), r.steps())?;
        check_dim(self.solvers[0].dim(), r.dim())?;
        let mut out = BlockVector::zeros(r.steps(), r.dim());
        out.par_blocks_mut().enumerate().for_each(|(n, y)| {
            let x = self.solvers[self.index[n]].apply_inverse(r.block(n));
            for (y, x) in y.iter_mut().zip(x) {
                *y = self.scale[n] * x;
            }
        });
        Ok(out)
    }
}
