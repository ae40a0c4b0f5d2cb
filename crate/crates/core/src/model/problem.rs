use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    dense_generalized_eig_extremal, lanczos_extremal, CholeskyFactor, LanczosOptions, SpatialMatrix,
};
use crate::model::{Mesh, Space, TimeGrid};

/// `scale * base`, with the base matrix shared between time steps.
#[derive(Debug, Clone)]
pub struct ScaledMatrix {
    pub scale: f64,
    pub base: Arc<SpatialMatrix>,
}

impl ScaledMatrix {
    pub fn new(scale: f64, base: Arc<SpatialMatrix>) -> Self {
        Self { scale, base }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        self.base.mul_into(x, y);
        y.iter_mut().for_each(|v| *v *= self.scale);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.mul_into(x, &mut y);
        y
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.scale * self.base.quadratic_form(x)
    }

    pub fn assembled(&self) -> SpatialMatrix {
        self.base.scaled(self.scale)
    }

    pub fn shares_base(&self, other: &ScaledMatrix) -> bool {
        Arc::ptr_eq(&self.base, &other.base)
    }
}

/// Time-dependent diffusion coefficient `c(t) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// `before` for `t <= switch_time`, `after` otherwise.
    Step { before: f64, after: f64, switch_time: f64 },
    /// `mean + amplitude * sin(2 pi frequency t)`.
    Sinusoidal { mean: f64, amplitude: f64, frequency: f64 },
}

impl Coefficient {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::Step { before, after, switch_time } => {
                if t <= switch_time {
                    before
                } else {
                    after
                }
            }
            Coefficient::Sinusoidal { mean, amplitude, frequency } => {
                mean + amplitude * (2.0 * PI * frequency * t).sin()
            }
        }
    }

    /// `(c_lo, c_hi)` bounds over all `t`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Coefficient::Constant(c) => (c, c),
            Coefficient::Step { before, after, .. } => (before.min(after), before.max(after)),
            Coefficient::Sinusoidal { mean, amplitude, .. } => (mean - amplitude.abs(), mean + amplitude.abs()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if lo > 0.0 && hi.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("coefficient must stay in (0, inf), bounds [{lo}, {hi}]")))
        }
    }
}

/// Source of the initial datum and loads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeatData {
    /// Zero forcing, `u(0) = sin(pi x) [sin(pi y)]`.
    SineInitial,
    /// Exact solution `exp(-t) sin(pi x) [sin(pi y)]` with matching forcing.
    Manufactured,
    /// Seeded random initial datum and loads.
    Random { seed: u64 },
    Zero,
}

/// Full discrete problem: `M`, `{tau_n, A_n}`, reference pair, data and `alpha`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    mass: Arc<SpatialMatrix>,
    stiffness: Vec<ScaledMatrix>,
    grid: TimeGrid,
    loads: Vec<Vec<f64>>,
    initial: Vec<f64>,
    tau_ref: f64,
    a_ref: ScaledMatrix,
    alpha: f64,
    mesh: Option<Mesh>,
}

impl ProblemSpec {
    /// Validates the data and measures `alpha`.
    pub fn new(
        mass: Arc<SpatialMatrix>,
        stiffness: Vec<ScaledMatrix>,
        grid: TimeGrid,
        loads: Vec<Vec<f64>>,
        initial: Vec<f64>,
        tau_ref: f64,
        a_ref: ScaledMatrix,
    ) -> Result<Self> {
        let dim = mass.dim();
        check_dim(grid.len(), stiffness.len())?;
        check_dim(grid.len(), loads.len())?;
        check_dim(dim, initial.len())?;
        check_dim(dim, a_ref.dim())?;
        for a in &stiffness {
            check_dim(dim, a.dim())?;
            if !(a.scale > 0.0) {
                return Err(Error::InvalidInput(format!("stiffness scale {} must be positive", a.scale)));
            }
        }
        for f in &loads {
            check_dim(dim, f.len())?;
        }
        if !(tau_ref > 0.0) || !(a_ref.scale > 0.0) {
            return Err(Error::InvalidInput("reference step and operator must be positive".into()));
        }
        let alpha = compute_alpha(&stiffness, grid.steps(), tau_ref, &a_ref)?;
        Ok(Self { mass, stiffness, grid, loads, initial, tau_ref, a_ref, alpha, mesh: None })
    }

    pub fn with_mesh(mut self, mesh: Mesh) -> Result<Self> {
        check_dim(mesh.dofs(), self.dim())?;
        self.mesh = Some(mesh);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    /// Number of time steps `N`.
    pub fn steps(&self) -> usize {
        self.grid.len()
    }

    pub fn mass(&self) -> &Arc<SpatialMatrix> {
        &self.mass
    }

    /// `A_1, ..., A_N` (zero-based).
    pub fn stiffness(&self) -> &[ScaledMatrix] {
        &self.stiffness
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn tau(&self, n: usize) -> f64 {
        self.grid.steps()[n]
    }

    pub fn loads(&self) -> &[Vec<f64>] {
        &self.loads
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn tau_ref(&self) -> f64 {
        self.tau_ref
    }

    pub fn a_ref(&self) -> &ScaledMatrix {
        &self.a_ref
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mesh(&self) -> Option<Mesh> {
        self.mesh
    }

    /// Same problem with a different reference pair; `alpha` is re-measured.
    pub fn with_reference(&self, tau_ref: f64, a_ref: ScaledMatrix) -> Result<Self> {
        let spec = Self::new(
            self.mass.clone(),
            self.stiffness.clone(),
            self.grid.clone(),
            self.loads.clone(),
            self.initial.clone(),
            tau_ref,
            a_ref,
        )?;
        Ok(Self { mesh: self.mesh, ..spec })
    }

    /// Same operators and grid with new data.
    pub fn with_data(&self, loads: Vec<Vec<f64>>, initial: Vec<f64>) -> Result<Self> {
        check_dim(self.steps(), loads.len())?;
        check_dim(self.dim(), initial.len())?;
        for f in &loads {
            check_dim(self.dim(), f.len())?;
        }
        Ok(Self { loads, initial, ..self.clone() })
    }
}

/// Extremal eigenvalues of the pencil `(other, reference)` of two base
/// matrices: dense below 400 unknowns, Lanczos above.
fn base_pencil_extremes(other: &SpatialMatrix, reference: &SpatialMatrix) -> Result<(f64, f64)> {
    if other.dim() <= 400 {
        return dense_generalized_eig_extremal(&other.to_dense(), &reference.to_dense(), 400);
    }
    let chol = CholeskyFactor::new(reference)?;
    let r = lanczos_extremal(
        other.dim(),
        |x| Ok(reference.mul_vec(x)),
        |x, _| {
            let mut y = other.mul_vec(x);
            chol.solve_in_place(&mut y);
            Ok(y)
        },
        &LanczosOptions { max_iter: 400, tol: 1e-12, seed: 17 },
    )?;
    Ok((r.lambda_min, r.lambda_max))
}

/// Smallest `alpha >= 1` with `tau A / alpha <= tau_n A_n <= alpha tau A`.
pub fn compute_alpha(stiffness: &[ScaledMatrix], steps: &[f64], tau_ref: f64, a_ref: &ScaledMatrix) -> Result<f64> {
    check_dim(stiffness.len(), steps.len())?;
    let mut cache: HashMap<*const SpatialMatrix, (f64, f64)> = HashMap::new();
    let mut alpha = 1.0f64;
    for (a, &tau) in stiffness.iter().zip(steps) {
        let (lo, hi) = if a.shares_base(a_ref) {
            (1.0, 1.0)
        } else {
            let key = Arc::as_ptr(&a.base);
            match cache.get(&key) {
                Some(&v) => v,
                None => {
                    let v = base_pencil_extremes(&a.base, &a_ref.base)?;
                    cache.insert(key, v);
                    v
                }
            }
        };
        let ratio = tau * a.scale / (tau_ref * a_ref.scale);
        let (lo, hi) = (ratio * lo, ratio * hi);
        if !(lo > 0.0) {
            return Err(Error::NotPositiveDefinite("tau_n A_n relative to tau A".into()));
        }
        alpha = alpha.max(hi).max(1.0 / lo);
    }
    Ok(alpha)
}

/// Heat-equation model problem on the unit interval or square.
#[derive(Debug, Clone)]
pub struct HeatProblem {
    pub mesh: Mesh,
    pub grid: TimeGrid,
    pub coefficient: Coefficient,
    pub data: HeatData,
    /// Overrides the default reference pair `(tau_ref, coefficient scale)`;
    /// the base matrix is always the assembled stiffness.
    pub reference: Option<(f64, f64)>,
}

impl HeatProblem {
    pub fn new(space: Space, cells: usize, grid: TimeGrid) -> Result<Self> {
        Ok(Self {
            mesh: Mesh::new(space, cells)?,
            grid,
            coefficient: Coefficient::Constant(1.0),
            data: HeatData::SineInitial,
            reference: None,
        })
    }

    pub fn coefficient(mut self, c: Coefficient) -> Self {
        self.coefficient = c;
        self
    }

    pub fn data(mut self, d: HeatData) -> Self {
        self.data = d;
        self
    }

    pub fn reference(mut self, tau_ref: f64, coefficient_scale: f64) -> Self {
        self.reference = Some((tau_ref, coefficient_scale));
        self
    }

    pub fn build(&self) -> Result<ProblemSpec> {
        make_heat_problem(self)
    }
}

/// Assembles the heat problem: `A_n = c(t_n) A_base`, reference step the
/// geometric mean of the steps and reference operator `A_{ceil(N/2)}` unless
/// overridden.
pub fn make_heat_problem(problem: &HeatProblem) -> Result<ProblemSpec> {
    problem.coefficient.validate()?;
    let mesh = problem.mesh;
    let grid = &problem.grid;
    let (mass, stiff) = mesh.assemble()?;
    let mass = Arc::new(mass);
    let base = Arc::new(stiff);
    let nodes = grid.nodes();
    let n_steps = grid.len();
    let stiffness: Vec<ScaledMatrix> = (1..=n_steps)
        .map(|n| ScaledMatrix::new(problem.coefficient.eval(nodes[n]), base.clone()))
        .collect();

    let d = mesh.space.dimension() as f64;
    let sine = |x: f64, y: f64| match mesh.space {
        Space::OneD => (PI * x).sin(),
        Space::TwoD => (PI * x).sin() * (PI * y).sin(),
    };
    let dim = mesh.dofs();
    let (loads, initial) = match problem.data {
        HeatData::SineInitial => (vec![vec![0.0; dim]; n_steps], mesh.interpolate(sine)),
        HeatData::Zero => (vec![vec![0.0; dim]; n_steps], vec![0.0; dim]),
        HeatData::Manufactured => {
            let shape = mesh.interpolate(sine);
            let loads = (1..=n_steps)
                .map(|n| {
                    let t = nodes[n];
                    let amp = (-t).exp() * (-1.0 + problem.coefficient.eval(t) * d * PI * PI);
                    let f: Vec<f64> = shape.iter().map(|s| amp * s).collect();
                    mass.mul_vec(&f)
                })
                .collect();
            (loads, shape)
        }
        HeatData::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let initial: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let loads = (0..n_steps)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            (loads, initial)
        }
    };

    let (tau_ref, a_ref) = match problem.reference {
        Some((tau, scale)) => (tau, ScaledMatrix::new(scale, base.clone())),
        None => {
            let mid = n_steps.div_ceil(2) - 1;
            (grid.geometric_mean_step(), stiffness[mid].clone())
        }
    };
    ProblemSpec::new(mass, stiffness, grid.clone(), loads, initial, tau_ref, a_ref)?.with_mesh(mesh)
}
