use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// How a time grid is generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    Uniform,
    /// Step lengths proportional to `1 + perturbation * xi_n` with seeded
    /// `xi_n` uniform in `[-1, 1]`.
    Perturbed { perturbation: f64, seed: u64 },
}

/// Partition `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    steps: Vec<f64>,
    kind: GridKind,
}

impl TimeGrid {
    pub fn uniform(n: usize, final_time: f64) -> Result<Self> {
        build_time_grid(GridKind::Uniform, n, final_time)
    }

    pub fn perturbed(n: usize, final_time: f64, perturbation: f64, seed: u64) -> Result<Self> {
        build_time_grid(GridKind::Perturbed { perturbation, seed }, n, final_time)
    }

    /// Grid with the given step lengths.
    pub fn from_steps(steps: Vec<f64>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidInput("time grid needs at least one step".into()));
        }
        if let Some(bad) = steps.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput(format!("non-positive time step {bad}")));
        }
        let mut nodes = Vec::with_capacity(steps.len() + 1);
        nodes.push(0.0);
        let mut t = 0.0;
        for s in &steps {
            t += s;
            nodes.push(t);
        }
        Ok(Self { nodes, steps, kind: GridKind::Uniform }.with_kind_detected())
    }

    fn with_kind_detected(mut self) -> Self {
        let first = self.steps[0];
        if self.steps.iter().any(|&s| s != first) {
            // Recorded as a zero-seed perturbation: the generator is unknown.
            self.kind = GridKind::Perturbed { perturbation: f64::NAN, seed: 0 };
        }
        self
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// `t_0, ..., t_N`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `tau_1, ..., tau_N`.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.steps[0];
        self.steps.iter().all(|&s| s == first)
    }

    /// Geometric mean of the step lengths.
    pub fn geometric_mean_step(&self) -> f64 {
        (self.steps.iter().map(|s| s.ln()).sum::<f64>() / self.steps.len() as f64).exp()
    }
}

pub fn build_time_grid(kind: GridKind, n: usize, final_time: f64) -> Result<TimeGrid> {
    if n == 0 {
        return Err(Error::InvalidInput("time grid needs N >= 1".into()));
    }
    if !(final_time > 0.0 && final_time.is_finite()) {
        return Err(Error::InvalidInput(format!("final time must be positive, got {final_time}")));
    }
    let weights: Vec<f64> = match kind {
        GridKind::Uniform => vec![1.0; n],
        GridKind::Perturbed { perturbation, seed } => {
            if !(0.0..1.0).contains(&perturbation) {
                return Err(Error::InvalidInput(format!(
                    "perturbation must lie in [0, 1), got {perturbation}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| 1.0 + perturbation * rng.gen_range(-1.0..=1.0)).collect()
        }
    };
    let total: f64 = weights.iter().sum();
    let uniform = weights.iter().all(|&w| w == weights[0]);
    let steps: Vec<f64> = if uniform {
        vec![final_time / n as f64; n]
    } else {
        weights.iter().map(|w| final_time * w / total).collect()
    };
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(0.0);
    let mut acc = 0.0;
    for w in &weights[..n - 1] {
        acc += w;
        nodes.push(final_time * acc / total);
    }
    nodes.push(final_time);
    Ok(TimeGrid { nodes, steps, kind })
}
