//! Time-dependent load data: body force per unit mass `f`, boundary traction
//! `g` on the Neumann part and prescribed displacement `w` on the clamped part.

use std::fmt;
use std::sync::Arc;

use crate::scalar::Scalar;

/// Vector field sampled at a point `x` and time `t`.
pub type Sampler<T> = Arc<dyn Fn([T; 2], T) -> [T; 2] + Send + Sync>;

#[derive(Clone)]
pub struct LoadProgram<T> {
    pub f: Sampler<T>,
    pub g: Sampler<T>,
    pub w: Sampler<T>,
    pub final_time: T,
}

impl<T: fmt::Debug> fmt::Debug for LoadProgram<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LoadProgram").field("final_time", &self.final_time).finish_non_exhaustive()
    }
}

pub fn zero_sampler<T: Scalar>() -> Sampler<T> {
    Arc::new(|_, _| [T::zero(); 2])
}

impl<T: Scalar> LoadProgram<T> {
    pub fn new(f: Sampler<T>, g: Sampler<T>, w: Sampler<T>, final_time: T) -> Self {
        Self { f, g, w, final_time }
    }

    pub fn zero(final_time: T) -> Self {
        Self::new(zero_sampler(), zero_sampler(), zero_sampler(), final_time)
    }

    /// Traction `t * g1` (constant in space), everything else zero.
    pub fn ramped_traction(g1: [T; 2], final_time: T) -> Self {
        Self::new(zero_sampler(), Arc::new(move |_, t| [t * g1[0], t * g1[1]]), zero_sampler(), final_time)
    }

    /// Names of the fields (`f`, `g`, `w`) that do not vanish at `t = 0` on any of `points`.
    pub fn nonzero_at_start(&self, points: &[[T; 2]]) -> Vec<&'static str> {
        let mut bad = Vec::new();
        for (name, s) in [("f", &self.f), ("g", &self.g), ("w", &self.w)] {
            if points.iter().any(|&x| s(x, T::zero()).iter().any(|v| *v != T::zero())) {
                bad.push(name);
            }
        }
        bad
    }
}

/// Loads sampled on the mesh at one time node.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadStep<T> {
    pub t: T,
    /// Body force at every cell quadrature point.
    pub f_quad: Vec<[T; 2]>,
    /// Traction at the two Gauss points of every facet (zero off the Neumann part).
    pub g_facet: Vec<[[T; 2]; 2]>,
    /// Prescribed displacement at every dof; only Dirichlet dofs are used.
    pub w: Vec<T>,
}

impl<T: Scalar> LoadStep<T> {
    pub fn is_zero(&self) -> bool {
        let z = T::zero();
        self.f_quad.iter().all(|v| v[0] == z && v[1] == z)
            && self.g_facet.iter().all(|p| p.iter().all(|v| v[0] == z && v[1] == z))
            && self.w.iter().all(|v| *v == z)
    }
}

/// Uniform time grid `t_i = i T / k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    pub steps: usize,
    pub final_time: T,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(steps: usize, final_time: T) -> Self {
        assert!(steps >= 1, "time grid needs at least one step");
        assert!(final_time > T::zero(), "final time must be positive");
        Self { steps, final_time }
    }

    pub fn tau(&self) -> T {
        self.final_time / T::from_usize_lossy(self.steps)
    }

    pub fn time(&self, i: usize) -> T {
        T::from_usize_lossy(i) * self.tau()
    }

    pub fn times(&self) -> Vec<T> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }
}
