//! Scalar Q1 forms on all nodes and the H1 Riesz map
//! `(delta grad phi, grad psi) + (phi, psi) = G(psi)`.

use crate::scalar::Scalar;

use super::linalg::{Csr, LinalgError, SpdSolver};
use super::space::FemSpace;

/// Assembles `a * stiffness + b * mass` for scalar Q1 functions.
pub fn scalar_form<T: Scalar>(space: &FemSpace<T>, a: T, b: T) -> Csr<T> {
    let mesh = &space.mesh;
    let mut trip = Vec::with_capacity(mesh.num_cells() * 16);
    for c in 0..mesh.num_cells() {
        let nodes = mesh.cells[c];
        let mut ke = [[T::zero(); 4]; 4];
        for p in space.quad.cell_points(c) {
            for i in 0..4 {
                for j in 0..4 {
                    let g = p.grad[i][0] * p.grad[j][0] + p.grad[i][1] * p.grad[j][1];
                    ke[i][j] += p.wdet * (a * g + b * p.shape[i] * p.shape[j]);
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                trip.push((nodes[i], nodes[j], ke[i][j]));
            }
        }
    }
    Csr::from_triplets(mesh.num_nodes(), &trip)
}

/// Factorized H1 Riesz map for a fixed `delta`.
#[derive(Debug, Clone)]
pub struct RieszMap<T> {
    pub delta: T,
    gram: Csr<T>,
    solver: SpdSolver<T>,
}

impl<T: Scalar> RieszMap<T> {
    pub fn new(space: &FemSpace<T>, delta: T) -> Result<Self, LinalgError> {
        let gram = scalar_form(space, delta, T::one());
        let solver = SpdSolver::new(gram.clone())?;
        Ok(Self { delta, gram, solver })
    }

    /// Representer of a nodal functional `G_a = G(N_a)`.
    pub fn solve(&self, functional: &[T]) -> Result<Vec<T>, LinalgError> {
        self.solver.solve(functional)
    }

    /// `(delta grad a, grad b) + (a, b)`.
    pub fn inner(&self, a: &[T], b: &[T]) -> T {
        self.gram.mul_vec(a).iter().zip(b).map(|(x, y)| *x * *y).sum()
    }

    pub fn norm(&self, a: &[T]) -> T {
        self.inner(a, a).max(T::zero()).sqrt()
    }
}

/// Convenience wrapper: factorizes and solves once.
pub fn h1_riesz_solve<T: Scalar>(space: &FemSpace<T>, delta: T, functional: &[T]) -> Result<Vec<T>, LinalgError> {
    RieszMap::new(space, delta)?.solve(functional)
}
