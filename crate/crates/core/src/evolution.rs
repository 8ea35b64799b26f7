//! Forward problem: incremental minimization over a uniform time grid.
//!
//! Each step minimizes the condensed incremental energy in the free
//! displacement dofs by Newton's method with a backtracking line search on
//! that energy, then recovers the plastic strain pointwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dissipation::Gamma;
use crate::fem::assembly::{assemble_state_residual, AssemblyError, PointData};
use crate::fem::linalg::{solve_spd, LinalgError};
use crate::fem::{FemSpace, LoadProgram, LoadStep, TimeGrid, QUAD_PER_CELL};
use crate::material::MaterialLaw;
use crate::scalar::{KahanSum, Scalar};
use crate::tensor::{DevTensor, SymTensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("Newton failed at step {step} after {} iterations; residual history {residuals:?}", residuals.len())]
    NewtonDivergence { step: usize, residuals: Vec<f64> },
    #[error("phase field has {got} nodal values, mesh has {expected} nodes")]
    PhaseLength { got: usize, expected: usize },
    #[error("non-finite value in step {step}")]
    NonFinite { step: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOptions {
    /// Relative tolerance on the free-dof residual norm.
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 60, max_backtracks: 40 }
    }
}

/// Mesh, material, loads and time grid, with loads pre-sampled at every node.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    pub space: FemSpace<T>,
    pub law: MaterialLaw<T>,
    pub(crate) loads: LoadProgram<T>,
    pub(crate) grid: TimeGrid<T>,
    pub(crate) steps: Vec<LoadStep<T>>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(space: FemSpace<T>, law: MaterialLaw<T>, loads: LoadProgram<T>, grid: TimeGrid<T>) -> Self {
        let steps = grid.times().into_iter().map(|t| space.sample_loads(&loads, t)).collect();
        Self { space, law, loads, grid, steps }
    }

    /// Same problem on a different time grid.
    pub fn with_grid(&self, grid: TimeGrid<T>) -> Self {
        Self::new(self.space.clone(), self.law.clone(), self.loads.clone(), grid)
    }

    /// Same problem with a different load program.
    pub fn with_loads(&self, loads: LoadProgram<T>) -> Self {
        Self::new(self.space.clone(), self.law.clone(), loads, self.grid)
    }

    pub fn num_steps(&self) -> usize {
        self.grid.steps
    }

    pub fn loads(&self) -> &LoadProgram<T> {
        &self.loads
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    /// Loads sampled at the time nodes `0..=k`.
    pub fn steps(&self) -> &[LoadStep<T>] {
        &self.steps
    }

    pub fn coefficients_at_quad(&self, z: &[T]) -> Result<PhaseAtQuad<T>, EvolutionError> {
        let n = self.space.mesh.num_nodes();
        if z.len() != n {
            return Err(EvolutionError::PhaseLength { got: z.len(), expected: n });
        }
        let z_quad = self.space.nodal_to_quad(z);
        let ell = z_quad.iter().map(|&zq| self.law.ell.eval(zq)).collect();
        Ok(PhaseAtQuad { z_quad, ell })
    }

    /// Full-dof external load vector at time node `i`.
    pub fn external(&self, phase: &PhaseAtQuad<T>, i: usize) -> Vec<T> {
        self.space.external_load(&phase.ell, &self.steps[i])
    }
}

#[derive(Debug, Clone)]
pub struct PhaseAtQuad<T> {
    pub z_quad: Vec<T>,
    pub ell: Vec<T>,
}

/// `(u_i, eps_i, p_i)` plus the stress at one time node.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState<T> {
    pub u: Vec<T>,
    pub eps: Vec<SymTensor<T>>,
    pub p: Vec<DevTensor<T>>,
    pub sigma: Vec<SymTensor<T>>,
}

impl<T: Scalar> StepState<T> {
    pub fn zero(space: &FemSpace<T>) -> Self {
        let nq = space.num_quad();
        Self {
            u: vec![T::zero(); space.num_dofs()],
            eps: vec![SymTensor::zeros(2); nq],
            p: vec![DevTensor::zeros(2); nq],
            sigma: vec![SymTensor::zeros(2); nq],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().all(|x| x.is_finite())
            && self.eps.iter().all(SymTensor::is_finite)
            && self.p.iter().all(DevTensor::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub backtracks: usize,
}

#[derive(Debug, Clone)]
pub struct EvolutionState<T> {
    pub gamma: Gamma<T>,
    pub z: Vec<T>,
    /// Time nodes `0..=k`.
    pub steps: Vec<StepState<T>>,
    pub newton: Vec<NewtonStats>,
    /// `E_k(t_i, z, u_i, eps_i, p_i)` per node.
    pub energy: Vec<T>,
    /// `D(z, p_i - p_{i-1})` with the exact density, per node (0 at `i = 0`).
    pub dissipation: Vec<T>,
}

impl<T: Scalar> EvolutionState<T> {
    pub fn num_steps(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn total_dissipation(&self) -> T {
        let k: KahanSum<T> = self.dissipation.iter().copied().collect();
        k.value()
    }
}

/// One incremental problem at node `i`, starting Newton from `guess` (full dofs).
pub fn solve_increment<T: Scalar>(
    problem: &Problem<T>,
    phase: &PhaseAtQuad<T>,
    prev: &StepState<T>,
    i: usize,
    gamma: Gamma<T>,
    guess: Option<&[T]>,
    opts: &NewtonOptions,
) -> Result<(StepState<T>, NewtonStats), EvolutionError> {
    let space = &problem.space;
    let step = &problem.steps[i];
    let external = problem.external(phase, i);
    let data = PointData { law: &problem.law, z_quad: &phase.z_quad, p_prev: &prev.p, gamma };
    let start = guess.unwrap_or(&prev.u);
    let mut u: Vec<T> = (0..space.num_dofs()).map(|d| if space.is_fixed(d) { step.w[d] } else { start[d] }).collect();

    let norm = |v: &[T]| v.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let load_scale = norm(&space.restrict(&external));
    let mut asm = assemble_state_residual(space, data, &external, &u, true)?;
    let mut rnorm = norm(&asm.residual);
    let reference = load_scale.max(rnorm);
    let tol = T::lit(opts.tol) * reference;
    let floor = T::epsilon() * T::lit(16.0) * reference;
    let mut residuals = vec![rnorm.to_f64_lossy()];
    let mut backtracks = 0;

    for _ in 0..opts.max_iter {
        if rnorm <= tol || rnorm == T::zero() {
            return Ok((finish(space, &u, asm), NewtonStats { iterations: residuals.len() - 1, residuals, backtracks }));
        }
        let jac = asm.jacobian.take().expect("jacobian requested");
        let dir = solve_spd(jac, &asm.residual)?;
        let slope: T = -asm.residual.iter().zip(&dir).map(|(r, d)| *r * *d).sum::<T>();
        let mut s = T::one();
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let mut trial = u.clone();
            space.add_free(&mut trial, &dir, -s);
            let cand = assemble_state_residual(space, data, &external, &trial, true)?;
            let cnorm = norm(&cand.residual);
            let armijo = cand.energy <= asm.energy + T::lit(1e-4) * s * slope;
            let shrinks = cnorm < (T::one() - T::lit(1e-4) * s) * rnorm;
            if armijo || shrinks {
                accepted = Some((trial, cand, cnorm));
                break;
            }
            backtracks += 1;
            s *= T::lit(0.5);
        }
        match accepted {
            Some((trial, cand, cnorm)) => {
                u = trial;
                asm = cand;
                rnorm = cnorm;
                residuals.push(rnorm.to_f64_lossy());
            }
            None if rnorm <= floor * T::lit(1e3) => {
                // no further progress is representable
                return Ok((finish(space, &u, asm), NewtonStats { iterations: residuals.len() - 1, residuals, backtracks }));
            }
            None => return Err(EvolutionError::NewtonDivergence { step: i, residuals }),
        }
    }
    if rnorm <= tol || rnorm <= floor * T::lit(1e3) {
        return Ok((finish(space, &u, asm), NewtonStats { iterations: residuals.len() - 1, residuals, backtracks }));
    }
    Err(EvolutionError::NewtonDivergence { step: i, residuals })
}

fn finish<T: Scalar>(space: &FemSpace<T>, u: &[T], asm: crate::fem::StateAssembly<T>) -> StepState<T> {
    let strains = space.strains(u);
    let p: Vec<DevTensor<T>> = asm.responses.iter().map(|r| r.p).collect();
    let eps = strains.iter().zip(&p).map(|(e, p)| *e - p.into_sym()).collect();
    let sigma = asm.responses.iter().map(|r| r.sigma).collect();
    StepState { u: u.to_vec(), eps, p, sigma }
}

/// Full trajectory from the zero initial state.
pub fn solve_evolution<T: Scalar>(
    problem: &Problem<T>,
    z: &[T],
    gamma: Gamma<T>,
    warm: Option<&EvolutionState<T>>,
    opts: &NewtonOptions,
) -> Result<EvolutionState<T>, EvolutionError> {
    let phase = problem.coefficients_at_quad(z)?;
    let k = problem.num_steps();
    let mut steps = vec![StepState::zero(&problem.space)];
    let mut newton = vec![NewtonStats { iterations: 0, residuals: vec![], backtracks: 0 }];
    for i in 1..=k {
        let guess = warm.filter(|w| w.steps.len() == k + 1).map(|w| w.steps[i].u.as_slice());
        let (next, stats) = solve_increment(problem, &phase, &steps[i - 1], i, gamma, guess, opts)?;
        if !next.is_finite() {
            return Err(EvolutionError::NonFinite { step: i });
        }
        steps.push(next);
        newton.push(stats);
    }
    let energy = (0..=k).map(|i| stage_energy(problem, &phase, &steps[i], i)).collect();
    let dissipation = (0..=k)
        .map(|i| if i == 0 { T::zero() } else { dissipation(problem, &phase, &steps[i].p, &steps[i - 1].p, Gamma::Exact) })
        .collect();
    Ok(EvolutionState { gamma, z: z.to_vec(), steps, newton, energy, dissipation })
}

/// `1/2 int C eps . eps + 1/2 int h |p|^2`.
pub fn stored_energy<T: Scalar>(problem: &Problem<T>, phase: &PhaseAtQuad<T>, eps: &[SymTensor<T>], p: &[DevTensor<T>]) -> T {
    let half = T::lit(0.5);
    let vals: Vec<T> = (0..eps.len())
        .map(|k| {
            let c = problem.law.at(phase.z_quad[k]);
            half * (c.elasticity(&eps[k]).dot(&eps[k]) + c.h * p[k].norm_sq())
        })
        .collect();
    problem.space.integrate(&vals)
}

/// `E_k(t_i, z, u, eps, p)`.
pub fn stage_energy<T: Scalar>(problem: &Problem<T>, phase: &PhaseAtQuad<T>, s: &StepState<T>, i: usize) -> T {
    let work: T = problem.external(phase, i).iter().zip(&s.u).map(|(f, u)| *f * *u).sum();
    stored_energy(problem, phase, &s.eps, &s.p) - work
}

/// `int d(z) h(p - p_prev)`, `h = |.|` for the exact case.
pub fn dissipation<T: Scalar>(problem: &Problem<T>, phase: &PhaseAtQuad<T>, p: &[DevTensor<T>], p_prev: &[DevTensor<T>], gamma: Gamma<T>) -> T {
    let vals: Vec<T> = (0..p.len())
        .map(|k| problem.law.d.eval(phase.z_quad[k]) * gamma.density(&(p[k] - p_prev[k])))
        .collect();
    problem.space.integrate(&vals)
}

/// Incremental functional `E_k(t_i, z, u, Eu - p, p) + D_gamma(z, p - p_prev)` at an arbitrary competitor.
pub fn incremental_functional<T: Scalar>(
    problem: &Problem<T>,
    phase: &PhaseAtQuad<T>,
    i: usize,
    u: &[T],
    p: &[DevTensor<T>],
    p_prev: &[DevTensor<T>],
    gamma: Gamma<T>,
) -> T {
    let eps: Vec<SymTensor<T>> = problem.space.strains(u).iter().zip(p).map(|(e, q)| *e - q.into_sym()).collect();
    let s = StepState { u: u.to_vec(), eps, p: p.to_vec(), sigma: vec![] };
    stage_energy(problem, phase, &s, i) + dissipation(problem, phase, p, p_prev, gamma)
}

/// Per-node slack of the discrete energy inequality (right side minus left side).
///
/// Dissipation uses the density of `state.gamma`. The `C Ew . Ew` term carries
/// no factor 1/2, which keeps the bound valid.
pub fn energy_inequality_slack<T: Scalar>(problem: &Problem<T>, state: &EvolutionState<T>) -> Result<Vec<T>, EvolutionError> {
    let phase = problem.coefficients_at_quad(&state.z)?;
    let space = &problem.space;
    let k = state.num_steps();
    let mut slack = vec![T::zero()];
    let mut rhs = KahanSum::new();
    let mut diss = KahanSum::new();
    for j in 1..=k {
        let (prev, cur) = (&state.steps[j - 1], &state.steps[j]);
        let dw: Vec<T> = problem.steps[j].w.iter().zip(&problem.steps[j - 1].w).map(|(a, b)| *a - *b).collect();
        let edw = space.strains(&dw);
        let vals: Vec<T> = (0..space.num_quad())
            .map(|q| {
                let c = problem.law.at(phase.z_quad[q]);
                c.elasticity(&prev.eps[q]).dot(&edw[q]) + c.elasticity(&edw[q]).dot(&edw[q])
            })
            .collect();
        rhs.add(space.integrate(&vals));
        let ext_j = problem.external(&phase, j);
        let ext_prev = problem.external(&phase, j - 1);
        for d in 0..space.num_dofs() {
            rhs.add(-(ext_j[d] - ext_prev[d]) * prev.u[d]);
            rhs.add(-ext_j[d] * dw[d]);
        }
        diss.add(dissipation(problem, &phase, &cur.p, &prev.p, state.gamma));
        let lhs = state.energy[j] + diss.value();
        slack.push(rhs.value() - lhs);
    }
    Ok(slack)
}

/// Largest violation of the incremental stability inequality at node `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport<T> {
    /// `max(F(state) - F(competitor))`, positive values are violations.
    pub max_violation: T,
    /// Stored energy plus external work plus dissipation of the state.
    pub scale: T,
}

/// Compares the state at node `i` with random admissible competitors
/// `(u_i + du, eps_i + E du - dp, p_i + dp)`, `du = 0` on the Dirichlet part,
/// whose amplitudes range over four decades.
pub fn stability_check<T: Scalar, R: rand::Rng>(
    problem: &Problem<T>,
    state: &EvolutionState<T>,
    i: usize,
    samples: usize,
    rng: &mut R,
) -> Result<StabilityReport<T>, EvolutionError> {
    let phase = problem.coefficients_at_quad(&state.z)?;
    let space = &problem.space;
    let (cur, prev) = (&state.steps[i], &state.steps[i - 1]);
    let f0 = incremental_functional(problem, &phase, i, &cur.u, &cur.p, &prev.p, state.gamma);
    let work: T = problem.external(&phase, i).iter().zip(&cur.u).map(|(f, u)| *f * *u).sum();
    let scale = stored_energy(problem, &phase, &cur.eps, &cur.p) + work.abs() + dissipation(problem, &phase, &cur.p, &prev.p, state.gamma);
    let umax = cur.u.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let u_amp = if umax > T::zero() { umax } else { T::one() };
    let pmax = cur.p.iter().fold(T::zero(), |m, q| m.max(q.norm()));
    let yield_strain = problem.law.d.max() / (T::lit(2.0) * problem.law.mu.min());
    let p_amp = pmax.max(yield_strain);
    let mut worst = T::neg_infinity();
    for _ in 0..samples {
        let a = T::lit(10f64.powf(rng.gen_range(-4.0..0.0)));
        let mut u = cur.u.clone();
        for &d in space.free_dofs() {
            u[d] += a * u_amp * T::lit(rng.gen_range(-1.0..1.0));
        }
        let p: Vec<DevTensor<T>> = cur
            .p
            .iter()
            .map(|q| *q + SymTensor::from_upper(2, |_, _| a * p_amp * T::lit(rng.gen_range(-1.0..1.0))).dev_project())
            .collect();
        let f = incremental_functional(problem, &phase, i, &u, &p, &prev.p, state.gamma);
        worst = worst.max(f0 - f);
    }
    Ok(StabilityReport { max_violation: worst, scale })
}

/// Quadrature-weighted helpers for the product norms used by the studies.
pub mod norms {
    use super::*;

    /// `(int |u|^2 + |grad u|^2)^(1/2)`.
    pub fn h1<T: Scalar>(space: &FemSpace<T>, u: &[T]) -> T {
        let mut acc = KahanSum::new();
        for c in 0..space.mesh.num_cells() {
            let ue = space.gather(u, c);
            for p in space.quad.cell_points(c) {
                let mut v = [T::zero(); 2];
                let mut g = [[T::zero(); 2]; 2];
                for a in 0..4 {
                    for comp in 0..2 {
                        v[comp] += p.shape[a] * ue[2 * a + comp];
                        g[comp][0] += p.grad[a][0] * ue[2 * a + comp];
                        g[comp][1] += p.grad[a][1] * ue[2 * a + comp];
                    }
                }
                let s = v[0] * v[0] + v[1] * v[1] + g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1];
                acc.add(p.wdet * s);
            }
        }
        acc.value().sqrt()
    }

    pub fn l2_sym<T: Scalar>(space: &FemSpace<T>, e: &[SymTensor<T>]) -> T {
        let v: Vec<T> = e.iter().map(SymTensor::norm_sq).collect();
        space.integrate(&v).sqrt()
    }

    pub fn l2_dev<T: Scalar>(space: &FemSpace<T>, p: &[DevTensor<T>]) -> T {
        let v: Vec<T> = p.iter().map(DevTensor::norm_sq).collect();
        space.integrate(&v).sqrt()
    }

    /// `||u||_H1 + ||eps||_2 + ||p||_2` of the difference of two step states.
    pub fn step_distance<T: Scalar>(space: &FemSpace<T>, a: &StepState<T>, b: &StepState<T>) -> T {
        let du: Vec<T> = a.u.iter().zip(&b.u).map(|(x, y)| *x - *y).collect();
        let de: Vec<SymTensor<T>> = a.eps.iter().zip(&b.eps).map(|(x, y)| *x - *y).collect();
        let dp: Vec<DevTensor<T>> = a.p.iter().zip(&b.p).map(|(x, y)| *x - *y).collect();
        h1(space, &du) + l2_sym(space, &de) + l2_dev(space, &dp)
    }

    /// Max over time nodes of [`step_distance`].
    pub fn trajectory_distance<T: Scalar>(space: &FemSpace<T>, a: &EvolutionState<T>, b: &EvolutionState<T>) -> T {
        a.steps.iter().zip(&b.steps).map(|(x, y)| step_distance(space, x, y)).fold(T::zero(), T::max)
    }
}

/// Quadrature index range of a cell, for per-cell reporting.
pub fn cell_quad_range(cell: usize) -> std::ops::Range<usize> {
    cell * QUAD_PER_CELL..(cell + 1) * QUAD_PER_CELL
}
