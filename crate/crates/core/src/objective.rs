//! Compliance target with Modica-Mortola penalty, its adjoint, the reduced
//! gradient and the forward sensitivity used to cross-check it.

use serde::Serialize;
use thiserror::Error;

use crate::dissipation::{grad_h_gamma, hess_h_gamma_apply, Gamma};
use crate::evolution::{solve_evolution, EvolutionError, EvolutionState, NewtonOptions, PhaseAtQuad, Problem};
use crate::fem::assembly::{assemble_linearized_system, stress_divergence, AssemblyError, PointData};
use crate::fem::linalg::{solve_spd, LinalgError};
use crate::fem::riesz::RieszMap;
use crate::fem::FemSpace;
use crate::scalar::{KahanSum, Scalar};
use crate::tensor::{DevTensor, SymTensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("state has {got} time nodes, problem grid has {expected}")]
    GridMismatch { got: usize, expected: usize },
    #[error("{0} needs a finite regularization parameter")]
    ExactGamma(&'static str),
    #[error("direction has {got} nodal values, mesh has {expected} nodes")]
    DirectionLength { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveBreakdown<T> {
    /// `int l(z) f_k . u_k`.
    pub terminal_body: T,
    /// `int g_k . u_k` over the Neumann boundary.
    pub terminal_traction: T,
    /// `sum_i int l(z) (f_{i+1} - f_i) . u_i`, entering with a minus sign.
    pub increment_body: T,
    /// `sum_i int (g_{i+1} - g_i) . u_i`, entering with a minus sign.
    pub increment_traction: T,
    pub modica_mortola: T,
    pub total: T,
    pub delta: T,
}

impl<T: Scalar> ObjectiveBreakdown<T> {
    pub fn compliance(&self) -> T {
        self.terminal_body + self.terminal_traction - self.increment_body - self.increment_traction
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let k: KahanSum<T> = a.iter().zip(b).map(|(x, y)| *x * *y).collect();
    k.value()
}

fn check_grid<T: Scalar>(problem: &Problem<T>, state: &EvolutionState<T>) -> Result<(), ObjectiveError> {
    let expected = problem.num_steps() + 1;
    if state.steps.len() != expected {
        return Err(ObjectiveError::GridMismatch { got: state.steps.len(), expected });
    }
    Ok(())
}

fn finite_gamma<T: Scalar>(gamma: Gamma<T>, what: &'static str) -> Result<T, ObjectiveError> {
    match gamma {
        Gamma::Finite(g) => Ok(g),
        Gamma::Exact => Err(ObjectiveError::ExactGamma(what)),
    }
}

/// Gradient of a nodal field at every quadrature point.
pub fn nodal_gradient<T: Scalar>(space: &FemSpace<T>, z: &[T]) -> Vec<[T; 2]> {
    let mut out = Vec::with_capacity(space.num_quad());
    for c in 0..space.mesh.num_cells() {
        let ze = space.gather_nodal(z, c);
        for p in space.quad.cell_points(c) {
            out.push(p.gradient(ze));
        }
    }
    out
}

/// `int delta/2 |grad z|^2 + z^2 (1 - z)^2 / (2 delta)`.
pub fn modica_mortola<T: Scalar>(space: &FemSpace<T>, z: &[T], delta: T) -> T {
    let zq = space.nodal_to_quad(z);
    let gq = nodal_gradient(space, z);
    let half = T::lit(0.5);
    let vals: Vec<T> = zq
        .iter()
        .zip(&gq)
        .map(|(&z, g)| {
            let w = z * (T::one() - z);
            half * delta * (g[0] * g[0] + g[1] * g[1]) + half * w * w / delta
        })
        .collect();
    space.integrate(&vals)
}

/// Nodal functional `int delta grad z . grad N_a + N_a (z(1-z)^2 - z^2(1-z)) / delta`.
pub fn modica_mortola_variation<T: Scalar>(space: &FemSpace<T>, z: &[T], delta: T) -> Vec<T> {
    let mut out = vec![T::zero(); space.mesh.num_nodes()];
    for c in 0..space.mesh.num_cells() {
        let nodes = space.mesh.cells[c];
        let ze = space.gather_nodal(z, c);
        for p in space.quad.cell_points(c) {
            let zq = p.interpolate(ze);
            let g = p.gradient(ze);
            let well = (zq * (T::one() - zq) * (T::one() - zq) - zq * zq * (T::one() - zq)) / delta;
            for a in 0..4 {
                out[nodes[a]] += p.wdet * (delta * (g[0] * p.grad[a][0] + g[1] * p.grad[a][1]) + well * p.shape[a]);
            }
        }
    }
    out
}

/// `J_{k,delta}(z, (u_i))` with its parts.
pub fn objective<T: Scalar>(problem: &Problem<T>, state: &EvolutionState<T>, delta: T) -> Result<ObjectiveBreakdown<T>, ObjectiveError> {
    check_grid(problem, state)?;
    let space = &problem.space;
    let phase = problem.coefficients_at_quad(&state.z)?;
    let k = problem.num_steps();
    let body = |i: usize| space.body_load(&phase.ell, &problem.steps[i].f_quad);
    let traction = |i: usize| space.traction_load(&problem.steps[i].g_facet);
    let terminal_body = dot(&body(k), &state.steps[k].u);
    let terminal_traction = dot(&traction(k), &state.steps[k].u);
    let mut inc_b = KahanSum::new();
    let mut inc_t = KahanSum::new();
    let (mut b_prev, mut t_prev) = (body(0), traction(0));
    for i in 0..k {
        let (b_next, t_next) = (body(i + 1), traction(i + 1));
        let u = &state.steps[i].u;
        for d in 0..u.len() {
            inc_b.add((b_next[d] - b_prev[d]) * u[d]);
            inc_t.add((t_next[d] - t_prev[d]) * u[d]);
        }
        (b_prev, t_prev) = (b_next, t_next);
    }
    let mm = modica_mortola(space, &state.z, delta);
    let (increment_body, increment_traction) = (inc_b.value(), inc_t.value());
    let total = terminal_body + terminal_traction - increment_body - increment_traction + mm;
    Ok(ObjectiveBreakdown { terminal_body, terminal_traction, increment_body, increment_traction, modica_mortola: mm, total, delta })
}

/// Solves the state and evaluates the target.
pub fn evaluate<T: Scalar>(
    problem: &Problem<T>,
    z: &[T],
    gamma: Gamma<T>,
    delta: T,
    warm: Option<&EvolutionState<T>>,
    opts: &NewtonOptions,
) -> Result<(ObjectiveBreakdown<T>, EvolutionState<T>), ObjectiveError> {
    let state = solve_evolution(problem, z, gamma, warm, opts)?;
    Ok((objective(problem, &state, delta)?, state))
}

/// `d(z) Hess h_gamma(p_i - p_{i-1}) x` at every point.
fn hessian_source<T: Scalar>(problem: &Problem<T>, phase: &PhaseAtQuad<T>, gamma: T, p: &[DevTensor<T>], p_prev: &[DevTensor<T>], x: &[DevTensor<T>]) -> Vec<DevTensor<T>> {
    (0..p.len())
        .map(|q| hess_h_gamma_apply(&(p[q] - p_prev[q]), gamma, &x[q]).scale(problem.law.d.eval(phase.z_quad[q])))
        .collect()
}

/// Backward multipliers, indexed `1..=k+1` (index 0 unused and zero).
#[derive(Debug, Clone)]
pub struct AdjointState<T> {
    pub ubar: Vec<Vec<T>>,
    pub epsbar: Vec<Vec<SymTensor<T>>>,
    pub pbar: Vec<Vec<DevTensor<T>>>,
    /// `dev(C eps_i) - h p_i`, equal to `d grad h_gamma(p_i - p_{i-1})`.
    pub rho: Vec<Vec<DevTensor<T>>>,
    /// `dev(C epsbar_i) - h pbar_i`.
    pub pi: Vec<Vec<DevTensor<T>>>,
}

impl<T: Scalar> AdjointState<T> {
    pub fn num_steps(&self) -> usize {
        self.ubar.len() - 2
    }

    /// `max_i (||ubar_i||_H1 + ||epsbar_i||_2 + ||pbar_i||_2)`.
    pub fn max_norm(&self, space: &FemSpace<T>) -> T {
        use crate::evolution::norms::{h1, l2_dev, l2_sym};
        (1..=self.num_steps())
            .map(|i| h1(space, &self.ubar[i]) + l2_sym(space, &self.epsbar[i]) + l2_dev(space, &self.pbar[i]))
            .fold(T::zero(), T::max)
    }
}

/// Backward recursion from `i = k` to `1` with zero terminal data.
///
/// Step `i` uses the condensed tangent at the converged state `i`, the load
/// `L_i` and the source `d Hess h_gamma(p_i - p_{i-1}) pbar_{i+1}`.
pub fn solve_adjoint<T: Scalar>(problem: &Problem<T>, state: &EvolutionState<T>) -> Result<AdjointState<T>, ObjectiveError> {
    check_grid(problem, state)?;
    let gamma = finite_gamma(state.gamma, "the adjoint")?;
    let space = &problem.space;
    let phase = problem.coefficients_at_quad(&state.z)?;
    let k = problem.num_steps();
    let nq = space.num_quad();
    let zero_dev = vec![DevTensor::zeros(2); nq];
    let mut adj = AdjointState {
        ubar: vec![vec![T::zero(); space.num_dofs()]; k + 2],
        epsbar: vec![vec![SymTensor::zeros(2); nq]; k + 2],
        pbar: vec![zero_dev.clone(); k + 2],
        rho: vec![zero_dev.clone(); k + 2],
        pi: vec![zero_dev.clone(); k + 2],
    };
    for i in (1..=k).rev() {
        let load = problem.external(&phase, i);
        let source = hessian_source(problem, &phase, gamma, &state.steps[i].p, &state.steps[i - 1].p, &adj.pbar[i + 1]);
        let data = PointData { law: &problem.law, z_quad: &phase.z_quad, p_prev: &state.steps[i - 1].p, gamma: state.gamma };
        let sys = assemble_linearized_system(space, data, &state.steps[i].p, &load, &source)?;
        let free = solve_spd(sys.matrix.clone(), &sys.rhs)?;
        let ubar = space.extend(&free, &vec![T::zero(); space.num_dofs()]);
        let pbar = sys.recover_plastic(space, &ubar);
        let epsbar: Vec<SymTensor<T>> = space.strains(&ubar).iter().zip(&pbar).map(|(e, q)| *e - q.into_sym()).collect();
        let st = &state.steps[i];
        for q in 0..nq {
            let c = problem.law.at(phase.z_quad[q]);
            adj.rho[i][q] = c.elasticity(&st.eps[q]).dev_project() - st.p[q].scale(c.h);
            adj.pi[i][q] = c.elasticity(&epsbar[q]).dev_project() - pbar[q].scale(c.h);
        }
        adj.ubar[i] = ubar;
        adj.pbar[i] = pbar;
        adj.epsbar[i] = epsbar;
    }
    Ok(adj)
}

#[derive(Debug, Clone)]
pub struct ReducedGradient<T> {
    /// `G(N_a)` for every node.
    pub functional: Vec<T>,
    /// H1 representer of `functional`.
    pub riesz: Vec<T>,
    /// `G(riesz)^(1/2)`, the dual norm of the functional.
    pub norm: T,
}

/// Which form of the dissipation term to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DissipationTerm {
    /// `d'(z) (grad h_gamma(p_j - p_{j-1}) - grad h_gamma(p_{j-1} - p_{j-2})) . pbar_j`.
    Gradient,
    /// `(d'(z) / d(z)) (rho_j - rho_{j-1}) . pbar_j`.
    Multiplier,
}

/// Quadrature density of the state-dependent part of `G`, so that
/// `G(phi) = int phi * density + MM'(z)[phi]`.
///
/// Step `j` contributes `l'(f_j - f_{j-1}) . ubar_j + l' f_j . (u_j - u_{j-1})`
/// minus the increments of `eps`, `p` and `grad h_gamma` paired with the
/// coefficient derivatives and the adjoint.
pub fn gradient_density<T: Scalar>(
    problem: &Problem<T>,
    state: &EvolutionState<T>,
    adjoint: &AdjointState<T>,
    form: DissipationTerm,
) -> Result<Vec<T>, ObjectiveError> {
    check_grid(problem, state)?;
    let gamma = finite_gamma(state.gamma, "the reduced gradient")?;
    let space = &problem.space;
    let phase = problem.coefficients_at_quad(&state.z)?;
    let k = problem.num_steps();
    let nq = space.num_quad();
    let two = T::lit(2.0);
    let mut density = vec![T::zero(); nq];
    let mut u_prev_q = space.vector_to_quad(&state.steps[0].u);
    let mut last = vec![DevTensor::zeros(2); nq];
    for j in 1..=k {
        let st = &state.steps[j];
        let prev = &state.steps[j - 1];
        let u_q = space.vector_to_quad(&st.u);
        let ubar_q = space.vector_to_quad(&adjoint.ubar[j]);
        let (f, f_prev) = (&problem.steps[j].f_quad, &problem.steps[j - 1].f_quad);
        for q in 0..nq {
            let z = phase.z_quad[q];
            let s = problem.law.slope_at(z);
            let de = st.eps[q] - prev.eps[q];
            let eb = &adjoint.epsbar[j][q];
            let pb = &adjoint.pbar[j][q];
            let load = s.ell
                * ((f[q][0] - f_prev[q][0]) * ubar_q[q][0]
                    + (f[q][1] - f_prev[q][1]) * ubar_q[q][1]
                    + f[q][0] * (u_q[q][0] - u_prev_q[q][0])
                    + f[q][1] * (u_q[q][1] - u_prev_q[q][1]));
            let elastic = two * s.mu * de.dot(eb) + s.lambda * de.trace() * eb.trace();
            let hardening = s.h * (st.p[q] - prev.p[q]).dot(pb);
            let now = match form {
                DissipationTerm::Gradient => grad_h_gamma(&(st.p[q] - prev.p[q]), gamma).scale(s.d),
                DissipationTerm::Multiplier => adjoint.rho[j][q].scale(s.d / problem.law.d.eval(z)),
            };
            let diss = (now - last[q]).dot(pb);
            last[q] = now;
            density[q] += load - elastic - hardening - diss;
        }
        u_prev_q = u_q;
    }
    Ok(density)
}

/// `G(N_a)` for every node.
pub fn gradient_functional<T: Scalar>(
    problem: &Problem<T>,
    state: &EvolutionState<T>,
    adjoint: &AdjointState<T>,
    delta: T,
    form: DissipationTerm,
) -> Result<Vec<T>, ObjectiveError> {
    let density = gradient_density(problem, state, adjoint, form)?;
    let mut g = problem.space.scalar_functional(&density);
    for (a, b) in g.iter_mut().zip(modica_mortola_variation(&problem.space, &state.z, delta)) {
        *a += b;
    }
    Ok(g)
}

/// Reduced gradient with its H1 representer for the inner product
/// `(delta grad a, grad b) + (a, b)`.
pub fn reduced_gradient<T: Scalar>(
    problem: &Problem<T>,
    state: &EvolutionState<T>,
    adjoint: &AdjointState<T>,
    riesz: &RieszMap<T>,
) -> Result<ReducedGradient<T>, ObjectiveError> {
    let functional = gradient_functional(problem, state, adjoint, riesz.delta, DissipationTerm::Gradient)?;
    let rep = riesz.solve(&functional)?;
    let norm = dot(&functional, &rep).max(T::zero()).sqrt();
    Ok(ReducedGradient { functional, riesz: rep, norm })
}

/// Derivative of the trajectory in direction `phi`, indexed `0..=k`.
#[derive(Debug, Clone)]
pub struct Sensitivity<T> {
    pub v: Vec<Vec<T>>,
    pub eta: Vec<Vec<SymTensor<T>>>,
    pub q: Vec<Vec<DevTensor<T>>>,
    /// Directional derivative of the target.
    pub dj: T,
}

/// Forward recursion for the derivative of the control-to-state map.
pub fn solve_forward_sensitivity<T: Scalar>(
    problem: &Problem<T>,
    state: &EvolutionState<T>,
    phi: &[T],
    delta: T,
) -> Result<Sensitivity<T>, ObjectiveError> {
    check_grid(problem, state)?;
    let gamma = finite_gamma(state.gamma, "the forward sensitivity")?;
    let space = &problem.space;
    if phi.len() != space.mesh.num_nodes() {
        return Err(ObjectiveError::DirectionLength { got: phi.len(), expected: space.mesh.num_nodes() });
    }
    let phase = problem.coefficients_at_quad(&state.z)?;
    let k = problem.num_steps();
    let nq = space.num_quad();
    let phi_q = space.nodal_to_quad(phi);
    let slopes: Vec<_> = phase.z_quad.iter().map(|&z| problem.law.slope_at(z)).collect();
    let dell: Vec<T> = (0..nq).map(|q| phi_q[q] * slopes[q].ell).collect();
    let two = T::lit(2.0);

    let mut sens = Sensitivity {
        v: vec![vec![T::zero(); space.num_dofs()]],
        eta: vec![vec![SymTensor::zeros(2); nq]],
        q: vec![vec![DevTensor::zeros(2); nq]],
        dj: T::zero(),
    };
    for i in 1..=k {
        let st = &state.steps[i];
        let prev = &state.steps[i - 1];
        let coupled = hessian_source(problem, &phase, gamma, &st.p, &prev.p, &sens.q[i - 1]);
        let mut source = Vec::with_capacity(nq);
        let mut c_eps = Vec::with_capacity(nq);
        for q in 0..nq {
            let s = &slopes[q];
            let e = &st.eps[q];
            let dp = st.p[q] - prev.p[q];
            let src = coupled[q]
                .axpy(two * s.mu * phi_q[q], &e.dev_project())
                .axpy(-s.h * phi_q[q], &st.p[q])
                .axpy(-phi_q[q] * s.d, &grad_h_gamma(&dp, gamma));
            source.push(src);
            c_eps.push(e.scale(two * s.mu * phi_q[q]).axpy(s.lambda * phi_q[q] * e.trace(), &SymTensor::identity(2)));
        }
        let mut load = space.body_load(&dell, &problem.steps[i].f_quad);
        for (l, d) in load.iter_mut().zip(stress_divergence(space, &c_eps)) {
            *l -= d;
        }
        let data = PointData { law: &problem.law, z_quad: &phase.z_quad, p_prev: &prev.p, gamma: state.gamma };
        let sys = assemble_linearized_system(space, data, &st.p, &load, &source)?;
        let free = solve_spd(sys.matrix.clone(), &sys.rhs)?;
        let v = space.extend(&free, &vec![T::zero(); space.num_dofs()]);
        let qv = sys.recover_plastic(space, &v);
        let eta = space.strains(&v).iter().zip(&qv).map(|(e, q)| *e - q.into_sym()).collect();
        sens.v.push(v);
        sens.q.push(qv);
        sens.eta.push(eta);
    }

    let body_dell = |i: usize| space.body_load(&dell, &problem.steps[i].f_quad);
    let mut dj = KahanSum::new();
    dj.add(dot(&body_dell(k), &state.steps[k].u));
    dj.add(dot(&problem.external(&phase, k), &sens.v[k]));
    for j in 1..=k {
        let (bj, bp) = (body_dell(j), body_dell(j - 1));
        let (ej, ep) = (problem.external(&phase, j), problem.external(&phase, j - 1));
        let (u, v) = (&state.steps[j - 1].u, &sens.v[j - 1]);
        for d in 0..u.len() {
            dj.add(-(bj[d] - bp[d]) * u[d]);
            dj.add(-(ej[d] - ep[d]) * v[d]);
        }
    }
    dj.add(dot(&modica_mortola_variation(space, &state.z, delta), phi));
    sens.dj = dj.value();
    Ok(sens)
}

/// Pointwise residuals of the limit optimality system, aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalityResiduals<T> {
    /// `rho_i . (p_i - p_{i-1}) - d |p_i - p_{i-1}|`.
    pub flow_l1: T,
    pub flow_linf: T,
    /// `pi_i . (p_i - p_{i-1})`.
    pub orthogonality_l1: T,
    pub orthogonality_linf: T,
    /// `pbar_i - pbar_{i+1}` where `|rho_i| < (1 - margin) d`.
    pub elastic_l1: T,
    pub elastic_linf: T,
}

/// Margin used to select the strictly elastic set in [`optimality_residuals`].
pub const ELASTIC_MARGIN: f64 = 0.05;

pub fn optimality_residuals<T: Scalar>(
    problem: &Problem<T>,
    state: &EvolutionState<T>,
    adjoint: &AdjointState<T>,
) -> Result<OptimalityResiduals<T>, ObjectiveError> {
    check_grid(problem, state)?;
    let space = &problem.space;
    let phase = problem.coefficients_at_quad(&state.z)?;
    let k = problem.num_steps();
    let nq = space.num_quad();
    let margin = T::one() - T::lit(ELASTIC_MARGIN);
    let (mut r1, mut r2, mut r3) = (vec![T::zero(); nq], vec![T::zero(); nq], vec![T::zero(); nq]);
    let (mut m1, mut m2, mut m3) = (T::zero(), T::zero(), T::zero());
    for i in 1..=k {
        for q in 0..nq {
            let d = problem.law.d.eval(phase.z_quad[q]);
            let dp = state.steps[i].p[q] - state.steps[i - 1].p[q];
            let a = (adjoint.rho[i][q].dot(&dp) - d * dp.norm()).abs();
            let b = adjoint.pi[i][q].dot(&dp).abs();
            let c = if adjoint.rho[i][q].norm() < margin * d { (adjoint.pbar[i][q] - adjoint.pbar[i + 1][q]).norm() } else { T::zero() };
            r1[q] += a;
            r2[q] += b;
            r3[q] += c;
            m1 = m1.max(a);
            m2 = m2.max(b);
            m3 = m3.max(c);
        }
    }
    Ok(OptimalityResiduals {
        flow_l1: space.integrate(&r1),
        flow_linf: m1,
        orthogonality_l1: space.integrate(&r2),
        orthogonality_linf: m2,
        elastic_l1: space.integrate(&r3),
        elastic_linf: m3,
    })
}
