//! Reduced-space descent on the phase field with Armijo backtracking along
//! the negative H1 gradient, and continuation in the regularization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dissipation::Gamma;
use crate::evolution::{solve_evolution, EvolutionState, NewtonOptions, Problem};
use crate::fem::riesz::RieszMap;
use crate::objective::{
    evaluate, objective, reduced_gradient, solve_adjoint, AdjointState, ObjectiveBreakdown, ObjectiveError, ReducedGradient,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("invalid optimizer configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("initial phase field contains non-finite values")]
    NonFiniteStart,
}

/// Quadratic penalty `weight/2 (int z - fraction |Omega|)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumePenalty {
    pub weight: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_outer_iters: usize,
    pub armijo_c1: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub shrink: f64,
    pub grow: f64,
    pub max_backtracks: usize,
    /// Stop once the dual H1 norm of the gradient functional drops below this.
    pub grad_tol: f64,
    /// Stop once the relative decrease of J over one accepted step drops below this.
    pub stall_tol: f64,
    /// Use the Barzilai-Borwein step as the first trial when available.
    pub barzilai_borwein: bool,
    /// Increasing finite values of gamma.
    pub gamma_schedule: Vec<f64>,
    pub delta: f64,
    pub clamp: bool,
    pub volume_penalty: Option<VolumePenalty>,
    pub newton: NewtonOptions,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 100,
            armijo_c1: 1e-4,
            initial_step: 1.0,
            max_step: 1e4,
            shrink: 0.5,
            grow: 2.0,
            max_backtracks: 40,
            grad_tol: 1e-6,
            stall_tol: 0.0,
            barzilai_borwein: true,
            gamma_schedule: vec![100.0],
            delta: 0.1,
            clamp: false,
            volume_penalty: None,
            newton: NewtonOptions::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let pos = |name: &str, x: f64, v: &mut Vec<String>| {
            if !(x.is_finite() && x > 0.0) {
                v.push(format!("{name} = {x} must be finite and positive"));
            }
        };
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            v.push(format!("armijo_c1 = {} must lie in (0, 1)", self.armijo_c1));
        }
        pos("initial_step", self.initial_step, &mut v);
        pos("max_step", self.max_step, &mut v);
        pos("delta", self.delta, &mut v);
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            v.push(format!("shrink = {} must lie in (0, 1)", self.shrink));
        }
        if !(self.grow >= 1.0 && self.grow.is_finite()) {
            v.push(format!("grow = {} must be at least 1", self.grow));
        }
        if !(self.grad_tol >= 0.0) || !(self.stall_tol >= 0.0) {
            v.push("tolerances must be non-negative".into());
        }
        if self.gamma_schedule.is_empty() {
            v.push("gamma_schedule must not be empty".into());
        }
        for g in &self.gamma_schedule {
            pos("gamma_schedule entry", *g, &mut v);
        }
        if self.gamma_schedule.windows(2).any(|w| w[1] <= w[0]) {
            v.push("gamma_schedule must be strictly increasing".into());
        }
        if let Some(p) = &self.volume_penalty {
            pos("volume_penalty.weight", p.weight, &mut v);
            if !(0.0..=1.0).contains(&p.fraction) {
                v.push(format!("volume_penalty.fraction = {} must lie in [0, 1]", p.fraction));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        let v = self.violations();
        if v.is_empty() { Ok(()) } else { Err(OptimizerError::Config(v)) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub gamma: f64,
    /// Objective including any volume penalty.
    pub j: f64,
    pub breakdown: ObjectiveBreakdown<f64>,
    pub penalty: f64,
    pub grad_norm: f64,
    /// Step accepted to reach this iterate (0 for the first).
    pub step: f64,
    pub backtracks: usize,
    pub z_min: f64,
    pub z_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OptimizationTrace {
    pub entries: Vec<TraceEntry>,
}

impl OptimizationTrace {
    /// J is non-increasing along accepted steps.
    pub fn is_monotone(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].j <= w[0].j || w[1].gamma != w[0].gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    Stalled,
    IterationCap,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult<T> {
    pub z: Vec<T>,
    pub gamma: T,
    pub breakdown: ObjectiveBreakdown<T>,
    pub penalty: T,
    pub state: EvolutionState<T>,
    pub adjoint: AdjointState<T>,
    pub gradient: ReducedGradient<T>,
    pub trace: OptimizationTrace,
    pub stop: StopReason,
}

struct Iterate<T> {
    z: Vec<T>,
    breakdown: ObjectiveBreakdown<T>,
    penalty: T,
    state: EvolutionState<T>,
}

impl<T: Scalar> Iterate<T> {
    fn j(&self) -> T {
        self.breakdown.total + self.penalty
    }
}

fn volume_terms<T: Scalar>(problem: &Problem<T>, z: &[T], pen: Option<&VolumePenalty>) -> (T, Option<(T, Vec<T>)>) {
    let Some(p) = pen else { return (T::zero(), None) };
    let space = &problem.space;
    let vol = space.integrate(&space.nodal_to_quad(z));
    let excess = vol - T::lit(p.fraction) * space.mesh.area();
    let w = T::lit(p.weight);
    let mass = space.scalar_functional(&vec![T::one(); space.num_quad()]);
    (T::lit(0.5) * w * excess * excess, Some((w * excess, mass)))
}

fn gradient_at<T: Scalar>(
    problem: &Problem<T>,
    it: &Iterate<T>,
    riesz: &RieszMap<T>,
    pen: Option<&VolumePenalty>,
) -> Result<(AdjointState<T>, ReducedGradient<T>), OptimizerError> {
    let adjoint = solve_adjoint(problem, &it.state)?;
    let mut g = reduced_gradient(problem, &it.state, &adjoint, riesz)?;
    if let (_, Some((coef, mass))) = volume_terms(problem, &it.z, pen) {
        for (a, m) in g.functional.iter_mut().zip(&mass) {
            *a += coef * *m;
        }
        g.riesz = riesz.solve(&g.functional).map_err(ObjectiveError::from)?;
        g.norm = g.functional.iter().zip(&g.riesz).map(|(a, b)| *a * *b).sum::<T>().max(T::zero()).sqrt();
    }
    Ok((adjoint, g))
}

fn entry<T: Scalar>(iter: usize, gamma: T, it: &Iterate<T>, g: &ReducedGradient<T>, step: T, backtracks: usize) -> TraceEntry {
    let f = |x: T| x.to_f64_lossy();
    let b = &it.breakdown;
    TraceEntry {
        iter,
        gamma: f(gamma),
        j: f(it.j()),
        breakdown: ObjectiveBreakdown {
            terminal_body: f(b.terminal_body),
            terminal_traction: f(b.terminal_traction),
            increment_body: f(b.increment_body),
            increment_traction: f(b.increment_traction),
            modica_mortola: f(b.modica_mortola),
            total: f(b.total),
            delta: f(b.delta),
        },
        penalty: f(it.penalty),
        grad_norm: f(g.norm),
        step: f(step),
        backtracks,
        z_min: f(it.z.iter().copied().fold(T::infinity(), T::min)),
        z_max: f(it.z.iter().copied().fold(T::neg_infinity(), T::max)),
    }
}

/// Descent at a single finite `gamma`, optionally warm-started from a state.
pub fn optimize<T: Scalar>(
    problem: &Problem<T>,
    z0: &[T],
    gamma: T,
    cfg: &OptimizerConfig,
    warm: Option<&EvolutionState<T>>,
) -> Result<OptimizationResult<T>, OptimizerError> {
    cfg.validate()?;
    if !z0.iter().all(|x| x.is_finite()) {
        return Err(OptimizerError::NonFiniteStart);
    }
    let delta = T::lit(cfg.delta);
    let g_reg = Gamma::new(gamma).map_err(|e| OptimizerError::Config(vec![e.to_string()]))?;
    let pen = cfg.volume_penalty.as_ref();
    let riesz = RieszMap::new(&problem.space, delta).map_err(ObjectiveError::from)?;
    let eval = |z: Vec<T>, warm: Option<&EvolutionState<T>>| -> Result<Iterate<T>, ObjectiveError> {
        let (breakdown, state) = evaluate(problem, &z, g_reg, delta, warm, &cfg.newton)?;
        let (penalty, _) = volume_terms(problem, &z, pen);
        Ok(Iterate { z, breakdown, penalty, state })
    };

    let mut cur = eval(z0.to_vec(), warm)?;
    let (mut adjoint, mut grad) = gradient_at(problem, &cur, &riesz, pen)?;
    let mut trace = OptimizationTrace { entries: vec![entry(0, gamma, &cur, &grad, T::zero(), 0)] };
    let mut step = T::lit(cfg.initial_step);
    let max_step = T::lit(cfg.max_step);
    let c1 = T::lit(cfg.armijo_c1);
    let mut stop = StopReason::IterationCap;

    for iter in 1..=cfg.max_outer_iters {
        if grad.norm <= T::lit(cfg.grad_tol) {
            stop = StopReason::GradientTolerance;
            break;
        }
        let mut s = step.min(max_step);
        let mut accepted = None;
        let mut backtracks = 0;
        for _ in 0..=cfg.max_backtracks {
            let mut z: Vec<T> = cur.z.iter().zip(&grad.riesz).map(|(a, g)| *a - s * *g).collect();
            if cfg.clamp {
                z.iter_mut().for_each(|x| *x = x.max(T::zero()).min(T::one()));
            }
            // predicted decrease G(z_cur - z) equals s |grad|^2 without clamping
            let moved: T = cur.z.iter().zip(&z).zip(&grad.functional).map(|((a, b), g)| (*a - *b) * *g).sum();
            if let Ok(trial) = eval(z, Some(&cur.state)) {
                if trial.j() <= cur.j() - c1 * moved && trial.j().is_finite() {
                    accepted = Some(trial);
                    break;
                }
            }
            backtracks += 1;
            s *= T::lit(cfg.shrink);
        }
        let Some(next) = accepted else {
            stop = StopReason::LineSearchFailed;
            break;
        };
        let (adj_next, grad_next) = gradient_at(problem, &next, &riesz, pen)?;
        let decrease = cur.j() - next.j();
        let scale = cur.j().abs().max(T::epsilon());
        step = if cfg.barzilai_borwein {
            // H1 Barzilai-Borwein: (dz, dz)_H / (dz, dG) with dG the functional difference
            let dz: Vec<T> = next.z.iter().zip(&cur.z).map(|(a, b)| *a - *b).collect();
            let dg: T = dz.iter().zip(grad_next.functional.iter().zip(&grad.functional)).map(|(d, (a, b))| *d * (*a - *b)).sum();
            let dzz = riesz.inner(&dz, &dz);
            if dg > T::zero() { (dzz / dg).min(max_step) } else { (s * T::lit(cfg.grow)).min(max_step) }
        } else if backtracks == 0 {
            (s * T::lit(cfg.grow)).min(max_step)
        } else {
            s
        };
        trace.entries.push(entry(iter, gamma, &next, &grad_next, s, backtracks));
        cur = next;
        adjoint = adj_next;
        grad = grad_next;
        if decrease <= T::lit(cfg.stall_tol) * scale {
            stop = StopReason::Stalled;
            break;
        }
    }
    if stop == StopReason::IterationCap && grad.norm <= T::lit(cfg.grad_tol) {
        stop = StopReason::GradientTolerance;
    }
    Ok(OptimizationResult {
        z: cur.z,
        gamma,
        breakdown: cur.breakdown,
        penalty: cur.penalty,
        state: cur.state,
        adjoint,
        gradient: grad,
        trace,
        stop,
    })
}

#[derive(Debug, Clone)]
pub struct ContinuationStage<T> {
    pub result: OptimizationResult<T>,
    /// `||z_gamma - z_previous||_H1`, absent for the first stage.
    pub dz_h1: Option<T>,
}

#[derive(Debug, Clone)]
pub struct ContinuationResult<T> {
    pub stages: Vec<ContinuationStage<T>>,
    /// Target at the final design with the state re-solved for the exact model.
    pub exact_objective: ObjectiveBreakdown<T>,
}

/// Warm-started [`optimize`] over `cfg.gamma_schedule`.
pub fn gamma_continuation<T: Scalar>(problem: &Problem<T>, z0: &[T], cfg: &OptimizerConfig) -> Result<ContinuationResult<T>, OptimizerError> {
    cfg.validate()?;
    let riesz = RieszMap::new(&problem.space, T::lit(cfg.delta)).map_err(ObjectiveError::from)?;
    let mut stages: Vec<ContinuationStage<T>> = Vec::new();
    let mut z = z0.to_vec();
    for &g in &cfg.gamma_schedule {
        let warm = stages.last().map(|s| &s.result.state);
        let result = optimize(problem, &z, T::lit(g), cfg, warm)?;
        let dz_h1 = stages.last().map(|_| {
            let d: Vec<T> = result.z.iter().zip(&z).map(|(a, b)| *a - *b).collect();
            riesz.norm(&d)
        });
        z = result.z.clone();
        stages.push(ContinuationStage { result, dz_h1 });
    }
    let last = &stages.last().expect("non-empty schedule").result;
    let exact = solve_evolution(problem, &last.z, Gamma::Exact, Some(&last.state), &cfg.newton).map_err(ObjectiveError::from)?;
    let exact_objective = objective(problem, &exact, T::lit(cfg.delta))?;
    Ok(ContinuationResult { stages, exact_objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{FacetTag, FemSpace, LoadProgram, Mesh, Side, TagRule, TimeGrid};
    use crate::material::MaterialLaw;

    fn problem(loads: LoadProgram<f64>, k: usize) -> Problem<f64> {
        let rules = [
            TagRule::whole(Side::Left, FacetTag::Dirichlet),
            TagRule { side: Side::Right, from: 0.25, to: 0.75, tag: FacetTag::Neumann },
        ];
        let space = FemSpace::new(Mesh::rect(4, 2, 2.0, 1.0, &rules).unwrap());
        let law = MaterialLaw::ersatz([1.0, 1.0, 0.1, 0.05, 1.0], 1e-3).unwrap();
        Problem::new(space, law, loads, TimeGrid::new(k, 1.0))
    }

    #[test]
    fn config_violations_are_all_listed() {
        let cfg = OptimizerConfig { armijo_c1: 2.0, delta: -1.0, gamma_schedule: vec![10.0, 5.0], ..Default::default() };
        let v = cfg.violations();
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(OptimizerConfig::default().validate().is_ok());
    }

    #[test]
    fn penalty_only_descent_is_monotone() {
        let p = problem(LoadProgram::zero(1.0), 2);
        let n = p.space.mesh.num_nodes();
        let z0: Vec<f64> = p.space.mesh.nodes.iter().map(|x| 0.5 + 0.2 * (3.0 * x[0]).sin() * x[1]).collect();
        let cfg = OptimizerConfig { max_outer_iters: 40, delta: 0.2, ..Default::default() };
        let r = optimize(&p, &z0, 100.0, &cfg, None).unwrap();
        assert!(r.trace.is_monotone());
        assert!(r.trace.entries.last().unwrap().j < r.trace.entries[0].j);
        assert_eq!(r.breakdown.total, r.breakdown.modica_mortola);
        assert_eq!(r.z.len(), n);
        assert!(r.z.iter().all(|z| *z > -1e-3 && *z < 1.0 + 1e-3));
    }

    #[test]
    fn armijo_condition_holds_on_every_accepted_step() {
        let p = problem(LoadProgram::ramped_traction([0.0, -0.03], 1.0), 2);
        let z0 = vec![0.6; p.space.mesh.num_nodes()];
        let cfg = OptimizerConfig { max_outer_iters: 5, barzilai_borwein: false, ..Default::default() };
        let r = optimize(&p, &z0, 100.0, &cfg, None).unwrap();
        for w in r.trace.entries.windows(2) {
            let bound = w[0].j - cfg.armijo_c1 * w[1].step * w[0].grad_norm * w[0].grad_norm;
            assert!(w[1].j <= bound + 1e-15, "{} > {}", w[1].j, bound);
        }
    }

    #[test]
    fn volume_penalty_gradient_is_consistent() {
        let p = problem(LoadProgram::zero(1.0), 1);
        let z: Vec<f64> = (0..p.space.mesh.num_nodes()).map(|i| 0.3 + 0.02 * i as f64).collect();
        let pen = VolumePenalty { weight: 3.0, fraction: 0.4 };
        let (_, Some((coef, mass))) = volume_terms(&p, &z, Some(&pen)) else { panic!() };
        let t = 1e-6;
        for a in [0, 5, 9] {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[a] += t;
            zm[a] -= t;
            let fd = (volume_terms(&p, &zp, Some(&pen)).0 - volume_terms(&p, &zm, Some(&pen)).0) / (2.0 * t);
            assert!((fd - coef * mass[a]).abs() < 1e-8);
        }
    }

    #[test]
    fn single_stage_continuation_is_plain_optimize() {
        let p = problem(LoadProgram::ramped_traction([0.0, -0.02], 1.0), 1);
        let z0 = vec![0.7; p.space.mesh.num_nodes()];
        let cfg = OptimizerConfig { max_outer_iters: 3, ..Default::default() };
        let c = gamma_continuation(&p, &z0, &cfg).unwrap();
        let o = optimize(&p, &z0, 100.0, &cfg, None).unwrap();
        assert_eq!(c.stages.len(), 1);
        assert!(c.stages[0].dz_h1.is_none());
        for (a, b) in c.stages[0].result.z.iter().zip(&o.z) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
