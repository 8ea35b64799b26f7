//! Numerical studies: limits in gamma, tau and delta, adjoint bounds and
//! Lipschitz dependence on the design. Every study returns a [`Table`].

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dissipation::Gamma;
use crate::evolution::norms::{h1, l2_dev, l2_sym, trajectory_distance};
use crate::evolution::{energy_inequality_slack, solve_evolution, EvolutionError, EvolutionState, NewtonOptions, Problem};
use crate::fem::{FemSpace, Table, TimeGrid};
use crate::objective::{solve_adjoint, ObjectiveError};
use crate::optimizer::{optimize, OptimizerConfig, OptimizerError};
use crate::scalar::Scalar;
use crate::tensor::{DevTensor, SymTensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("{0}")]
    Setup(String),
}

fn f<T: Scalar>(x: T) -> f64 {
    x.to_f64_lossy()
}

/// Distance of each regularized trajectory to the exact one.
///
/// One row per gamma. Columns: `gamma`, `distance_to_exact` (max over time
/// nodes of `||u||_H1 + ||eps||_2 + ||p||_2`), `total_dissipation`,
/// `exact_dissipation`, `newton_iterations`.
pub fn gamma_sweep<T: Scalar>(problem: &Problem<T>, z: &[T], gammas: &[T], opts: &NewtonOptions) -> Result<Table, LabError> {
    let exact = solve_evolution(problem, z, Gamma::Exact, None, opts)?;
    let runs: Vec<Result<EvolutionState<T>, EvolutionError>> =
        gammas.par_iter().map(|&g| solve_evolution(problem, z, Gamma::Finite(g), None, opts)).collect();
    let mut t = Table::new("gamma_sweep", &["gamma", "distance_to_exact", "total_dissipation", "exact_dissipation", "newton_iterations"]);
    let exact_diss = f(exact.total_dissipation());
    for (g, run) in gammas.iter().zip(runs) {
        let s = run?;
        let its: usize = s.newton.iter().map(|n| n.iterations).sum();
        t.push(vec![f(*g), f(trajectory_distance(&problem.space, &s, &exact)), f(s.total_dissipation()), exact_diss, its as f64]);
    }
    Ok(t)
}

/// Sums `sqrt(int_0^T ||e||^2 + ||e'||^2)` over the three state components for
/// the difference of two piecewise-affine interpolants sampled on a common
/// grid with spacing `tau`.
fn h1_in_time<T: Scalar>(tau: T, samples: &[T], sums: &[T]) -> T {
    // samples[j] = ||e_j||^2, sums[j] = ||e_j + e_{j+1}||^2
    let mut l2 = T::zero();
    let mut dot = T::zero();
    for j in 0..samples.len() - 1 {
        let (a, b, ab) = (samples[j], samples[j + 1], sums[j]);
        l2 += tau * (a + b + ab) / T::lit(6.0);
        // ||e_{j+1} - e_j||^2 = 2a + 2b - ||e_j + e_{j+1}||^2
        dot += (T::lit(2.0) * (a + b) - ab).max(T::zero()) / tau;
    }
    (l2 + dot).sqrt()
}

struct Difference<T> {
    u: Vec<T>,
    eps: Vec<SymTensor<T>>,
    p: Vec<DevTensor<T>>,
}

fn diff_at<T: Scalar>(coarse: &EvolutionState<T>, fine: &EvolutionState<T>, j: usize) -> Difference<T> {
    let half = T::lit(0.5);
    let m = j / 2;
    let c = &coarse.steps[m];
    let fj = &fine.steps[j];
    if j.is_multiple_of(2) {
        Difference {
            u: fj.u.iter().zip(&c.u).map(|(a, b)| *a - *b).collect(),
            eps: fj.eps.iter().zip(&c.eps).map(|(a, b)| *a - *b).collect(),
            p: fj.p.iter().zip(&c.p).map(|(a, b)| *a - *b).collect(),
        }
    } else {
        let n = &coarse.steps[m + 1];
        Difference {
            u: (0..fj.u.len()).map(|d| fj.u[d] - half * (c.u[d] + n.u[d])).collect(),
            eps: (0..fj.eps.len()).map(|q| fj.eps[q] - (c.eps[q] + n.eps[q]).scale(half)).collect(),
            p: (0..fj.p.len()).map(|q| fj.p[q] - (c.p[q] + n.p[q]).scale(half)).collect(),
        }
    }
}

/// `(sup_t ||u_k - u_2k||_H1, ||(u,eps,p)_k - (u,eps,p)_2k||_{H1(0,T)})` for interpolants.
pub fn interpolant_distance<T: Scalar>(space: &FemSpace<T>, coarse: &EvolutionState<T>, fine: &EvolutionState<T>, final_time: T) -> (T, T) {
    let k2 = fine.num_steps();
    assert_eq!(k2, 2 * coarse.num_steps(), "fine run must have twice the steps");
    let tau = final_time / T::from_usize_lossy(k2);
    let diffs: Vec<Difference<T>> = (0..=k2).map(|j| diff_at(coarse, fine, j)).collect();
    let mut linf = T::zero();
    let (mut su, mut se, mut sp) = (Vec::new(), Vec::new(), Vec::new());
    for d in &diffs {
        let nu = h1(space, &d.u);
        linf = linf.max(nu);
        su.push(nu * nu);
        se.push(l2_sym(space, &d.eps).powi(2));
        sp.push(l2_dev(space, &d.p).powi(2));
    }
    let (mut cu, mut ce, mut cp) = (Vec::new(), Vec::new(), Vec::new());
    for w in diffs.windows(2) {
        let u: Vec<T> = w[0].u.iter().zip(&w[1].u).map(|(a, b)| *a + *b).collect();
        let e: Vec<SymTensor<T>> = w[0].eps.iter().zip(&w[1].eps).map(|(a, b)| *a + *b).collect();
        let p: Vec<DevTensor<T>> = w[0].p.iter().zip(&w[1].p).map(|(a, b)| *a + *b).collect();
        cu.push(h1(space, &u).powi(2));
        ce.push(l2_sym(space, &e).powi(2));
        cp.push(l2_dev(space, &p).powi(2));
    }
    let full = h1_in_time(tau, &su, &cu) + h1_in_time(tau, &se, &ce) + h1_in_time(tau, &sp, &cp);
    (linf, full)
}

/// Successive refinements in time at fixed design and gamma.
///
/// `ks` must double from entry to entry. One row per pair `(k, 2k)`, columns
/// `k`, `linf_h1_u`, `h1_time_state`, `order_u` (log2 of the ratio with the
/// previous row, NaN on the first), `min_slack`, `max_abs_slack` (of the
/// coarse run) and `total_dissipation`.
pub fn timestep_sweep<T: Scalar>(problem: &Problem<T>, z: &[T], gamma: Gamma<T>, ks: &[usize], opts: &NewtonOptions) -> Result<Table, LabError> {
    if ks.len() < 2 || ks.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(LabError::Setup(format!("time step counts must double, got {ks:?}")));
    }
    let t_final = problem.grid.final_time;
    let problems: Vec<Problem<T>> = ks.iter().map(|&k| problem.with_grid(TimeGrid::new(k, t_final))).collect();
    let runs: Vec<Result<EvolutionState<T>, EvolutionError>> =
        problems.par_iter().map(|p| solve_evolution(p, z, gamma, None, opts)).collect();
    let runs: Vec<EvolutionState<T>> = runs.into_iter().collect::<Result<_, _>>()?;
    let mut t = Table::new("timestep_sweep", &["k", "linf_h1_u", "h1_time_state", "order_u", "min_slack", "max_abs_slack", "total_dissipation"]);
    let mut prev: Option<f64> = None;
    for j in 0..ks.len() - 1 {
        let (linf, full) = interpolant_distance(&problem.space, &runs[j], &runs[j + 1], t_final);
        let slack = energy_inequality_slack(&problems[j], &runs[j])?;
        let min_slack = slack.iter().fold(f64::INFINITY, |m, x| m.min(f(*x)));
        let max_abs = slack.iter().fold(0.0f64, |m, x| m.max(f(*x).abs()));
        let linf = f(linf);
        let order = prev.map_or(f64::NAN, |p| (p / linf).log2());
        prev = Some(linf);
        t.push(vec![ks[j] as f64, linf, f(full), order, min_slack, max_abs, f(runs[j].total_dissipation())]);
    }
    Ok(t)
}

/// Double-well transition energy on a 1D strip `[0, length]` with `z = 0` at
/// the left end and `z = 1` at the right, minimized by Newton's method.
///
/// Per unit cross-section, so the sharp-interface value is `1/6`.
pub fn mm_profile_energy(delta: f64, cells: usize, length: f64) -> f64 {
    let h = length / cells as f64;
    let gp = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let w = |z: f64| z * z * (1.0 - z) * (1.0 - z);
    let w1 = |z: f64| 2.0 * z * (1.0 - z) * (1.0 - 2.0 * z);
    let w2 = |z: f64| 2.0 * (1.0 - 6.0 * z + 6.0 * z * z);
    let energy = |z: &[f64]| -> f64 {
        let mut e = 0.0;
        for c in 0..cells {
            let g = (z[c + 1] - z[c]) / h;
            e += h * 0.5 * delta * g * g;
            for s in gp {
                e += h * 0.5 * w(z[c] + s * (z[c + 1] - z[c])) / (2.0 * delta);
            }
        }
        e
    };
    // logistic profile solves the continuous problem on the real line
    let mut z: Vec<f64> = (0..=cells).map(|j| 1.0 / (1.0 + (-(j as f64 * h - 0.5 * length) / delta).exp())).collect();
    z[0] = 0.0;
    z[cells] = 1.0;
    let n = cells - 1;
    for _ in 0..100 {
        let mut grad = vec![0.0; cells + 1];
        let mut diag = vec![0.0; cells + 1];
        let mut off = vec![0.0; cells];
        for c in 0..cells {
            let k = delta / h;
            grad[c] += k * (z[c] - z[c + 1]);
            grad[c + 1] += k * (z[c + 1] - z[c]);
            diag[c] += k;
            diag[c + 1] += k;
            off[c] -= k;
            for s in gp {
                let zq = z[c] + s * (z[c + 1] - z[c]);
                let (n0, n1) = (1.0 - s, s);
                let a = h * 0.5 / (2.0 * delta);
                grad[c] += a * w1(zq) * n0;
                grad[c + 1] += a * w1(zq) * n1;
                diag[c] += a * w2(zq) * n0 * n0;
                diag[c + 1] += a * w2(zq) * n1 * n1;
                off[c] += a * w2(zq) * n0 * n1;
            }
        }
        let gnorm = grad[1..cells].iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-13 {
            break;
        }
        // Thomas algorithm on interior nodes, shifted if not positive
        let mut shift = 0.0;
        let dz = loop {
            let mut cp = vec![0.0; n];
            let mut dp = vec![0.0; n];
            let mut ok = true;
            for r in 0..n {
                let node = r + 1;
                let a = if r > 0 { off[node - 1] } else { 0.0 };
                let b = diag[node] + shift - if r > 0 { a * cp[r - 1] } else { 0.0 };
                if b <= 0.0 {
                    ok = false;
                    break;
                }
                cp[r] = if r + 1 < n { off[node] / b } else { 0.0 };
                dp[r] = (-grad[node] - if r > 0 { a * dp[r - 1] } else { 0.0 }) / b;
            }
            if ok {
                for r in (0..n.saturating_sub(1)).rev() {
                    dp[r] -= cp[r] * dp[r + 1];
                }
                break dp;
            }
            shift = if shift == 0.0 { 1e-6 } else { 10.0 * shift };
        };
        let e0 = energy(&z);
        let mut s = 1.0;
        loop {
            let trial: Vec<f64> = (0..=cells).map(|j| if j == 0 || j == cells { z[j] } else { z[j] + s * dz[j - 1] }).collect();
            if energy(&trial) <= e0 || s < 1e-12 {
                z = trial;
                break;
            }
            s *= 0.5;
        }
    }
    energy(&z)
}

/// Columns `delta`, `energy`, `relative_error` against `1/6`.
pub fn mm_profile_check(deltas: &[f64], cells: usize, length: f64) -> Table {
    let mut t = Table::new("mm_profile_check", &["delta", "energy", "relative_error"]);
    for &d in deltas {
        let e = mm_profile_energy(d, cells, length);
        t.push(vec![d, e, (e - 1.0 / 6.0).abs() * 6.0]);
    }
    t
}

/// Area of `{lo < z < hi}` measured at quadrature points.
pub fn interface_area<T: Scalar>(space: &FemSpace<T>, z: &[T], lo: T, hi: T) -> T {
    let ind: Vec<T> = space.nodal_to_quad(z).iter().map(|&v| if v > lo && v < hi { T::one() } else { T::zero() }).collect();
    space.integrate(&ind)
}

/// Full optimization per `delta`. Columns `delta`, `objective`,
/// `interface_area`, `grad_norm`, `iterations`.
pub fn delta_sweep<T: Scalar>(problem: &Problem<T>, z0: &[T], deltas: &[f64], cfg: &OptimizerConfig) -> Result<Table, LabError> {
    let gamma = T::lit(*cfg.gamma_schedule.last().ok_or_else(|| LabError::Setup("empty gamma schedule".into()))?);
    let runs: Vec<_> = deltas
        .par_iter()
        .map(|&d| optimize(problem, z0, gamma, &OptimizerConfig { delta: d, ..cfg.clone() }, None))
        .collect();
    let mut t = Table::new("delta_sweep", &["delta", "objective", "interface_area", "grad_norm", "iterations"]);
    for (d, r) in deltas.iter().zip(runs) {
        let r = r?;
        let area = interface_area(&problem.space, &r.z, T::lit(0.05), T::lit(0.95));
        t.push(vec![*d, f(r.breakdown.total), f(area), f(r.gradient.norm), (r.trace.entries.len() - 1) as f64]);
    }
    Ok(t)
}

/// Largest adjoint norm per `(k, gamma)`. Columns `k`, `gamma`, `max_adjoint_norm`.
pub fn adjoint_bound_study<T: Scalar>(problem: &Problem<T>, z: &[T], ks: &[usize], gammas: &[T], opts: &NewtonOptions) -> Result<Table, LabError> {
    let grid: Vec<(usize, T)> = ks.iter().flat_map(|&k| gammas.iter().map(move |&g| (k, g))).collect();
    let t_final = problem.grid.final_time;
    let runs: Vec<Result<T, LabError>> = grid
        .par_iter()
        .map(|&(k, g)| {
            let p = problem.with_grid(TimeGrid::new(k, t_final));
            let s = solve_evolution(&p, z, Gamma::Finite(g), None, opts)?;
            let adj = solve_adjoint(&p, &s)?;
            Ok(adj.max_norm(&p.space))
        })
        .collect();
    let mut t = Table::new("adjoint_bound_study", &["k", "gamma", "max_adjoint_norm"]);
    for ((k, g), r) in grid.iter().zip(runs) {
        t.push(vec![*k as f64, f(*g), f(r?)]);
    }
    Ok(t)
}

/// Ratios `max_i ||S(z + s phi) - S(z)|| / ||s phi||_inf`. Columns `gamma`,
/// `size`, `ratio`, `skipped` (1 when the perturbation vanishes).
pub fn lipschitz_in_z_study<T: Scalar>(
    problem: &Problem<T>,
    z: &[T],
    phi: &[T],
    sizes: &[f64],
    gammas: &[T],
    opts: &NewtonOptions,
) -> Result<Table, LabError> {
    let phi_inf = phi.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let bases: Vec<Result<EvolutionState<T>, EvolutionError>> =
        gammas.par_iter().map(|&g| solve_evolution(problem, z, Gamma::Finite(g), None, opts)).collect();
    let mut t = Table::new("lipschitz_in_z_study", &["gamma", "size", "ratio", "skipped"]);
    for (g, base) in gammas.iter().zip(bases) {
        let base = base?;
        let rows: Vec<Result<Vec<f64>, LabError>> = sizes
            .par_iter()
            .map(|&s| {
                let dz = T::lit(s) * phi_inf;
                if dz == T::zero() {
                    return Ok(vec![f(*g), s, f64::NAN, 1.0]);
                }
                let zp: Vec<T> = z.iter().zip(phi).map(|(a, b)| *a + T::lit(s) * *b).collect();
                let sp = solve_evolution(problem, &zp, Gamma::Finite(*g), Some(&base), opts)?;
                Ok(vec![f(*g), s, f(trajectory_distance(&problem.space, &sp, &base) / dz), 0.0])
            })
            .collect();
        for r in rows {
            t.push(r?);
        }
    }
    Ok(t)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Outcome of one property in [`property_suite`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Quick property checks on a small problem: stability sampling, energy
/// slack, gradient against finite differences and against the forward
/// sensitivity.
pub fn property_suite(problem: &Problem<f64>, z: &[f64], gamma: f64, delta: f64, seed: u64) -> Result<Vec<PropertyOutcome>, LabError> {
    use crate::evolution::stability_check;
    use crate::objective::{evaluate, gradient_functional, solve_forward_sensitivity, DissipationTerm};
    use rand::{Rng, SeedableRng};

    let opts = NewtonOptions::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for g in [Gamma::Finite(gamma), Gamma::Exact] {
        let s = solve_evolution(problem, z, g, None, &opts)?;
        let mut worst = f64::NEG_INFINITY;
        for i in 1..=problem.num_steps() {
            let r = stability_check(problem, &s, i, 50, &mut rng)?;
            worst = worst.max(r.max_violation / r.scale.max(f64::MIN_POSITIVE));
        }
        out.push(PropertyOutcome { name: format!("stability sampling (gamma = {g})"), passed: worst <= 1e-9, detail: format!("worst relative violation {worst:.3e}") });
        let slack = energy_inequality_slack(problem, &s)?;
        let min = slack.iter().cloned().fold(f64::INFINITY, f64::min);
        let scale = s.energy.iter().fold(1e-300f64, |m, x| m.max(x.abs()));
        out.push(PropertyOutcome { name: format!("energy slack (gamma = {g})"), passed: min >= -1e-8 * scale, detail: format!("min slack {min:.3e}, scale {scale:.3e}") });
    }
    let g = Gamma::Finite(gamma);
    let (_, s) = evaluate(problem, z, g, delta, None, &opts)?;
    let adj = solve_adjoint(problem, &s)?;
    let grad = gradient_functional(problem, &s, &adj, delta, DissipationTerm::Gradient)?;
    let phi: Vec<f64> = (0..z.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let gp: f64 = grad.iter().zip(&phi).map(|(a, b)| a * b).sum();
    let sens = solve_forward_sensitivity(problem, &s, &phi, delta)?;
    let rel = (sens.dj - gp).abs() / gp.abs().max(f64::MIN_POSITIVE);
    out.push(PropertyOutcome { name: "adjoint and forward sensitivity agree".into(), passed: rel <= 1e-8, detail: format!("relative gap {rel:.3e}") });
    let t = 1e-5;
    let shifted = |sgn: f64| -> Vec<f64> { z.iter().zip(&phi).map(|(a, b)| a + sgn * t * b).collect() };
    let (jp, _) = evaluate(problem, &shifted(1.0), g, delta, Some(&s), &opts)?;
    let (jm, _) = evaluate(problem, &shifted(-1.0), g, delta, Some(&s), &opts)?;
    let fd = (jp.total - jm.total) / (2.0 * t);
    let rel = (fd - gp).abs() / gp.abs().max(f64::MIN_POSITIVE);
    out.push(PropertyOutcome { name: "gradient matches central differences".into(), passed: rel <= 1e-4, detail: format!("relative gap {rel:.3e}") });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{regression_design, regression_problem, unloaded_problem};

    #[test]
    fn elastic_gamma_sweep_has_zero_distance() {
        let p = unloaded_problem::<f64>(4, 2, 2);
        let z = regression_design(&p.space);
        let t = gamma_sweep(&p, &z, &[10.0, 100.0], &NewtonOptions::default()).unwrap();
        assert!(t.column("distance_to_exact").unwrap().iter().all(|d| *d == 0.0));
    }

    #[test]
    fn gamma_sweep_decreases_on_regression_problem() {
        let p = regression_problem::<f64>(4, 4, 3);
        let z = regression_design(&p.space);
        let t = gamma_sweep(&p, &z, &[10.0, 100.0, 1000.0], &NewtonOptions::default()).unwrap();
        let d = t.column("distance_to_exact").unwrap();
        assert!(d[0] > d[1] && d[1] > d[2] && d[2] > 0.0, "{d:?}");
    }

    #[test]
    fn identical_runs_have_zero_interpolant_distance() {
        let p = regression_problem::<f64>(2, 2, 2);
        let z = regression_design(&p.space);
        let s = solve_evolution(&p, &z, Gamma::Exact, None, &NewtonOptions::default()).unwrap();
        // a constant-in-time trajectory interpolates to itself
        let mut c = s.clone();
        let last = s.steps[2].clone();
        c.steps = vec![last.clone(); 3];
        let mut fine = c.clone();
        fine.steps = vec![last; 5];
        let (a, b) = interpolant_distance(&p.space, &c, &fine, 1.0);
        assert_eq!((a, b), (0.0, 0.0));
    }

    #[test]
    fn doubling_must_be_exact() {
        let p = regression_problem::<f64>(2, 2, 2);
        let z = regression_design(&p.space);
        assert!(matches!(timestep_sweep(&p, &z, Gamma::Exact, &[2, 3], &NewtonOptions::default()), Err(LabError::Setup(_))));
    }

    #[test]
    fn flat_profile_is_free_and_sharp_limit_is_one_sixth() {
        assert!(mm_profile_energy(0.02, 200, 1.0) > 0.0);
        let e = mm_profile_energy(0.02, 200, 1.0);
        assert!((e - 1.0 / 6.0).abs() < 0.02 / 6.0, "{e}");
        let s = FemSpace::new(crate::fem::Mesh::rect(10, 1, 1.0, 0.1, &crate::fixtures::regression_rules()[..1]).unwrap());
        assert_eq!(crate::objective::modica_mortola(&s, &vec![0.0; s.mesh.num_nodes()], 0.1), 0.0);
    }

    #[test]
    fn zero_perturbation_is_skipped() {
        let p = regression_problem::<f64>(2, 2, 1);
        let z = regression_design(&p.space);
        let phi = vec![1.0; z.len()];
        let t = lipschitz_in_z_study(&p, &z, &phi, &[0.0, 1e-2], &[10.0], &NewtonOptions::default()).unwrap();
        assert_eq!(t.column("skipped").unwrap(), vec![1.0, 0.0]);
        assert!(t.rows[1][2].is_finite() && t.rows[1][2] > 0.0);
    }

    #[test]
    fn unloaded_adjoint_norms_vanish() {
        let p = unloaded_problem::<f64>(2, 2, 2);
        let z = regression_design(&p.space);
        let t = adjoint_bound_study(&p, &z, &[1, 2], &[10.0], &NewtonOptions::default()).unwrap();
        assert!(t.column("max_adjoint_norm").unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((log_slope(&x, &y) + 1.5).abs() < 1e-12);
    }

    #[test]
    fn property_suite_passes_on_tiny_fixture() {
        let p = regression_problem::<f64>(4, 2, 2);
        let z = regression_design(&p.space);
        for o in property_suite(&p, &z, 100.0, 0.1, 1).unwrap() {
            assert!(o.passed, "{o:?}");
        }
    }
}
