//! Mode execution and artifact emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use plastopt::evolution::{energy_inequality_slack, solve_evolution, EvolutionState};
use plastopt::fem::io::fmt_f64;
use plastopt::fem::{Table, VtkFile};
use plastopt::fixtures::{regression_design, regression_problem};
use plastopt::lab;
use plastopt::objective::{objective, optimality_residuals};
use plastopt::optimizer::gamma_continuation;
use plastopt::{Model, Trajectory};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{nodal, ConfigError, Fields, RunConfig, StudyName};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Forward,
    Optimize,
    Lab(Option<StudyName>),
    Check,
}

impl Mode {
    fn label(self, cfg: &RunConfig) -> String {
        match self {
            Self::Forward => "forward".into(),
            Self::Optimize => "optimize".into(),
            Self::Lab(s) => match s.or(cfg.study.name) {
                Some(s) => format!("lab:{}", s.as_str()),
                None => "lab".into(),
            },
            Self::Check => "check".into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solve(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Solve(_) => "solve",
            Self::Io { .. } => "io",
        }
    }

    pub fn messages(&self) -> Vec<String> {
        match self {
            Self::Config(c) => c.messages(),
            other => vec![other.to_string()],
        }
    }
}

fn solve_err(e: impl std::fmt::Display) -> RunError {
    RunError::Solve(e.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct Contract {
    pub name: String,
    pub held: bool,
    pub detail: String,
}

impl Contract {
    fn new(name: &str, held: bool, detail: String) -> Self {
        Self { name: name.into(), held, detail }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub core_version: &'static str,
    pub mode: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_seconds: BTreeMap<&'static str, f64>,
    pub artifacts: Vec<Artifact>,
    pub contracts: Vec<Contract>,
    pub status: &'static str,
}

impl Manifest {
    pub fn contracts_held(&self) -> bool {
        self.contracts.iter().all(|c| c.held)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| RunError::Io { path, source })?;
        self.artifacts.push(Artifact { path: name.into(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(value).map_err(solve_err)?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    fn csv(&mut self, name: &str, table: &Table) -> Result<(), RunError> {
        self.put(name, table.to_csv().as_bytes())
    }

    fn vtk(&mut self, name: &str, vtk: &VtkFile) -> Result<(), RunError> {
        self.put(name, vtk.render().as_bytes())
    }
}

/// A validated configuration plus where its artifacts go.
pub struct Invocation {
    pub config: RunConfig,
    pub fields: Fields,
    /// Bytes hashed into the manifest: the file as given, or the resolved defaults.
    pub config_text: String,
    pub out: PathBuf,
}

/// Runs `mode` and writes every artifact plus `manifest.json` into `inv.out`.
pub fn run(mode: Mode, inv: &Invocation) -> Result<Manifest, RunError> {
    let start = Instant::now();
    std::fs::create_dir_all(&inv.out).map_err(|source| RunError::Io { path: inv.out.clone(), source })?;
    let mut w = Writer { dir: inv.out.clone(), artifacts: Vec::new() };
    w.json("config.json", &inv.config)?;
    let mut wall = BTreeMap::new();
    let contracts = match mode {
        Mode::Forward => forward(inv, &mut w, &mut wall)?,
        Mode::Optimize => optimize(inv, &mut w, &mut wall)?,
        Mode::Lab(study) => {
            let study = study.or(inv.config.study.name).ok_or_else(|| {
                ConfigError::Invalid(vec!["lab: no study given on the command line or in study.name".into()])
            })?;
            study_run(study, inv, &mut w, &mut wall)?
        }
        Mode::Check => check(inv, &mut w, &mut wall)?,
    };
    wall.insert("total", start.elapsed().as_secs_f64());
    let held = contracts.iter().all(|c| c.held);
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        core_version: plastopt::VERSION,
        mode: mode.label(&inv.config),
        config_sha256: sha256_hex(inv.config_text.as_bytes()),
        seed: inv.config.seed,
        threads: rayon::current_num_threads(),
        wall_seconds: wall,
        artifacts: w.artifacts,
        contracts,
        status: if held { "ok" } else { "contract_violation" },
    };
    let path = inv.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(solve_err)? + "\n";
    std::fs::write(&path, text).map_err(|source| RunError::Io { path, source })?;
    Ok(manifest)
}

fn timed<R>(wall: &mut BTreeMap<&'static str, f64>, key: &'static str, f: impl FnOnce() -> R) -> R {
    let t = Instant::now();
    let r = f();
    *wall.entry(key).or_insert(0.0) += t.elapsed().as_secs_f64();
    r
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn plastic_norms(state: &Trajectory, i: usize) -> (Vec<f64>, Vec<f64>) {
    let s = &state.steps[i];
    (s.p.iter().map(|p| p.norm()).collect(), s.sigma.iter().map(|x| x.frobenius_norm()).collect())
}

fn snapshot(model: &Model, state: &Trajectory, i: usize, title: &str) -> VtkFile {
    let (p, sigma) = plastic_norms(state, i);
    VtkFile::new(&model.space.mesh, title)
        .point_vector("u", &state.steps[i].u)
        .point_scalar("z", &state.z)
        .quad_scalar("p_norm", &p)
        .quad_scalar("sigma_norm", &sigma)
}

fn energy_contract(model: &Model, state: &Trajectory) -> Result<(Contract, f64), RunError> {
    let slack = energy_inequality_slack(model, state).map_err(solve_err)?;
    let min = slack.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = max_abs(state.energy.iter().copied()).max(f64::MIN_POSITIVE);
    let c = Contract::new("energy inequality", min >= -1e-8 * scale, format!("min slack {}, energy scale {}", fmt_f64(min), fmt_f64(scale)));
    Ok((c, min))
}

fn finite_contract(state: &EvolutionState<f64>) -> Contract {
    let bad = state.steps.iter().filter(|s| !s.is_finite()).count();
    Contract::new("finite states", bad == 0, format!("{bad} non-finite time nodes"))
}

#[derive(Serialize)]
struct ForwardSummary {
    gamma: plastopt::Gamma<f64>,
    steps: usize,
    total_dissipation: f64,
    max_abs_u: f64,
    max_abs_p: f64,
    final_energy: f64,
    min_energy_slack: f64,
    objective: plastopt::Breakdown,
}

fn forward(inv: &Invocation, w: &mut Writer, wall: &mut BTreeMap<&'static str, f64>) -> Result<Vec<Contract>, RunError> {
    let cfg = &inv.config;
    let model = cfg.model(&inv.fields);
    let z = nodal(&inv.fields.design, &model);
    let state = timed(wall, "solve", || solve_evolution(&model, &z, cfg.gamma, None, &cfg.optimizer.newton)).map_err(solve_err)?;
    let breakdown = objective(&model, &state, cfg.delta).map_err(solve_err)?;
    let (energy, min_slack) = energy_contract(&model, &state)?;

    let times = model.grid().times();
    let mut table = Table::new("steps", &["step", "time", "energy", "dissipation", "newton_iterations", "max_abs_u", "max_abs_p", "max_sigma"]);
    let (mut umax, mut pmax) = (0.0f64, 0.0f64);
    timed(wall, "write", || -> Result<(), RunError> {
        for (i, s) in state.steps.iter().enumerate() {
            let (p, sigma) = plastic_norms(&state, i);
            let (u_i, p_i) = (max_abs(s.u.iter().copied()), max_abs(p));
            umax = umax.max(u_i);
            pmax = pmax.max(p_i);
            table.push(vec![i as f64, times[i], state.energy[i], state.dissipation[i], state.newton[i].iterations as f64, u_i, p_i, max_abs(sigma)]);
            w.vtk(&format!("state_{i:03}.vtk"), &snapshot(&model, &state, i, &format!("step {i} t = {}", fmt_f64(times[i]))))?;
        }
        w.csv("steps.csv", &table)
    })?;
    let summary = ForwardSummary {
        gamma: cfg.gamma,
        steps: model.num_steps(),
        total_dissipation: state.total_dissipation(),
        max_abs_u: umax,
        max_abs_p: pmax,
        final_energy: *state.energy.last().expect("time node 0"),
        min_energy_slack: min_slack,
        objective: breakdown,
    };
    w.json("summary.json", &summary)?;
    Ok(vec![finite_contract(&state), energy])
}

#[derive(Serialize)]
struct StageSummary {
    gamma: f64,
    iterations: usize,
    stop: plastopt::optimizer::StopReason,
    j: f64,
    grad_norm: f64,
    dz_h1: Option<f64>,
    residuals: plastopt::objective::OptimalityResiduals<f64>,
}

#[derive(Serialize)]
struct OptimizeSummary {
    stages: Vec<StageSummary>,
    final_objective: plastopt::Breakdown,
    exact_objective: plastopt::Breakdown,
    z_min: f64,
    z_max: f64,
}

fn optimize(inv: &Invocation, w: &mut Writer, wall: &mut BTreeMap<&'static str, f64>) -> Result<Vec<Contract>, RunError> {
    let cfg = &inv.config;
    let model = cfg.model(&inv.fields);
    let z0 = nodal(&inv.fields.design, &model);
    let res = timed(wall, "optimize", || gamma_continuation(&model, &z0, &cfg.optimizer)).map_err(solve_err)?;

    let mut trace = Table::new(
        "trace",
        &["stage", "gamma", "iter", "j", "compliance", "modica_mortola", "penalty", "grad_norm", "step", "backtracks", "z_min", "z_max"],
    );
    let mut stages = Table::new(
        "stages",
        &["stage", "gamma", "iterations", "j", "grad_norm", "dz_h1", "flow_linf", "orthogonality_linf", "elastic_linf"],
    );
    let mut summaries = Vec::new();
    let mut monotone = true;
    for (s, stage) in res.stages.iter().enumerate() {
        let r = &stage.result;
        monotone &= r.trace.is_monotone();
        for e in &r.trace.entries {
            trace.push(vec![
                s as f64,
                e.gamma,
                e.iter as f64,
                e.j,
                e.breakdown.compliance(),
                e.breakdown.modica_mortola,
                e.penalty,
                e.grad_norm,
                e.step,
                e.backtracks as f64,
                e.z_min,
                e.z_max,
            ]);
        }
        let residuals = timed(wall, "residuals", || optimality_residuals(&model, &r.state, &r.adjoint)).map_err(solve_err)?;
        let iterations = r.trace.entries.len().saturating_sub(1);
        let j = r.breakdown.total + r.penalty;
        stages.push(vec![
            s as f64,
            r.gamma,
            iterations as f64,
            j,
            r.gradient.norm,
            stage.dz_h1.unwrap_or(f64::NAN),
            residuals.flow_linf,
            residuals.orthogonality_linf,
            residuals.elastic_linf,
        ]);
        summaries.push(StageSummary { gamma: r.gamma, iterations, stop: r.stop, j, grad_norm: r.gradient.norm, dz_h1: stage.dz_h1, residuals });
    }
    let last = &res.stages.last().expect("non-empty schedule").result;
    let (p, _) = plastic_norms(&last.state, model.num_steps());
    let design = VtkFile::new(&model.space.mesh, "optimized design")
        .point_scalar("z", &last.z)
        .point_scalar("z_initial", &z0)
        .point_vector("u", &last.state.steps[model.num_steps()].u)
        .quad_scalar("p_norm", &p);
    timed(wall, "write", || -> Result<(), RunError> {
        w.csv("trace.csv", &trace)?;
        w.csv("stages.csv", &stages)?;
        w.vtk("design.vtk", &design)
    })?;
    let finite = last.z.iter().all(|x| x.is_finite());
    w.json(
        "summary.json",
        &OptimizeSummary {
            stages: summaries,
            final_objective: last.breakdown,
            exact_objective: res.exact_objective,
            z_min: last.z.iter().copied().fold(f64::INFINITY, f64::min),
            z_max: last.z.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
    )?;
    Ok(vec![
        Contract::new("monotone descent", monotone, "objective non-increasing along accepted steps within each stage".into()),
        Contract::new("finite design", finite, format!("{} nodal values", last.z.len())),
    ])
}

#[derive(Serialize)]
struct StudySummary<'a> {
    study: &'static str,
    table: &'a Table,
    /// Least-squares log-log slope of the study's error column against its parameter.
    slope: Option<f64>,
}

fn study_run(study: StudyName, inv: &Invocation, w: &mut Writer, wall: &mut BTreeMap<&'static str, f64>) -> Result<Vec<Contract>, RunError> {
    let cfg = &inv.config;
    let s = &cfg.study;
    let opts = &cfg.optimizer.newton;
    let model = cfg.model(&inv.fields);
    let z = nodal(&inv.fields.design, &model);
    let table = timed(wall, "study", || -> Result<Table, lab::LabError> {
        Ok(match study {
            StudyName::GammaSweep => lab::gamma_sweep(&model, &z, &s.gammas, opts)?,
            StudyName::TimestepSweep => lab::timestep_sweep(&model, &z, cfg.gamma, &s.ks, opts)?,
            StudyName::DeltaSweep => lab::delta_sweep(&model, &z, &s.deltas, &cfg.optimizer)?,
            StudyName::MmProfileCheck => lab::mm_profile_check(&s.deltas, s.profile_cells, s.profile_length),
            StudyName::AdjointBoundStudy => lab::adjoint_bound_study(&model, &z, &s.ks, &s.gammas, opts)?,
            StudyName::LipschitzInZStudy => {
                let phi = nodal(&inv.fields.direction, &model);
                lab::lipschitz_in_z_study(&model, &z, &phi, &s.sizes, &s.gammas, opts)?
            }
        })
    })
    .map_err(solve_err)?;

    let axes = match study {
        StudyName::GammaSweep => Some(("gamma", "distance_to_exact")),
        StudyName::TimestepSweep => Some(("k", "linf_h1_u")),
        StudyName::MmProfileCheck => Some(("delta", "relative_error")),
        _ => None,
    };
    let slope = axes.and_then(|(xn, yn)| {
        let (x, y): (Vec<f64>, Vec<f64>) = table
            .column(xn)?
            .into_iter()
            .zip(table.column(yn)?)
            .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
            .unzip();
        (x.len() >= 2).then(|| lab::log_slope(&x, &y))
    });
    let name = study.as_str();
    w.csv(&format!("{name}.csv"), &table)?;
    w.json(&format!("{name}.json"), &StudySummary { study: name, table: &table, slope })?;

    let skipped = table.columns.iter().position(|c| c == "skipped");
    let order = table.columns.iter().position(|c| c == "order_u");
    let bad = table
        .rows
        .iter()
        .filter(|r| skipped.is_none_or(|j| r[j] == 0.0))
        .filter(|r| r.iter().enumerate().any(|(j, x)| !x.is_finite() && !(Some(j) == order && x.is_nan())))
        .count();
    Ok(vec![
        Contract::new("study produced rows", !table.rows.is_empty(), format!("{} rows", table.rows.len())),
        Contract::new("finite study values", bad == 0, format!("{bad} rows with non-finite entries")),
    ])
}

fn check(inv: &Invocation, w: &mut Writer, wall: &mut BTreeMap<&'static str, f64>) -> Result<Vec<Contract>, RunError> {
    let problem = regression_problem::<f64>(4, 2, 3);
    let z = regression_design(&problem.space);
    let outcomes = timed(wall, "check", || lab::property_suite(&problem, &z, 100.0, 0.1, inv.config.seed)).map_err(solve_err)?;
    w.json("check.json", &outcomes)?;
    Ok(outcomes.into_iter().map(|o| Contract { name: o.name, held: o.passed, detail: o.detail }).collect())
}

/// Structured report of a failed run, as printed to stderr and saved as `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub status: &'static str,
    pub kind: &'static str,
    pub exit_code: u8,
    pub messages: Vec<String>,
}

impl ErrorReport {
    pub fn new(e: &RunError) -> Self {
        Self { status: "error", kind: e.kind(), exit_code: e.exit_code(), messages: e.messages() }
    }

    pub fn emit(&self, out: Option<&Path>) {
        let text = serde_json::to_string_pretty(self).unwrap_or_else(|_| format!("{self:?}"));
        eprintln!("{text}");
        if let Some(dir) = out {
            if std::fs::create_dir_all(dir).is_ok() {
                let _ = std::fs::write(dir.join("error.json"), text + "\n");
            }
        }
    }
}
