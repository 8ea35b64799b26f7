//! JSON run configuration. Every field has a default; `{}` describes the
//! cantilever regression strip.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use plastopt::fem::{FacetTag, FemSpace, LoadProgram, Mesh, Sampler, Side, TagRule, TimeGrid};
use plastopt::fixtures::{ERSATZ_CONTRAST, REGRESSION_TRACTION, STRIP_HEIGHT, STRIP_LENGTH, STRONG_PHASE};
use plastopt::optimizer::OptimizerConfig;
use plastopt::{Endpoints, Gamma, Law, Model};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

impl ConfigError {
    pub fn messages(&self) -> Vec<String> {
        match self {
            Self::Invalid(v) => v.clone(),
            other => vec![other.to_string()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
    pub length: f64,
    pub height: f64,
    pub boundary: Vec<BoundaryRule>,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            nx: 16,
            ny: 8,
            length: STRIP_LENGTH,
            height: STRIP_HEIGHT,
            boundary: vec![
                BoundaryRule { side: Side::Left, tag: FacetTag::Dirichlet, from: None, to: None },
                BoundaryRule { side: Side::Right, tag: FacetTag::Neumann, from: Some(0.25), to: Some(0.75) },
            ],
        }
    }
}

/// Facets of `side` whose midpoint coordinate along the side lies in `[from, to]`
/// (the whole side when omitted).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryRule {
    pub side: Side,
    pub tag: FacetTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<f64>,
}

impl BoundaryRule {
    fn to_rule(self) -> TagRule {
        TagRule { side: self.side, from: self.from.unwrap_or(f64::NEG_INFINITY), to: self.to.unwrap_or(f64::INFINITY), tag: self.tag }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub mu: f64,
    pub lambda: f64,
    pub h: f64,
    pub d: f64,
    pub ell: f64,
}

impl Phase {
    fn to_array(self) -> [f64; 5] {
        [self.mu, self.lambda, self.h, self.d, self.ell]
    }
}

/// Strong phase plus either an explicit weak phase or a contrast factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSpec {
    pub strong: Phase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak: Option<Phase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast: Option<f64>,
}

impl Default for MaterialSpec {
    fn default() -> Self {
        let [mu, lambda, h, d, ell] = STRONG_PHASE;
        Self { strong: Phase { mu, lambda, h, d, ell }, weak: None, contrast: None }
    }
}

impl MaterialSpec {
    pub fn law(&self) -> Law {
        let strong = self.strong.to_array();
        let weak = match self.weak {
            Some(w) => w.to_array(),
            None => strong.map(|s| s * self.contrast.unwrap_or(ERSATZ_CONTRAST)),
        };
        let e = |i: usize| Endpoints::new(weak[i], strong[i]);
        Law { mu: e(0), lambda: e(1), h: e(2), d: e(3), ell: e(4) }
    }
}

/// Components `[x, y]` of body force `f`, traction `g` and boundary displacement `w`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadSpec {
    pub f: [String; 2],
    pub g: [String; 2],
    pub w: [String; 2],
}

impl Default for LoadSpec {
    fn default() -> Self {
        let zero = || ["0".to_string(), "0".to_string()];
        Self { f: zero(), g: ["0".to_string(), format!("-{REGRESSION_TRACTION}*t")], w: zero() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub steps: usize,
    pub final_time: f64,
    /// Optional explicit nodes; accepted only when they are the uniform ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { steps: 8, final_time: 1.0, times: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyName {
    GammaSweep,
    TimestepSweep,
    DeltaSweep,
    MmProfileCheck,
    AdjointBoundStudy,
    LipschitzInZStudy,
}

impl StudyName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::GammaSweep => "gamma_sweep",
            Self::TimestepSweep => "timestep_sweep",
            Self::DeltaSweep => "delta_sweep",
            Self::MmProfileCheck => "mm_profile_check",
            Self::AdjointBoundStudy => "adjoint_bound_study",
            Self::LipschitzInZStudy => "lipschitz_in_z_study",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<StudyName>,
    pub gammas: Vec<f64>,
    pub ks: Vec<usize>,
    pub deltas: Vec<f64>,
    pub sizes: Vec<f64>,
    /// Perturbation direction for the Lipschitz study, an expression in `x`, `y`.
    pub direction: String,
    pub profile_cells: usize,
    pub profile_length: f64,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            name: None,
            gammas: vec![10.0, 100.0, 1000.0, 1e4],
            ks: vec![4, 8, 16, 32],
            deltas: vec![0.2, 0.1, 0.05],
            sizes: vec![1e-1, 1e-2, 1e-3, 1e-4],
            direction: "cos(3*x)*y".into(),
            profile_cells: 200,
            profile_length: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub material: MaterialSpec,
    pub loads: LoadSpec,
    pub grid: GridSpec,
    pub gamma: Gamma<f64>,
    pub delta: f64,
    /// Initial phase field, an expression in `x`, `y`.
    pub design: String,
    pub optimizer: OptimizerConfig,
    pub study: StudySpec,
    pub output: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh: MeshSpec::default(),
            material: MaterialSpec::default(),
            loads: LoadSpec::default(),
            grid: GridSpec::default(),
            gamma: Gamma::Finite(100.0),
            delta: 0.1,
            design: "0.5 + 0.3*cos(2*x)*y".into(),
            optimizer: OptimizerConfig::default(),
            study: StudySpec::default(),
            output: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// Parsed expressions of a validated configuration.
#[derive(Debug, Clone)]
pub struct Fields {
    pub f: [Expr; 2],
    pub g: [Expr; 2],
    pub w: [Expr; 2],
    pub design: Expr,
    pub direction: Expr,
}

fn parse_field(name: &str, text: &str, errs: &mut Vec<String>) -> Option<Expr> {
    Expr::parse(text).map_err(|e| errs.push(format!("{name}: {e}"))).ok()
}

fn parse_pair(name: &str, pair: &[String; 2], errs: &mut Vec<String>) -> Option<[Expr; 2]> {
    let x = parse_field(&format!("{name}[0]"), &pair[0], errs);
    let y = parse_field(&format!("{name}[1]"), &pair[1], errs);
    Some([x?, y?])
}

fn sampler(e: &[Expr; 2]) -> Sampler<f64> {
    let [a, b] = e.clone();
    Arc::new(move |p: [f64; 2], t: f64| [a.eval(p[0], p[1], t), b.eval(p[0], p[1], t)])
}

impl RunConfig {
    pub fn from_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Reads, parses and validates `path`.
    pub fn load(path: &Path) -> Result<(Self, Fields, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let cfg = Self::from_str(&text, path)?;
        let fields = cfg.validate()?;
        Ok((cfg, fields, text))
    }

    fn mesh(&self) -> Result<Mesh<f64>, String> {
        let rules: Vec<TagRule> = self.mesh.boundary.iter().map(|r| r.to_rule()).collect();
        Mesh::rect(self.mesh.nx, self.mesh.ny, self.mesh.length, self.mesh.height, &rules).map_err(|e| format!("mesh: {e}"))
    }

    /// Every violated invariant, plus the parsed fields when there are none.
    pub fn validate(&self) -> Result<Fields, ConfigError> {
        let mut errs = Vec::new();
        for r in &self.mesh.boundary {
            if let (Some(a), Some(b)) = (r.from, r.to) {
                if !(a <= b) {
                    errs.push(format!("mesh.boundary: rule on {:?} has from = {a} > to = {b}", r.side));
                }
            }
        }
        let mesh = self.mesh().map_err(|e| errs.push(e)).ok();

        let law = self.material.law();
        if self.material.weak.is_some() && self.material.contrast.is_some() {
            errs.push("material: give either `weak` or `contrast`, not both".into());
        }
        if let Some(c) = self.material.contrast {
            if !(c > 0.0 && c <= 1.0) {
                errs.push(format!("material.contrast = {c} must lie in (0, 1]"));
            }
        }
        errs.extend(law.violations());

        let f = parse_pair("loads.f", &self.loads.f, &mut errs);
        let g = parse_pair("loads.g", &self.loads.g, &mut errs);
        let w = parse_pair("loads.w", &self.loads.w, &mut errs);
        let design = parse_field("design", &self.design, &mut errs);
        let direction = parse_field("study.direction", &self.study.direction, &mut errs);

        if self.grid.steps == 0 {
            errs.push("grid.steps must be at least 1".into());
        }
        if !(self.grid.final_time > 0.0 && self.grid.final_time.is_finite()) {
            errs.push(format!("grid.final_time = {} must be finite and positive", self.grid.final_time));
        }
        if let Some(times) = &self.grid.times {
            let k = self.grid.steps;
            let tau = self.grid.final_time / k.max(1) as f64;
            let uniform = times.len() == k + 1
                && times.iter().enumerate().all(|(i, t)| (t - i as f64 * tau).abs() <= 1e-12 * self.grid.final_time.abs().max(1.0));
            if !uniform {
                errs.push(format!("grid.times must be the uniform nodes i*T/k for i = 0..={k}; nonuniform grids are not supported"));
            }
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            errs.push(format!("delta = {} must be finite and positive", self.delta));
        }
        errs.extend(self.optimizer.violations().into_iter().map(|v| format!("optimizer: {v}")));
        if self.optimizer.delta != self.delta {
            errs.push(format!("optimizer.delta = {} differs from delta = {}", self.optimizer.delta, self.delta));
        }

        let s = &self.study;
        if s.gammas.iter().any(|g| !(*g > 0.0)) {
            errs.push("study.gammas must be positive".into());
        }
        if s.ks.is_empty() || s.ks.contains(&0) {
            errs.push("study.ks must be a nonempty list of positive step counts".into());
        }
        if s.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            errs.push("study.deltas must be finite and positive".into());
        }
        if s.sizes.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            errs.push("study.sizes must be finite and positive".into());
        }
        if s.profile_cells < 2 || !(s.profile_length > 0.0) {
            errs.push("study.profile_cells must be at least 2 and study.profile_length positive".into());
        }

        if let (Some(mesh), Some(f), Some(g), Some(w)) = (&mesh, &f, &g, &w) {
            let program = LoadProgram::new(sampler(f), sampler(g), sampler(w), self.grid.final_time);
            for name in program.nonzero_at_start(&mesh.nodes) {
                errs.push(format!("loads must vanish at t = 0, but `{name}` does not"));
            }
        }

        match (errs.is_empty(), f, g, w, design, direction) {
            (true, Some(f), Some(g), Some(w), Some(design), Some(direction)) => Ok(Fields { f, g, w, design, direction }),
            _ => Err(ConfigError::Invalid(errs)),
        }
    }

    /// Builds the model from a validated configuration.
    pub fn model(&self, fields: &Fields) -> Model {
        let mesh = self.mesh().expect("validated mesh");
        let loads = LoadProgram::new(sampler(&fields.f), sampler(&fields.g), sampler(&fields.w), self.grid.final_time);
        Model::new(FemSpace::new(mesh), self.material.law(), loads, TimeGrid::new(self.grid.steps, self.grid.final_time))
    }
}

/// Nodal values of `e(x, y, 0)`.
pub fn nodal(e: &Expr, model: &Model) -> Vec<f64> {
    model.space.mesh.nodes.iter().map(|p| e.eval(p[0], p[1], 0.0)).collect()
}
