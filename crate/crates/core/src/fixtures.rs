//! Canonical test problems.
//!
//! The regression strip is a cantilever: clamped on the left edge and pulled
//! down by a ramped traction on the middle half of the right edge.

use crate::evolution::Problem;
use crate::fem::{FacetTag, FemSpace, LoadProgram, Mesh, Side, TagRule, TimeGrid};
use crate::material::MaterialLaw;
use crate::scalar::Scalar;
use std::sync::Arc;

pub const STRIP_LENGTH: f64 = 2.0;
pub const STRIP_HEIGHT: f64 = 1.0;
/// Strong-phase `[mu, lambda, h, d, ell]`.
pub const STRONG_PHASE: [f64; 5] = [1.0, 1.0, 0.1, 0.05, 1.0];
/// Weak phase is the strong phase scaled by this factor.
pub const ERSATZ_CONTRAST: f64 = 1e-3;
/// Magnitude of the downward traction at `t = 1`; gives a partial plastic zone.
pub const REGRESSION_TRACTION: f64 = 0.014;

pub fn regression_law<T: Scalar>() -> MaterialLaw<T> {
    MaterialLaw::ersatz(STRONG_PHASE.map(T::lit), T::lit(ERSATZ_CONTRAST)).expect("valid fixture law")
}

pub fn regression_rules() -> Vec<TagRule> {
    vec![
        TagRule::whole(Side::Left, FacetTag::Dirichlet),
        TagRule { side: Side::Right, from: 0.25, to: 0.75, tag: FacetTag::Neumann },
    ]
}

pub fn regression_space<T: Scalar>(nx: usize, ny: usize) -> FemSpace<T> {
    FemSpace::new(Mesh::rect(nx, ny, T::lit(STRIP_LENGTH), T::lit(STRIP_HEIGHT), &regression_rules()).expect("valid fixture mesh"))
}

pub fn regression_problem<T: Scalar>(nx: usize, ny: usize, k: usize) -> Problem<T> {
    let loads = LoadProgram::ramped_traction([T::zero(), -T::lit(REGRESSION_TRACTION)], T::one());
    Problem::new(regression_space(nx, ny), regression_law(), loads, TimeGrid::new(k, T::one()))
}

/// Nonuniform design `0.5 + 0.3 cos(2x) y`.
pub fn regression_design<T: Scalar>(space: &FemSpace<T>) -> Vec<T> {
    space.mesh.nodes.iter().map(|x| T::lit(0.5) + T::lit(0.3) * (T::lit(2.0) * x[0]).cos() * x[1]).collect()
}

/// Same strip with zero loads.
pub fn unloaded_problem<T: Scalar>(nx: usize, ny: usize, k: usize) -> Problem<T> {
    Problem::new(regression_space(nx, ny), regression_law(), LoadProgram::zero(T::one()), TimeGrid::new(k, T::one()))
}

pub const SINGLE_BODY_FORCE: f64 = 0.02;
pub const SINGLE_TRACTION: f64 = 0.01;
/// Yield stress large enough that the single-element problem stays elastic.
pub const SINGLE_YIELD: f64 = 1e3;

/// Unit square as one cell, clamped left, traction on the right edge plus a
/// downward body force, one time step, elastic.
pub fn single_element_problem<T: Scalar>() -> Problem<T> {
    let rules = [TagRule::whole(Side::Left, FacetTag::Dirichlet), TagRule::whole(Side::Right, FacetTag::Neumann)];
    let space = FemSpace::new(Mesh::rect(1, 1, T::one(), T::one(), &rules).expect("valid fixture mesh"));
    let mut strong = STRONG_PHASE;
    strong[3] = SINGLE_YIELD;
    let law = MaterialLaw::ersatz(strong.map(T::lit), T::lit(ERSATZ_CONTRAST)).expect("valid fixture law");
    let (f1, g1) = (T::lit(SINGLE_BODY_FORCE), T::lit(SINGLE_TRACTION));
    let loads = LoadProgram::new(
        Arc::new(move |_, t| [T::zero(), -f1 * t]),
        Arc::new(move |_, t| [T::zero(), -g1 * t]),
        crate::fem::loads::zero_sampler(),
        T::one(),
    );
    Problem::new(space, law, loads, TimeGrid::new(1, T::one()))
}
