//! Q1 finite elements on structured rectangular meshes.

pub mod assembly;
pub mod io;
pub mod linalg;
pub mod loads;
pub mod mesh;
pub mod quadrature;
pub mod riesz;
pub mod space;

pub use assembly::{assemble_linearized_system, assemble_state_residual, AssemblyError, LinearizedSystem, PointData, StateAssembly};
pub use io::{Table, VtkFile};
pub use linalg::{Csr, LinalgError, SpdSolver};
pub use loads::{LoadProgram, LoadStep, Sampler, TimeGrid};
pub use mesh::{FacetTag, Mesh, MeshError, Side, TagRule};
pub use quadrature::{QuadCache, QUAD_PER_CELL};
pub use riesz::{h1_riesz_solve, RieszMap};
pub use space::FemSpace;
