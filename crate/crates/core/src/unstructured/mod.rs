//! Finite-volume solvers on unstructured tetrahedral, hexahedral, triangular
//! and quadrilateral meshes.

pub mod gradient;
pub mod mesh;
pub mod meshgen;
pub mod msh;
pub mod solver;

pub use gradient::{gradients, GradientMethod, GradientOperator};
pub use mesh::{Face, FaceSide, MeshSummary, Patch, UnstructuredMesh};
pub use msh::{parse_msh_str, read_msh, write_msh, write_msh_string, ElementKind, MeshData};
pub use solver::{
    default_unstructured_cfl, ghost_state, pec_ghost, upwind_beam_transport, BeamUSolver, FvsUSolver,
    PatchKind, UnstructuredSetup,
};
