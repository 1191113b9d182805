//! File formats: CSV tables, legacy VTK snapshots and TOML run configs.
//! Meshes are read and written by [`crate::unstructured::msh`].

pub mod config;
pub mod table;
pub mod vtk;

pub use config::{CaseConfig, CaseKind, CompareConfig, ConvergenceConfig, OutputConfig, PhysicsConfig, RunConfig};
pub use table::{format_float, Table, Value};
pub use vtk::{
    grid_vtk_string, mesh_vtk_string, parse_vtk_str, read_vtk, write_grid_vtk, write_mesh_vtk, VtkSnapshot,
};
