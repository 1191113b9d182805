//! Legacy ASCII VTK snapshots. Grids are written as structured points at
//! the cell centers, meshes as unstructured grids with cell data.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{invalid, Result};
use crate::phm::{PhmState, COMPONENT_NAMES};
use crate::structured::StructuredGrid;
use crate::unstructured::{ElementKind, UnstructuredMesh};

use super::table::format_float;

fn push_arrays(out: &mut String, state: &[PhmState]) {
    for (c, name) in COMPONENT_NAMES.iter().enumerate() {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for u in state {
            out.push_str(&format_float(u[c]));
            out.push('\n');
        }
    }
}

pub fn grid_vtk_string(grid: &StructuredGrid, state: &[PhmState], title: &str) -> Result<String> {
    if state.len() != grid.n_cells() {
        return Err(invalid("state does not match the grid"));
    }
    let c0 = grid.cell_center(0);
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{}\nASCII\nDATASET STRUCTURED_POINTS", title_line(title));
    let _ = writeln!(s, "DIMENSIONS {} {} {}", grid.n[0], grid.n[1], grid.n[2]);
    let _ = writeln!(s, "ORIGIN {} {} {}", format_float(c0[0]), format_float(c0[1]), format_float(c0[2]));
    let sp: Vec<String> = (0..3)
        .map(|a| format_float(if a < grid.dim { grid.spacing[a] } else { 1.0 }))
        .collect();
    let _ = writeln!(s, "SPACING {}", sp.join(" "));
    let _ = writeln!(s, "POINT_DATA {}", state.len());
    push_arrays(&mut s, state);
    Ok(s)
}

fn vtk_cell_type(kind: ElementKind) -> u8 {
    match kind {
        ElementKind::Line => 3,
        ElementKind::Triangle => 5,
        ElementKind::Quad => 9,
        ElementKind::Tet => 10,
        ElementKind::Hex => 12,
    }
}

pub fn mesh_vtk_string(mesh: &UnstructuredMesh, state: &[PhmState], title: &str) -> Result<String> {
    if state.len() != mesh.n_cells() {
        return Err(invalid("state does not match the mesh"));
    }
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{}\nASCII\nDATASET UNSTRUCTURED_GRID", title_line(title));
    let _ = writeln!(s, "POINTS {} double", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} {}", format_float(p[0]), format_float(p[1]), format_float(p[2]));
    }
    let size: usize = mesh.cells.iter().map(|c| c.nodes.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {}", mesh.n_cells(), size);
    for c in &mesh.cells {
        s.push_str(&c.nodes.len().to_string());
        for n in &c.nodes {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_cells());
    for c in &mesh.cells {
        let _ = writeln!(s, "{}", vtk_cell_type(c.kind));
    }
    let _ = writeln!(s, "CELL_DATA {}", state.len());
    push_arrays(&mut s, state);
    Ok(s)
}

fn title_line(t: &str) -> String {
    let t: String = t.chars().filter(|c| *c != '\n' && *c != '\r').take(255).collect();
    if t.is_empty() {
        "snapshot".into()
    } else {
        t
    }
}

pub fn write_grid_vtk(grid: &StructuredGrid, state: &[PhmState], title: &str, path: &Path) -> Result<()> {
    std::fs::write(path, grid_vtk_string(grid, state, title)?)?;
    Ok(())
}

pub fn write_mesh_vtk(mesh: &UnstructuredMesh, state: &[PhmState], title: &str, path: &Path) -> Result<()> {
    std::fs::write(path, mesh_vtk_string(mesh, state, title)?)?;
    Ok(())
}

/// Data arrays of a legacy VTK file written by this module.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkSnapshot {
    pub title: String,
    pub dataset: String,
    /// Points for structured data, cells for unstructured data.
    pub n_values: usize,
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl VtkSnapshot {
    pub fn array(&self, name: &str) -> Option<&[f64]> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Reassembles states from the eight named arrays.
    pub fn states(&self) -> Result<Vec<PhmState>> {
        let cols: Vec<&[f64]> = COMPONENT_NAMES
            .iter()
            .map(|n| self.array(n).ok_or_else(|| invalid(format!("VTK file lacks array '{n}'"))))
            .collect::<Result<_>>()?;
        Ok((0..self.n_values)
            .map(|i| PhmState(std::array::from_fn(|c| cols[c][i])))
            .collect())
    }
}

pub fn parse_vtk_str(text: &str) -> Result<VtkSnapshot> {
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default();
    if !head.starts_with("# vtk DataFile") {
        return Err(invalid("not a legacy VTK file"));
    }
    let mut snap = VtkSnapshot {
        title: lines.next().unwrap_or_default().to_string(),
        ..Default::default()
    };
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(invalid("only ASCII VTK files are supported"));
    }
    let mut tokens = lines.flat_map(str::split_whitespace);
    let num = |t: Option<&str>| -> Result<usize> {
        t.and_then(|s| s.parse().ok())
            .ok_or_else(|| invalid("malformed VTK count"))
    };
    while let Some(tok) = tokens.next() {
        match tok {
            "DATASET" => snap.dataset = tokens.next().unwrap_or_default().to_string(),
            "POINTS" => {
                let n = num(tokens.next())?;
                tokens.next();
                for _ in 0..3 * n {
                    tokens.next();
                }
            }
            "CELLS" => {
                num(tokens.next())?;
                let size = num(tokens.next())?;
                for _ in 0..size {
                    tokens.next();
                }
            }
            "CELL_TYPES" => {
                let n = num(tokens.next())?;
                for _ in 0..n {
                    tokens.next();
                }
            }
            "POINT_DATA" | "CELL_DATA" => snap.n_values = num(tokens.next())?,
            "SCALARS" => {
                let name = tokens.next().ok_or_else(|| invalid("SCALARS without a name"))?.to_string();
                tokens.next();
                let mut t = tokens.next();
                if t == Some("1") {
                    t = tokens.next();
                }
                if t == Some("LOOKUP_TABLE") {
                    tokens.next();
                }
                let vals = (0..snap.n_values)
                    .map(|_| {
                        tokens
                            .next()
                            .and_then(|s| s.parse::<f64>().ok())
                            .ok_or_else(|| invalid(format!("array '{name}' is truncated or malformed")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                snap.arrays.push((name, vals));
            }
            _ => {}
        }
    }
    Ok(snap)
}

pub fn read_vtk(path: &Path) -> Result<VtkSnapshot> {
    parse_vtk_str(&std::fs::read_to_string(path)?)
}
