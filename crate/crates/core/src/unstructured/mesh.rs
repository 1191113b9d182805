//! Cell/face connectivity and finite-volume geometry of unstructured meshes.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::phm::{dot, Vec3};

use super::msh::{Element, ElementKind, MeshData};

const TRI_EDGES: [&[usize]; 3] = [&[0, 1], &[1, 2], &[2, 0]];
const QUAD_EDGES: [&[usize]; 4] = [&[0, 1], &[1, 2], &[2, 3], &[3, 0]];
const TET_FACES: [&[usize]; 4] = [&[0, 2, 1], &[0, 1, 3], &[1, 2, 3], &[0, 3, 2]];
const HEX_FACES: [&[usize]; 6] = [
    &[0, 3, 2, 1],
    &[4, 5, 6, 7],
    &[0, 1, 5, 4],
    &[1, 2, 6, 5],
    &[2, 3, 7, 6],
    &[3, 0, 4, 7],
];

fn local_faces(kind: ElementKind) -> &'static [&'static [usize]] {
    match kind {
        ElementKind::Triangle => &TRI_EDGES,
        ElementKind::Quad => &QUAD_EDGES,
        ElementKind::Tet => &TET_FACES,
        ElementKind::Hex => &HEX_FACES,
        ElementKind::Line => &[],
    }
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn average(points: impl Iterator<Item = Vec3>) -> Vec3 {
    let mut s = [0.0; 3];
    let mut n = 0.0;
    for p in points {
        for d in 0..3 {
            s[d] += p[d];
        }
        n += 1.0;
    }
    [s[0] / n, s[1] / n, s[2] / n]
}

/// Vector area (length times unit normal in 2D) and centroid of a face given
/// by ordered nodes, with the orientation implied by the node order.
fn face_vector(dim: usize, pts: &[Vec3]) -> (Vec3, Vec3) {
    let c = average(pts.iter().copied());
    let s = match (dim, pts.len()) {
        (2, 2) => {
            let d = sub(pts[1], pts[0]);
            [d[1], -d[0], 0.0]
        }
        (3, 3) => {
            let v = cross(sub(pts[1], pts[0]), sub(pts[2], pts[0]));
            [0.5 * v[0], 0.5 * v[1], 0.5 * v[2]]
        }
        (3, 4) => {
            let v = cross(sub(pts[2], pts[0]), sub(pts[3], pts[1]));
            [0.5 * v[0], 0.5 * v[1], 0.5 * v[2]]
        }
        _ => [0.0; 3],
    };
    (s, c)
}

/// What lies across a face from its owner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum FaceSide {
    /// A neighbor cell; its centroid seen from this face is `centroid + shift`
    /// (nonzero across periodic seams).
    Cell { cell: usize, shift: Vec3 },
    Boundary { patch: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Face {
    pub owner: usize,
    pub neighbor: FaceSide,
    /// Unit normal pointing out of the owner.
    pub normal: Vec3,
    pub area: f64,
    pub centroid: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Patch {
    pub name: String,
    pub faces: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct UnstructuredMesh {
    pub dim: usize,
    pub nodes: Vec<Vec3>,
    pub cells: Vec<Element>,
    pub volumes: Vec<f64>,
    pub centroids: Vec<Vec3>,
    pub faces: Vec<Face>,
    pub patches: Vec<Patch>,
    cell_face_start: Vec<usize>,
    /// `(face, +1 owner / -1 neighbor)` grouped by cell.
    cell_face_list: Vec<(usize, f64)>,
}

type FaceKey = [usize; 4];

fn face_key(nodes: &[usize]) -> FaceKey {
    let mut k = [usize::MAX; 4];
    k[..nodes.len()].copy_from_slice(nodes);
    k[..nodes.len()].sort_unstable();
    k
}

impl UnstructuredMesh {
    pub fn from_data(data: &MeshData) -> Result<Self> {
        let dim = data.dim();
        if dim < 2 {
            return Err(Error::Mesh("mesh needs 2D or 3D cells".into()));
        }
        let cells: Vec<Element> = data
            .elements
            .iter()
            .filter(|e| e.kind.dim() == dim)
            .cloned()
            .collect();
        let mut boundary_tags: HashMap<FaceKey, i64> = HashMap::new();
        for e in data.elements.iter().filter(|e| e.kind.dim() + 1 == dim) {
            boundary_tags.insert(face_key(&e.nodes), e.physical);
        }
        let nodes = data.nodes.clone();
        let mut volumes = Vec::with_capacity(cells.len());
        let mut centroids = Vec::with_capacity(cells.len());
        let mut faces: Vec<Face> = Vec::new();
        let mut face_of: HashMap<FaceKey, usize> = HashMap::new();
        for (ci, cell) in cells.iter().enumerate() {
            let pts: Vec<Vec3> = cell.nodes.iter().map(|&n| nodes[n]).collect();
            let p0 = average(pts.iter().copied());
            let locals = local_faces(cell.kind);
            let (vol, centroid) = if dim == 3 {
                let mut v = 0.0;
                let mut c = [0.0; 3];
                for lf in locals {
                    let fp: Vec<Vec3> = lf.iter().map(|&i| pts[i]).collect();
                    let (mut s, xf) = face_vector(3, &fp);
                    if dot(s, sub(xf, p0)) < 0.0 {
                        s = [-s[0], -s[1], -s[2]];
                    }
                    let vp = dot(s, sub(xf, p0)) / 3.0;
                    v += vp;
                    for d in 0..3 {
                        c[d] += vp * (0.75 * xf[d] + 0.25 * p0[d]);
                    }
                }
                (v, [c[0] / v, c[1] / v, c[2] / v])
            } else {
                // shoelace over the ordered polygon
                let mut a = 0.0;
                let mut c = [0.0; 3];
                for i in 0..pts.len() {
                    let p = pts[i];
                    let q = pts[(i + 1) % pts.len()];
                    let w = p[0] * q[1] - q[0] * p[1];
                    a += 0.5 * w;
                    c[0] += (p[0] + q[0]) * w / 6.0;
                    c[1] += (p[1] + q[1]) * w / 6.0;
                }
                (a.abs(), [c[0] / a, c[1] / a, 0.0])
            };
            let extent = pts
                .iter()
                .map(|p| norm(sub(*p, p0)))
                .fold(0.0, f64::max);
            if !(vol > 1e-12 * extent.powi(dim as i32)) || !vol.is_finite() {
                return Err(Error::Mesh(format!("cell {ci} has non-positive volume {vol}")));
            }
            volumes.push(vol);
            centroids.push(centroid);
            for lf in locals {
                let gn: Vec<usize> = lf.iter().map(|&i| cell.nodes[i]).collect();
                let key = face_key(&gn);
                match face_of.get(&key) {
                    None => {
                        let fp: Vec<Vec3> = gn.iter().map(|&n| nodes[n]).collect();
                        let (mut s, xf) = face_vector(dim, &fp);
                        if dot(s, sub(xf, centroid)) < 0.0 {
                            s = [-s[0], -s[1], -s[2]];
                        }
                        let area = norm(s);
                        if !(area > 0.0) {
                            return Err(Error::Mesh(format!("cell {ci} has a degenerate face")));
                        }
                        face_of.insert(key, faces.len());
                        faces.push(Face {
                            owner: ci,
                            neighbor: FaceSide::Boundary { patch: usize::MAX },
                            normal: [s[0] / area, s[1] / area, s[2] / area],
                            area,
                            centroid: xf,
                        });
                    }
                    Some(&fi) => {
                        let f = &mut faces[fi];
                        if let FaceSide::Cell { .. } = f.neighbor {
                            return Err(Error::Mesh(format!(
                                "face shared by more than two cells (cell {ci})"
                            )));
                        }
                        if f.owner == ci {
                            return Err(Error::Mesh(format!("cell {ci} repeats a face")));
                        }
                        f.neighbor = FaceSide::Cell {
                            cell: ci,
                            shift: [0.0; 3],
                        };
                    }
                }
            }
        }
        // boundary faces grouped by physical tag
        let mut patch_index: HashMap<i64, usize> = HashMap::new();
        let mut patches: Vec<Patch> = Vec::new();
        let mut keyed: Vec<(FaceKey, usize)> = face_of.into_iter().collect();
        keyed.sort_unstable_by_key(|(_, f)| *f);
        for (key, fi) in keyed {
            if !matches!(faces[fi].neighbor, FaceSide::Boundary { .. }) {
                continue;
            }
            let tag = boundary_tags.get(&key).copied();
            let slot = *patch_index.entry(tag.unwrap_or(i64::MIN)).or_insert_with(|| {
                let name = match tag {
                    Some(t) => data
                        .physical_name(dim - 1, t)
                        .map(str::to_string)
                        .unwrap_or_else(|| format!("patch_{t}")),
                    None => "boundary".to_string(),
                };
                patches.push(Patch {
                    name,
                    faces: Vec::new(),
                });
                patches.len() - 1
            });
            patches[slot].faces.push(fi);
            faces[fi].neighbor = FaceSide::Boundary { patch: slot };
        }
        let mut mesh = Self {
            dim,
            nodes,
            cells,
            volumes,
            centroids,
            faces,
            patches,
            cell_face_start: Vec::new(),
            cell_face_list: Vec::new(),
        };
        mesh.rebuild_cell_faces();
        Ok(mesh)
    }

    fn rebuild_cell_faces(&mut self) {
        let n = self.cells.len();
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (fi, f) in self.faces.iter().enumerate() {
            lists[f.owner].push((fi, 1.0));
            if let FaceSide::Cell { cell, .. } = f.neighbor {
                lists[cell].push((fi, -1.0));
            }
        }
        self.cell_face_start = Vec::with_capacity(n + 1);
        self.cell_face_list.clear();
        self.cell_face_start.push(0);
        for l in lists {
            self.cell_face_list.extend(l);
            self.cell_face_start.push(self.cell_face_list.len());
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Faces of a cell with orientation `+1` (owner) or `-1` (neighbor).
    #[inline]
    pub fn cell_faces(&self, cell: usize) -> &[(usize, f64)] {
        &self.cell_face_list[self.cell_face_start[cell]..self.cell_face_start[cell + 1]]
    }

    pub fn patch_id(&self, name: &str) -> Option<usize> {
        self.patches.iter().position(|p| p.name == name)
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn interior_face_count(&self) -> usize {
        self.faces
            .iter()
            .filter(|f| matches!(f.neighbor, FaceSide::Cell { .. }))
            .count()
    }

    pub fn boundary_face_count(&self) -> usize {
        self.faces.len() - self.interior_face_count()
    }

    /// Largest `|sum_f S_f| / sum_f |S_f|` over cells.
    pub fn max_closure_error(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| {
                let mut s = [0.0; 3];
                let mut total = 0.0;
                for &(fi, sign) in self.cell_faces(c) {
                    let f = &self.faces[fi];
                    for d in 0..3 {
                        s[d] += sign * f.area * f.normal[d];
                    }
                    total += f.area;
                }
                norm(s) / total
            })
            .fold(0.0, f64::max)
    }

    /// Joins two boundary patches that are translated copies of each other
    /// into a periodic seam. Faces of `b` are dropped; faces of `a` gain the
    /// matching cell of `b` as neighbor.
    pub fn make_periodic(&mut self, a: &str, b: &str) -> Result<()> {
        let ia = self
            .patch_id(a)
            .ok_or_else(|| Error::Mesh(format!("no boundary patch named '{a}'")))?;
        let ib = self
            .patch_id(b)
            .ok_or_else(|| Error::Mesh(format!("no boundary patch named '{b}'")))?;
        if ia == ib {
            return Err(Error::Mesh("a periodic pair needs two distinct patches".into()));
        }
        let fa = self.patches[ia].faces.clone();
        let fb = self.patches[ib].faces.clone();
        if fa.len() != fb.len() || fa.is_empty() {
            return Err(Error::Mesh(format!(
                "periodic patches '{a}' and '{b}' differ in face count"
            )));
        }
        let ca = average(fa.iter().map(|&f| self.faces[f].centroid));
        let cb = average(fb.iter().map(|&f| self.faces[f].centroid));
        let t = sub(cb, ca);
        let scale = fa
            .iter()
            .map(|&f| self.faces[f].area.powf(1.0 / (self.dim - 1) as f64))
            .fold(f64::INFINITY, f64::min);
        let tol = 1e-6 * scale;
        let quant = |x: Vec3| -> [i64; 3] {
            [
                (x[0] / tol).round() as i64,
                (x[1] / tol).round() as i64,
                (x[2] / tol).round() as i64,
            ]
        };
        let mut lookup: HashMap<[i64; 3], usize> = HashMap::new();
        for &f in &fb {
            lookup.insert(quant(self.faces[f].centroid), f);
        }
        let mut partner = Vec::with_capacity(fa.len());
        for &f in &fa {
            let target = self.faces[f].centroid;
            let x = [target[0] + t[0], target[1] + t[1], target[2] + t[2]];
            let g = lookup.get(&quant(x)).copied().or_else(|| {
                // fall back to a scan when rounding straddles a cell boundary
                fb.iter().copied().find(|&g| norm(sub(self.faces[g].centroid, x)) < tol)
            });
            let g = g.ok_or_else(|| {
                Error::Mesh(format!("no periodic partner for a face of '{a}' at {target:?}"))
            })?;
            if dot(self.faces[f].normal, self.faces[g].normal) > -1.0 + 1e-9 {
                return Err(Error::Mesh("periodic faces must have opposite normals".into()));
            }
            partner.push(g);
        }
        for (&f, &g) in fa.iter().zip(&partner) {
            let cell = self.faces[g].owner;
            self.faces[f].neighbor = FaceSide::Cell {
                cell,
                shift: [-t[0], -t[1], -t[2]],
            };
        }
        // drop the faces of b and renumber
        let mut keep = vec![true; self.faces.len()];
        for &g in &partner {
            keep[g] = false;
        }
        let mut new_index = vec![usize::MAX; self.faces.len()];
        let mut faces = Vec::with_capacity(self.faces.len() - partner.len());
        for (i, f) in self.faces.drain(..).enumerate() {
            if keep[i] {
                new_index[i] = faces.len();
                faces.push(f);
            }
        }
        self.faces = faces;
        let mut patches = Vec::new();
        let mut patch_map = vec![usize::MAX; self.patches.len()];
        for (pi, p) in self.patches.drain(..).enumerate() {
            if pi == ia || pi == ib {
                continue;
            }
            patch_map[pi] = patches.len();
            patches.push(Patch {
                name: p.name,
                faces: p.faces.iter().map(|&f| new_index[f]).collect(),
            });
        }
        for f in self.faces.iter_mut() {
            if let FaceSide::Boundary { patch } = f.neighbor {
                f.neighbor = FaceSide::Boundary {
                    patch: patch_map[patch],
                };
            }
        }
        self.patches = patches;
        self.rebuild_cell_faces();
        Ok(())
    }

    /// Centroid of the neighbor across `face` as seen from the owner side.
    pub fn neighbor_centroid(&self, face: usize) -> Option<Vec3> {
        match self.faces[face].neighbor {
            FaceSide::Cell { cell, shift } => {
                let c = self.centroids[cell];
                Some([c[0] + shift[0], c[1] + shift[1], c[2] + shift[2]])
            }
            FaceSide::Boundary { .. } => None,
        }
    }

    /// Owner centroid reflected across the face plane.
    pub fn mirrored_centroid(&self, face: usize) -> Vec3 {
        let f = &self.faces[face];
        let c = self.centroids[f.owner];
        let d = dot(sub(f.centroid, c), f.normal);
        [
            c[0] + 2.0 * d * f.normal[0],
            c[1] + 2.0 * d * f.normal[1],
            c[2] + 2.0 * d * f.normal[2],
        ]
    }

    pub fn summary(&self) -> MeshSummary {
        let mut kinds: Vec<(String, usize)> = Vec::new();
        for c in &self.cells {
            let name = format!("{:?}", c.kind).to_lowercase();
            match kinds.iter_mut().find(|(k, _)| *k == name) {
                Some((_, n)) => *n += 1,
                None => kinds.push((name, 1)),
            }
        }
        MeshSummary {
            dim: self.dim,
            nodes: self.nodes.len(),
            cells: self.n_cells(),
            cell_kinds: kinds,
            interior_faces: self.interior_face_count(),
            boundary_faces: self.boundary_face_count(),
            patches: self
                .patches
                .iter()
                .map(|p| (p.name.clone(), p.faces.len()))
                .collect(),
            total_volume: self.total_volume(),
            min_volume: self.volumes.iter().cloned().fold(f64::INFINITY, f64::min),
            max_volume: self.volumes.iter().cloned().fold(0.0, f64::max),
            max_closure_error: self.max_closure_error(),
        }
    }
}

/// Counts and quality figures reported by `mesh-info`.
#[derive(Clone, Debug, Serialize)]
pub struct MeshSummary {
    pub dim: usize,
    pub nodes: usize,
    pub cells: usize,
    pub cell_kinds: Vec<(String, usize)>,
    pub interior_faces: usize,
    pub boundary_faces: usize,
    pub patches: Vec<(String, usize)>,
    pub total_volume: f64,
    pub min_volume: f64,
    pub max_volume: f64,
    pub max_closure_error: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unstructured::msh::parse_msh_str;

    fn tet_pair() -> MeshData {
        MeshData {
            nodes: vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [1.0, 1.0, 1.0],
            ],
            elements: vec![
                Element {
                    kind: ElementKind::Tet,
                    nodes: vec![0, 1, 2, 3],
                    physical: 1,
                },
                Element {
                    kind: ElementKind::Tet,
                    nodes: vec![1, 2, 3, 4],
                    physical: 1,
                },
            ],
            physical_names: vec![],
        }
    }

    #[test]
    fn single_tet_volume() {
        let mut d = tet_pair();
        d.elements.pop();
        let m = UnstructuredMesh::from_data(&d).unwrap();
        assert!((m.volumes[0] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.faces.len(), 4);
        assert_eq!(m.patches.len(), 1);
        assert_eq!(m.patches[0].name, "boundary");
    }

    #[test]
    fn tet_pair_connectivity() {
        let m = UnstructuredMesh::from_data(&tet_pair()).unwrap();
        assert_eq!(m.interior_face_count(), 1);
        assert_eq!(m.boundary_face_count(), 6);
        let shared = m
            .faces
            .iter()
            .find(|f| matches!(f.neighbor, FaceSide::Cell { .. }))
            .unwrap();
        let FaceSide::Cell { cell, .. } = shared.neighbor else { unreachable!() };
        let d = sub(m.centroids[cell], m.centroids[shared.owner]);
        assert!(dot(d, shared.normal) > 0.0);
        assert!(m.max_closure_error() < 1e-14);
    }

    #[test]
    fn rejects_inverted_and_overshared() {
        let mut d = tet_pair();
        d.nodes[4] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        // node 4 now lies on face (1,2,3): zero-volume second tet
        assert!(UnstructuredMesh::from_data(&d).is_err());
        let mut d = tet_pair();
        d.elements.push(d.elements[1].clone());
        assert!(UnstructuredMesh::from_data(&d).is_err());
    }

    #[test]
    fn quad_mesh_2d() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n6\n1 0 0 0\n2 1 0 0\n3 2 0 0\n4 0 1 0\n5 1 1 0\n6 2 1 0\n$EndNodes\n$Elements\n3\n1 3 2 1 1 1 2 5 4\n2 3 2 1 1 2 3 6 5\n3 1 2 7 7 1 2\n$EndElements\n";
        let m = UnstructuredMesh::from_data(&parse_msh_str(text).unwrap()).unwrap();
        assert_eq!(m.dim, 2);
        assert_eq!(m.volumes, vec![1.0, 1.0]);
        assert_eq!(m.interior_face_count(), 1);
        assert_eq!(m.patches.len(), 2);
        assert_eq!(m.centroids[1], [1.5, 0.5, 0.0]);
        assert!(m.max_closure_error() < 1e-15);
    }
}
