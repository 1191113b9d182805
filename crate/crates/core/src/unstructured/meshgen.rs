//! Scripted generators for the bundled meshes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::phm::Vec3;

use super::msh::{Element, ElementKind, MeshData};

const SIDE_NAMES: [[&str; 2]; 3] = [["xmin", "xmax"], ["ymin", "ymax"], ["zmin", "zmax"]];

/// Deduplicating node table keyed by exact coordinates.
#[derive(Default)]
struct NodeTable {
    nodes: Vec<Vec3>,
    index: HashMap<[u64; 3], usize>,
}

impl NodeTable {
    fn get(&mut self, x: Vec3) -> usize {
        // +0.0 folds -0.0 into 0.0
        let key = [(x[0] + 0.0).to_bits(), (x[1] + 0.0).to_bits(), (x[2] + 0.0).to_bits()];
        *self.index.entry(key).or_insert_with(|| {
            self.nodes.push(x);
            self.nodes.len() - 1
        })
    }
}

fn names_for_box(dim: usize) -> Vec<(usize, i64, String)> {
    let mut names = Vec::new();
    for a in 0..dim {
        for s in 0..2 {
            names.push((dim - 1, (2 * a + s + 1) as i64, SIDE_NAMES[a][s].to_string()));
        }
    }
    names.push((dim, 100, "domain".to_string()));
    names
}

fn lattice_point(lo: Vec3, hi: Vec3, n: [usize; 3], idx: [usize; 3]) -> Vec3 {
    let mut x = [0.0; 3];
    for a in 0..3 {
        x[a] = if n[a] == 0 {
            lo[a]
        } else {
            lo[a] + (hi[a] - lo[a]) * idx[a] as f64 / n[a] as f64
        };
    }
    x
}

/// Structured block of hexahedra (`tets = false`) or of Kuhn tetrahedra,
/// six per cube, with one boundary patch per side.
pub fn box_mesh_3d(n: [usize; 3], lo: Vec3, hi: Vec3, tets: bool) -> Result<MeshData> {
    if n.iter().any(|&k| k == 0) {
        return Err(invalid("box mesh needs at least one cell per axis"));
    }
    let mut table = NodeTable::default();
    let id = |t: &mut NodeTable, i: usize, j: usize, k: usize| {
        t.get(lattice_point(lo, hi, n, [i, j, k]))
    };
    let mut elements = Vec::new();
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let c = [
                    id(&mut table, i, j, k),
                    id(&mut table, i + 1, j, k),
                    id(&mut table, i + 1, j + 1, k),
                    id(&mut table, i, j + 1, k),
                    id(&mut table, i, j, k + 1),
                    id(&mut table, i + 1, j, k + 1),
                    id(&mut table, i + 1, j + 1, k + 1),
                    id(&mut table, i, j + 1, k + 1),
                ];
                if tets {
                    // Kuhn split: paths from corner 000 to 111 along the axes
                    let corner = |b: [usize; 3]| -> usize {
                        match b {
                            [0, 0, 0] => c[0],
                            [1, 0, 0] => c[1],
                            [1, 1, 0] => c[2],
                            [0, 1, 0] => c[3],
                            [0, 0, 1] => c[4],
                            [1, 0, 1] => c[5],
                            [1, 1, 1] => c[6],
                            _ => c[7],
                        }
                    };
                    for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                        let mut b = [0usize; 3];
                        let mut nodes = vec![corner(b)];
                        for &a in &perm {
                            b[a] = 1;
                            nodes.push(corner(b));
                        }
                        elements.push(Element {
                            kind: ElementKind::Tet,
                            nodes,
                            physical: 100,
                        });
                    }
                } else {
                    elements.push(Element {
                        kind: ElementKind::Hex,
                        nodes: c.to_vec(),
                        physical: 100,
                    });
                }
            }
        }
    }
    // boundary faces, split into triangles for tet meshes
    for a in 0..3 {
        let (b, cax) = ((a + 1) % 3, (a + 2) % 3);
        for s in 0..2 {
            let tag = (2 * a + s + 1) as i64;
            for q in 0..n[cax] {
                for p in 0..n[b] {
                    let corner = |dp: usize, dq: usize, t: &mut NodeTable| {
                        let mut idx = [0; 3];
                        idx[a] = s * n[a];
                        idx[b] = p + dp;
                        idx[cax] = q + dq;
                        id(t, idx[0], idx[1], idx[2])
                    };
                    let quad = [
                        corner(0, 0, &mut table),
                        corner(1, 0, &mut table),
                        corner(1, 1, &mut table),
                        corner(0, 1, &mut table),
                    ];
                    if tets {
                        // both diagonals occur on Kuhn faces; pick the one through
                        // the lowest and highest lattice corners
                        elements.push(Element {
                            kind: ElementKind::Triangle,
                            nodes: vec![quad[0], quad[1], quad[2]],
                            physical: tag,
                        });
                        elements.push(Element {
                            kind: ElementKind::Triangle,
                            nodes: vec![quad[0], quad[2], quad[3]],
                            physical: tag,
                        });
                    } else {
                        elements.push(Element {
                            kind: ElementKind::Quad,
                            nodes: quad.to_vec(),
                            physical: tag,
                        });
                    }
                }
            }
        }
    }
    Ok(MeshData {
        nodes: table.nodes,
        elements,
        physical_names: names_for_box(3),
    })
}

/// Rectangle of quadrilaterals (`tris = false`) or triangles, with one
/// boundary patch per side.
pub fn rect_mesh_2d(n: [usize; 2], lo: [f64; 2], hi: [f64; 2], tris: bool) -> Result<MeshData> {
    if n.iter().any(|&k| k == 0) {
        return Err(invalid("rectangle mesh needs at least one cell per axis"));
    }
    let lo3 = [lo[0], lo[1], 0.0];
    let hi3 = [hi[0], hi[1], 0.0];
    let n3 = [n[0], n[1], 0];
    let mut table = NodeTable::default();
    let id = |t: &mut NodeTable, i: usize, j: usize| t.get(lattice_point(lo3, hi3, n3, [i, j, 0]));
    let mut elements = Vec::new();
    for j in 0..n[1] {
        for i in 0..n[0] {
            let c = [
                id(&mut table, i, j),
                id(&mut table, i + 1, j),
                id(&mut table, i + 1, j + 1),
                id(&mut table, i, j + 1),
            ];
            if tris {
                elements.push(Element {
                    kind: ElementKind::Triangle,
                    nodes: vec![c[0], c[1], c[2]],
                    physical: 100,
                });
                elements.push(Element {
                    kind: ElementKind::Triangle,
                    nodes: vec![c[0], c[2], c[3]],
                    physical: 100,
                });
            } else {
                elements.push(Element {
                    kind: ElementKind::Quad,
                    nodes: c.to_vec(),
                    physical: 100,
                });
            }
        }
    }
    for i in 0..n[0] {
        for (s, j) in [(0, 0), (1, n[1])] {
            let e = vec![id(&mut table, i, j), id(&mut table, i + 1, j)];
            elements.push(Element {
                kind: ElementKind::Line,
                nodes: e,
                physical: (3 + s) as i64,
            });
        }
    }
    for j in 0..n[1] {
        for (s, i) in [(0, 0), (1, n[0])] {
            let e = vec![id(&mut table, i, j), id(&mut table, i, j + 1)];
            elements.push(Element {
                kind: ElementKind::Line,
                nodes: e,
                physical: (1 + s) as i64,
            });
        }
    }
    Ok(MeshData {
        nodes: table.nodes,
        elements,
        physical_names: names_for_box(2),
    })
}

/// Rotates all nodes about the z-axis by `angle` radians.
pub fn rotate_z(data: &mut MeshData, angle: f64) {
    let (s, c) = angle.sin_cos();
    for x in data.nodes.iter_mut() {
        *x = [c * x[0] - s * x[1], s * x[0] + c * x[1], x[2]];
    }
}

/// Parameters of the body-fitted sphere-in-box hexahedral mesh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SphereMeshSpec {
    pub radius: f64,
    /// Half-width of the cubic outer box.
    pub half_width: f64,
    /// Cells along each edge of the six cube-sphere blocks.
    pub n_angular: usize,
    pub n_radial: usize,
    /// Thickness of the first cell layer along the axis directions.
    pub first_layer: f64,
}

impl Default for SphereMeshSpec {
    fn default() -> Self {
        Self {
            radius: 1.0,
            half_width: 5.0,
            n_angular: 24,
            n_radial: 30,
            first_layer: 0.06,
        }
    }
}

/// Geometric stretching ratio with first step `h1` for `n` steps over `len`.
fn growth_ratio(h1: f64, len: f64, n: usize) -> f64 {
    let target = h1 / len;
    if (target * n as f64 - 1.0).abs() < 1e-12 {
        return 1.0;
    }
    let f = |r: f64| (r - 1.0) / (r.powi(n as i32) - 1.0) - target;
    let (mut lo, mut hi) = if target * (n as f64) < 1.0 {
        (1.0 + 1e-12, 10.0)
    } else {
        (1e-6, 1.0 - 1e-12)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f(lo) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Six-block cube-sphere hexahedral mesh between a sphere (patch `sphere`)
/// and a concentric box (patch `farfield`).
pub fn sphere_in_box(spec: &SphereMeshSpec) -> Result<MeshData> {
    let SphereMeshSpec {
        radius,
        half_width,
        n_angular: na,
        n_radial: nr,
        first_layer,
    } = *spec;
    if !(radius > 0.0 && half_width > radius * 3f64.sqrt().recip() * 1.0001) {
        return Err(invalid("the box must enclose the sphere"));
    }
    if na < 2 || nr < 1 || !(first_layer > 0.0) {
        return Err(invalid("sphere mesh needs n_angular >= 2, n_radial >= 1 and a positive first layer"));
    }
    let ratio = growth_ratio(first_layer, half_width - radius, nr);
    let w: Vec<f64> = (0..=nr)
        .map(|k| {
            if k == nr {
                1.0
            } else if (ratio - 1.0).abs() < 1e-12 {
                k as f64 / nr as f64
            } else {
                (ratio.powi(k as i32) - 1.0) / (ratio.powi(nr as i32) - 1.0)
            }
        })
        .collect();
    // equiangular face coordinates, exactly odd-symmetric
    let t: Vec<f64> = (0..=na)
        .map(|i| {
            let m = 2 * i as i64 - na as i64;
            let v = (std::f64::consts::FRAC_PI_4 * (m.unsigned_abs() as f64) / na as f64).tan();
            let v = if m.unsigned_abs() as usize == na { 1.0 } else { v };
            if m < 0 {
                -v
            } else {
                v
            }
        })
        .collect();
    let mut table = NodeTable::default();
    let mut elements = Vec::new();
    for axis in 0..3 {
        for side in [-1.0f64, 1.0] {
            let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
            let point = |i: usize, j: usize, k: usize| -> Vec3 {
                let mut q = [0.0; 3];
                q[axis] = side;
                q[b] = t[i];
                q[c] = t[j];
                let len = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
                let mut x = [0.0; 3];
                for d in 0..3 {
                    let inner = radius * q[d] / len;
                    let outer = half_width * q[d];
                    x[d] = inner + w[k] * (outer - inner);
                }
                x
            };
            let mut id = |i, j, k| table.get(point(i, j, k));
            for k in 0..nr {
                for j in 0..na {
                    for i in 0..na {
                        let nodes = vec![
                            id(i, j, k),
                            id(i + 1, j, k),
                            id(i + 1, j + 1, k),
                            id(i, j + 1, k),
                            id(i, j, k + 1),
                            id(i + 1, j, k + 1),
                            id(i + 1, j + 1, k + 1),
                            id(i, j + 1, k + 1),
                        ];
                        if k == 0 {
                            elements.push(Element {
                                kind: ElementKind::Quad,
                                nodes: nodes[..4].to_vec(),
                                physical: 1,
                            });
                        }
                        if k + 1 == nr {
                            elements.push(Element {
                                kind: ElementKind::Quad,
                                nodes: nodes[4..].to_vec(),
                                physical: 2,
                            });
                        }
                        elements.push(Element {
                            kind: ElementKind::Hex,
                            nodes,
                            physical: 100,
                        });
                    }
                }
            }
        }
    }
    Ok(MeshData {
        nodes: table.nodes,
        elements,
        physical_names: vec![
            (2, 1, "sphere".into()),
            (2, 2, "farfield".into()),
            (3, 100, "air".into()),
        ],
    })
}
