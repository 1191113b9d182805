//! Cell gradients as precomputed per-face weights.
//!
//! Every method reduces to `grad u_i = sum_f w_{i,f} (u_f' - u_i)` where `u_f'`
//! is the value across face `f` (neighbor cell or ghost). The weights are
//! stored in the same order as [`UnstructuredMesh::cell_faces`].

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::phm::Vec3;

use super::mesh::{FaceSide, UnstructuredMesh};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// Inverse-distance weighted least squares over face neighbors.
    #[default]
    LeastSquares,
    GreenGauss,
}

#[derive(Clone, Debug)]
pub struct GradientOperator {
    starts: Vec<usize>,
    weights: Vec<Vec3>,
    /// Cells whose least-squares system was singular and used Green-Gauss.
    pub fallback_cells: Vec<usize>,
}

/// Position of whatever sits across `face` from `cell`.
pub fn across(mesh: &UnstructuredMesh, cell: usize, face: usize) -> Vec3 {
    let f = &mesh.faces[face];
    if f.owner == cell {
        mesh.neighbor_centroid(face)
            .unwrap_or_else(|| mesh.mirrored_centroid(face))
    } else {
        let FaceSide::Cell { shift, .. } = f.neighbor else {
            unreachable!("boundary faces have no neighbor cell")
        };
        let c = mesh.centroids[f.owner];
        [c[0] - shift[0], c[1] - shift[1], c[2] - shift[2]]
    }
}

impl GradientOperator {
    pub fn new(mesh: &UnstructuredMesh, method: GradientMethod) -> Self {
        let mut starts = Vec::with_capacity(mesh.n_cells() + 1);
        let mut weights = Vec::new();
        let mut fallback_cells = Vec::new();
        starts.push(0);
        for c in 0..mesh.n_cells() {
            let xc = mesh.centroids[c];
            let entries = mesh.cell_faces(c);
            let w = match method {
                GradientMethod::LeastSquares => {
                    let d: Vec<Vec3> = entries
                        .iter()
                        .map(|&(f, _)| {
                            let x = across(mesh, c, f);
                            [x[0] - xc[0], x[1] - xc[1], x[2] - xc[2]]
                        })
                        .collect();
                    least_squares_weights(mesh.dim, &d)
                }
                GradientMethod::GreenGauss => None,
            };
            let w = w.unwrap_or_else(|| {
                if method == GradientMethod::LeastSquares {
                    fallback_cells.push(c);
                }
                let v = mesh.volumes[c];
                entries
                    .iter()
                    .map(|&(f, sign)| {
                        let face = &mesh.faces[f];
                        let s = sign * face.area / (2.0 * v);
                        [s * face.normal[0], s * face.normal[1], s * face.normal[2]]
                    })
                    .collect()
            });
            weights.extend(w);
            starts.push(weights.len());
        }
        Self {
            starts,
            weights,
            fallback_cells,
        }
    }

    #[inline]
    pub fn weights(&self, cell: usize) -> &[Vec3] {
        &self.weights[self.starts[cell]..self.starts[cell + 1]]
    }
}

fn least_squares_weights(dim: usize, d: &[Vec3]) -> Option<Vec<Vec3>> {
    // minimize sum_f (d_f . g - du_f)^2 / |d_f|^2
    let w2: Vec<f64> = d
        .iter()
        .map(|v| 1.0 / (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
        .collect();
    if dim == 3 {
        let mut m = Matrix3::zeros();
        for (v, w) in d.iter().zip(&w2) {
            let x = Vector3::from(*v);
            m += x * x.transpose() * *w;
        }
        let scale = m.trace() / 3.0;
        if !(m.determinant() > 1e-10 * scale * scale * scale) {
            return None;
        }
        let inv = m.try_inverse()?;
        Some(
            d.iter()
                .zip(&w2)
                .map(|(v, w)| {
                    let g = inv * Vector3::from(*v) * *w;
                    [g[0], g[1], g[2]]
                })
                .collect(),
        )
    } else {
        let mut m = Matrix2::zeros();
        for (v, w) in d.iter().zip(&w2) {
            let x = Vector2::new(v[0], v[1]);
            m += x * x.transpose() * *w;
        }
        let scale = m.trace() / 2.0;
        if !(m.determinant() > 1e-10 * scale * scale) {
            return None;
        }
        let inv = m.try_inverse()?;
        Some(
            d.iter()
                .zip(&w2)
                .map(|(v, w)| {
                    let g = inv * Vector2::new(v[0], v[1]) * *w;
                    [g[0], g[1], 0.0]
                })
                .collect(),
        )
    }
}

/// Gradient of a scalar cell field. Boundary ghosts copy the owner value.
pub fn gradients(mesh: &UnstructuredMesh, field: &[f64], method: GradientMethod) -> Result<Vec<Vec3>> {
    if field.len() != mesh.n_cells() {
        return Err(invalid("field length does not match the mesh"));
    }
    let op = GradientOperator::new(mesh, method);
    Ok((0..mesh.n_cells())
        .map(|c| {
            let mut g = [0.0; 3];
            for (&(f, sign), w) in mesh.cell_faces(c).iter().zip(op.weights(c)) {
                let face = &mesh.faces[f];
                let other = match face.neighbor {
                    FaceSide::Cell { cell, .. } => {
                        if sign > 0.0 {
                            field[cell]
                        } else {
                            field[face.owner]
                        }
                    }
                    FaceSide::Boundary { .. } => field[c],
                };
                let du = other - field[c];
                for d in 0..3 {
                    g[d] += w[d] * du;
                }
            }
            g
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unstructured::meshgen::box_mesh_3d;

    fn tet_box(n: usize) -> UnstructuredMesh {
        let data = box_mesh_3d([n, n, n], [0.0; 3], [1.0; 3], true).unwrap();
        UnstructuredMesh::from_data(&data).unwrap()
    }

    fn interior(mesh: &UnstructuredMesh, c: usize) -> bool {
        mesh.cell_faces(c)
            .iter()
            .all(|&(f, _)| matches!(mesh.faces[f].neighbor, FaceSide::Cell { .. }))
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let m = tet_box(2);
        for method in [GradientMethod::LeastSquares, GradientMethod::GreenGauss] {
            let g = gradients(&m, &vec![3.5; m.n_cells()], method).unwrap();
            assert!(g.iter().flatten().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn least_squares_reproduces_linear_fields() {
        let m = tet_box(3);
        let field: Vec<f64> = m.centroids.iter().map(|x| 2.0 * x[0] - x[1] + 0.5 * x[2]).collect();
        let g = gradients(&m, &field, GradientMethod::LeastSquares).unwrap();
        let mut checked = 0;
        for c in (0..m.n_cells()).filter(|&c| interior(&m, c)) {
            for (d, want) in [2.0, -1.0, 0.5].iter().enumerate() {
                assert!((g[c][d] - want).abs() < 1e-10);
            }
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn quadratic_field_error_halves_under_refinement() {
        let err = |n: usize| {
            let m = tet_box(n);
            let field: Vec<f64> = m.centroids.iter().map(|x| x[0] * x[0]).collect();
            let g = gradients(&m, &field, GradientMethod::LeastSquares).unwrap();
            (0..m.n_cells())
                .filter(|&c| interior(&m, c))
                .map(|c| (g[c][0] - 2.0 * m.centroids[c][0]).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(4), err(8));
        assert!(e2 < e1);
        let ratio = e1 / e2;
        assert!(ratio > 1.6 && ratio < 2.6, "ratio {ratio}");
    }
}
