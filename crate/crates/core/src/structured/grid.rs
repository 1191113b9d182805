//! Cartesian cell-centered grids, halo-padded storage and ghost-cell plans.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::phm::Vec3;

/// Boundary treatment along one axis (both ends).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Periodic,
    /// Ghost cells take a prescribed state (equilibrium beams for kinetic solvers).
    AnalyticDirichlet,
}

/// Uniform Cartesian block. Axes beyond `dim` have a single cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredGrid {
    pub dim: usize,
    pub n: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub bc: [BoundaryKind; 3],
}

impl StructuredGrid {
    /// `n` cells per active axis on `[lo, hi]^dim`.
    pub fn cube(dim: usize, n: usize, lo: f64, hi: f64, bc: BoundaryKind) -> Result<Self> {
        let mut dims = [1; 3];
        for d in dims.iter_mut().take(dim) {
            *d = n;
        }
        let h = (hi - lo) / n as f64;
        Self::new(dim, dims, [h; 3], [lo; 3], [bc; 3])
    }

    pub fn new(
        dim: usize,
        n: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        bc: [BoundaryKind; 3],
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid(format!("grid dimension must be 1, 2 or 3, got {dim}")));
        }
        for a in 0..3 {
            if a < dim {
                if n[a] == 0 {
                    return Err(invalid("grid needs at least one cell per axis"));
                }
                if !(spacing[a] > 0.0) {
                    return Err(invalid("grid spacing must be positive"));
                }
            } else if n[a] != 1 {
                return Err(invalid(format!(
                    "axis {a} is inactive in a {dim}D grid and must have one cell"
                )));
            }
        }
        Ok(Self {
            dim,
            n,
            spacing,
            origin,
            bc,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Volume (area, length) of one cell over the active axes.
    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    #[inline]
    pub fn linear(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    #[inline]
    pub fn ijk(&self, c: usize) -> [usize; 3] {
        let i = c % self.n[0];
        let j = (c / self.n[0]) % self.n[1];
        let k = c / (self.n[0] * self.n[1]);
        [i, j, k]
    }

    /// Center of cell `(i, j, k)`, allowing ghost indices. Inactive axes sit
    /// at the origin.
    #[inline]
    pub fn center(&self, idx: [isize; 3]) -> Vec3 {
        let mut x = [0.0; 3];
        for a in 0..3 {
            x[a] = if a < self.dim {
                self.origin[a] + (idx[a] as f64 + 0.5) * self.spacing[a]
            } else {
                self.origin[a]
            };
        }
        x
    }

    pub fn cell_center(&self, c: usize) -> Vec3 {
        let [i, j, k] = self.ijk(c);
        self.center([i as isize, j as isize, k as isize])
    }

    /// Active axes all share one spacing.
    pub fn is_uniform(&self) -> bool {
        let h = self.spacing[0];
        self.spacing[..self.dim]
            .iter()
            .all(|s| (s - h).abs() <= 1e-12 * h)
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing[..self.dim].iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn all_periodic(&self) -> bool {
        self.bc[..self.dim].iter().all(|b| *b == BoundaryKind::Periodic)
    }
}

/// Index arithmetic for an array padded by `halo` ghost layers on each
/// active axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Padded {
    pub n: [usize; 3],
    pub halo: [usize; 3],
    pub ext: [usize; 3],
    pub stride: [usize; 3],
}

impl Padded {
    pub fn new(grid: &StructuredGrid, halo: usize) -> Self {
        let mut h = [0; 3];
        let mut ext = [1; 3];
        for a in 0..3 {
            if a < grid.dim {
                h[a] = halo;
            }
            ext[a] = grid.n[a] + 2 * h[a];
        }
        Self {
            n: grid.n,
            halo: h,
            ext,
            stride: [1, ext[0], ext[0] * ext[1]],
        }
    }

    pub fn len(&self) -> usize {
        self.ext[0] * self.ext[1] * self.ext[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Padded index of interior coordinates (ghosts are negative or >= n).
    #[inline]
    pub fn at(&self, i: isize, j: isize, k: isize) -> usize {
        let p = (i + self.halo[0] as isize)
            + (j + self.halo[1] as isize) * self.stride[1] as isize
            + (k + self.halo[2] as isize) * self.stride[2] as isize;
        p as usize
    }

    /// Signed offset of a displacement in padded storage.
    #[inline]
    pub fn offset(&self, d: [isize; 3]) -> isize {
        d[0] + d[1] * self.stride[1] as isize + d[2] * self.stride[2] as isize
    }

    /// Interior coordinates of padded row `r` (a run along x), if interior.
    #[inline]
    pub fn row_interior(&self, r: usize) -> Option<(usize, usize)> {
        let jp = r % self.ext[1];
        let kp = r / self.ext[1];
        let (hy, hz) = (self.halo[1], self.halo[2]);
        if jp < hy || jp >= hy + self.n[1] || kp < hz || kp >= hz + self.n[2] {
            return None;
        }
        Some((jp - hy, kp - hz))
    }

    /// Copies padded interior values to a dense cell-ordered vector.
    pub fn gather<T: Copy>(&self, padded: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n[0] * self.n[1] * self.n[2]);
        for k in 0..self.n[2] {
            for j in 0..self.n[1] {
                let start = self.at(0, j as isize, k as isize);
                out.extend_from_slice(&padded[start..start + self.n[0]]);
            }
        }
        out
    }

    /// Writes dense cell-ordered values into the interior of `padded`.
    pub fn scatter<T: Copy>(&self, dense: &[T], padded: &mut [T]) {
        let nx = self.n[0];
        for k in 0..self.n[2] {
            for j in 0..self.n[1] {
                let start = self.at(0, j as isize, k as isize);
                let c = nx * (j + self.n[1] * k);
                padded[start..start + nx].copy_from_slice(&dense[c..c + nx]);
            }
        }
    }
}

/// Where a ghost cell takes its value from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HaloSource {
    /// Periodic image: padded index of an interior cell.
    Copy(usize),
    /// Prescribed state at this ghost center.
    Dirichlet(Vec3),
}

/// Precomputed list of ghost cells and their sources.
#[derive(Clone, Debug)]
pub struct HaloPlan {
    pub entries: Vec<(usize, HaloSource)>,
}

impl HaloPlan {
    pub fn new(grid: &StructuredGrid, pad: &Padded) -> Self {
        let mut entries = Vec::new();
        let lo = |a: usize| -(pad.halo[a] as isize);
        let hi = |a: usize| (pad.n[a] + pad.halo[a]) as isize;
        for k in lo(2)..hi(2) {
            for j in lo(1)..hi(1) {
                for i in lo(0)..hi(0) {
                    let idx = [i, j, k];
                    let ghost_axes: Vec<usize> = (0..3)
                        .filter(|&a| idx[a] < 0 || idx[a] >= pad.n[a] as isize)
                        .collect();
                    if ghost_axes.is_empty() {
                        continue;
                    }
                    let dst = pad.at(i, j, k);
                    let dirichlet = ghost_axes
                        .iter()
                        .any(|&a| grid.bc[a] == BoundaryKind::AnalyticDirichlet);
                    let mut wrapped = idx;
                    for &a in &ghost_axes {
                        if grid.bc[a] == BoundaryKind::Periodic {
                            wrapped[a] = idx[a].rem_euclid(pad.n[a] as isize);
                        }
                    }
                    let src = if dirichlet {
                        HaloSource::Dirichlet(grid.center(wrapped))
                    } else {
                        HaloSource::Copy(pad.at(wrapped[0], wrapped[1], wrapped[2]))
                    };
                    entries.push((dst, src));
                }
            }
        }
        Self { entries }
    }

    pub fn has_dirichlet(&self) -> bool {
        self.entries
            .iter()
            .any(|(_, s)| matches!(s, HaloSource::Dirichlet(_)))
    }

    /// Fills ghosts: periodic copies, and `dirichlet(x)` elsewhere.
    pub fn fill<T: Copy>(&self, data: &mut [T], mut dirichlet: impl FnMut(Vec3) -> T) {
        for &(dst, src) in &self.entries {
            data[dst] = match src {
                HaloSource::Copy(p) => data[p],
                HaloSource::Dirichlet(x) => dirichlet(x),
            };
        }
    }
}
