//! Solvers on Cartesian grids.

pub mod beam;
pub mod fdtd;
pub mod fvs;
pub mod grid;

use rayon::prelude::*;

use crate::phm::PhmState;

pub use beam::{BeamSetup, BeamSolver, BeamTransport};
pub use fdtd::{FdtdSetup, FdtdSolver};
pub use fvs::{FvsSetup, FvsSolver, Reconstruction, SlopeLimiter};
pub use grid::{BoundaryKind, HaloPlan, Padded, StructuredGrid};

/// Applies `op(padded_index, &mut cell)` to every interior cell, in parallel
/// over rows.
pub(crate) fn par_interior<T: Send>(
    pad: &Padded,
    data: &mut [T],
    op: impl Fn(usize, &mut T) + Sync,
) {
    let nx = pad.n[0];
    let h0 = pad.halo[0];
    let ext0 = pad.ext[0];
    data.par_chunks_mut(ext0).enumerate().for_each(|(r, row)| {
        if pad.row_interior(r).is_none() {
            return;
        }
        let base = r * ext0;
        for (i, cell) in row[h0..h0 + nx].iter_mut().enumerate() {
            op(base + h0 + i, cell);
        }
    });
}

/// Largest absolute interior value; NaN if any interior value is not finite.
pub(crate) fn padded_max_abs(pad: &Padded, u: &[PhmState]) -> f64 {
    let nx = pad.n[0];
    let h0 = pad.halo[0];
    let mut m = 0.0f64;
    for (r, row) in u.chunks(pad.ext[0]).enumerate() {
        if pad.row_interior(r).is_none() {
            continue;
        }
        for s in &row[h0..h0 + nx] {
            for v in s.0 {
                if !v.is_finite() {
                    return f64::NAN;
                }
                m = m.max(v.abs());
            }
        }
    }
    m
}
