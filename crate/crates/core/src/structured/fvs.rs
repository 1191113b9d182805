//! Flux-vector-splitting finite volumes for the PHM system on Cartesian grids.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::phm::{source_step, Axis, FaceFrame, PhmParams, PhmState, UpwindFlux, Vec3, NVARS};
use crate::problem::{FieldFn, PhaseTimings, SourceModel, Stepper};

use super::grid::{HaloPlan, Padded, StructuredGrid};
use super::{padded_max_abs, par_interior};

/// Slope limiter for linear reconstruction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeLimiter {
    /// Unlimited (central) slopes.
    #[default]
    None,
    Minmod,
}

impl SlopeLimiter {
    #[inline]
    pub fn slope(self, backward: f64, forward: f64) -> f64 {
        match self {
            SlopeLimiter::None => 0.5 * (backward + forward),
            SlopeLimiter::Minmod => {
                if backward * forward <= 0.0 {
                    0.0
                } else if backward.abs() < forward.abs() {
                    backward
                } else {
                    forward
                }
            }
        }
    }
}

/// Interface-state reconstruction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reconstruction {
    /// Piecewise constant states with forward Euler in time.
    #[default]
    FirstOrder,
    /// Piecewise linear states with a two-stage midpoint step.
    Linear { limiter: SlopeLimiter },
}

impl Reconstruction {
    pub fn halo(self) -> usize {
        match self {
            Reconstruction::FirstOrder => 1,
            Reconstruction::Linear { .. } => 2,
        }
    }
}

/// Largest stable FVS CFL number `c_max dt / dx` for a grid dimension.
pub fn fvs_cfl_limit(dim: usize) -> f64 {
    if dim == 1 {
        1.0
    } else {
        0.5
    }
}

#[derive(Clone)]
pub struct FvsSetup {
    pub grid: StructuredGrid,
    pub params: PhmParams,
    /// `c_max dt / dx` with `c_max` the largest macroscopic wave speed.
    pub cfl: f64,
    pub reconstruction: Reconstruction,
    /// Refuse to run above the stability limit instead of warning.
    pub strict_cfl: bool,
    pub sources: SourceModel,
    pub boundary: Option<FieldFn>,
}

pub struct FvsSolver {
    grid: StructuredGrid,
    pad: Padded,
    halo: HaloPlan,
    params: PhmParams,
    flux: UpwindFlux,
    frames: [FaceFrame; 3],
    reconstruction: Reconstruction,
    sources: SourceModel,
    boundary: Option<FieldFn>,
    sigma: Vec<f64>,
    u: Vec<PhmState>,
    stage: Vec<PhmState>,
    rhs: Vec<PhmState>,
    time: f64,
    dt: f64,
    steps: usize,
    warnings: Vec<String>,
    timings: PhaseTimings,
}

impl FvsSolver {
    pub fn new(setup: FvsSetup, initial: impl Fn(Vec3) -> PhmState + Sync) -> Result<Self> {
        let FvsSetup {
            grid,
            params,
            cfl,
            reconstruction,
            strict_cfl,
            sources,
            boundary,
        } = setup;
        params.validate()?;
        if !(cfl > 0.0) {
            return Err(invalid(format!("CFL number must be positive, got {cfl}")));
        }
        let mut warnings = Vec::new();
        let limit = fvs_cfl_limit(grid.dim);
        if cfl > limit + 1e-12 {
            let msg = format!(
                "FVS CFL {cfl} exceeds the stability limit {limit} for {}D grids",
                grid.dim
            );
            if strict_cfl {
                return Err(Error::Cfl(msg));
            }
            warnings.push(msg);
        }
        let dt = cfl * grid.min_spacing() / params.max_wave_speed();
        let pad = Padded::new(&grid, reconstruction.halo());
        let halo = HaloPlan::new(&grid, &pad);
        if halo.has_dirichlet() && boundary.is_none() {
            return Err(invalid("Dirichlet boundaries need a boundary state"));
        }
        let dense: Vec<PhmState> = (0..grid.n_cells())
            .into_par_iter()
            .map(|c| initial(grid.cell_center(c)))
            .collect();
        let mut u = vec![PhmState::ZERO; pad.len()];
        pad.scatter(&dense, &mut u);
        let sigma = match &sources.sigma {
            Some(s) => (0..grid.n_cells()).map(|c| s(grid.cell_center(c))).collect(),
            None => Vec::new(),
        };
        let frames = Axis::ALL.map(|a| FaceFrame::new_unchecked(a.unit()));
        Ok(Self {
            flux: UpwindFlux::new(&params)?,
            grid,
            pad,
            halo,
            params,
            frames,
            reconstruction,
            sources,
            boundary,
            sigma,
            stage: u.clone(),
            rhs: u.clone(),
            u,
            time: 0.0,
            dt,
            steps: 0,
            warnings,
            timings: PhaseTimings::default(),
        })
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    /// Non-fatal problems noticed at construction (e.g. CFL above the limit).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn fill_halo(data: &mut [PhmState], halo: &HaloPlan, boundary: &Option<FieldFn>, t: f64) {
        halo.fill(data, |x| boundary.as_ref().map_or(PhmState::ZERO, |b| b(x, t)));
    }

    /// Flux divergence `-sum_a (F_{a,+} - F_{a,-}) / dx_a` of `src` into `rhs`.
    fn residual(&self, src: &[PhmState], rhs: &mut [PhmState]) {
        let dim = self.grid.dim;
        let pad = self.pad;
        let recon = self.reconstruction;
        let flux = &self.flux;
        let frames = &self.frames;
        let spacing = self.grid.spacing;
        par_interior(&self.pad, rhs, |p, out| {
            let mut acc = PhmState::ZERO;
            for a in 0..dim {
                let e = pad.stride[a];
                let face = |l: usize| -> PhmState {
                    let r = l + e;
                    let (ul, ur) = match recon {
                        Reconstruction::FirstOrder => (src[l], src[r]),
                        Reconstruction::Linear { limiter } => {
                            let mut ul = src[l];
                            let mut ur = src[r];
                            for c in 0..NVARS {
                                let sl = limiter.slope(src[l][c] - src[l - e][c], src[r][c] - src[l][c]);
                                let sr = limiter.slope(src[r][c] - src[l][c], src[r + e][c] - src[r][c]);
                                ul[c] += 0.5 * sl;
                                ur[c] -= 0.5 * sr;
                            }
                            (ul, ur)
                        }
                    };
                    flux.normal(&ul, &ur, &frames[a])
                };
                let diff = face(p) - face(p - e);
                acc = acc.axpy(-1.0 / spacing[a], &diff);
            }
            *out = acc;
        });
    }

    fn source(&mut self, dt: f64) {
        let t_half = self.time + 0.5 * dt;
        let grid = &self.grid;
        let pad = self.pad;
        let params = &self.params;
        let sources = &self.sources;
        let sigma = &self.sigma;
        let nx = pad.n[0];
        let h0 = pad.halo[0];
        self.u
            .par_chunks_mut(pad.ext[0])
            .enumerate()
            .for_each(|(r, row)| {
                let Some((j, k)) = pad.row_interior(r) else {
                    return;
                };
                for i in 0..nx {
                    let c = grid.linear(i, j, k);
                    let s = if sigma.is_empty() { 0.0 } else { sigma[c] };
                    let src = sources.densities(grid.cell_center(c), t_half, s);
                    row[h0 + i] = source_step(&row[h0 + i], &src, dt, params, sources.ohmic);
                }
            });
    }
}

impl Stepper for FvsSolver {
    fn name(&self) -> &'static str {
        "fvs"
    }

    fn time(&self) -> f64 {
        self.time
    }

    fn nominal_dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) || dt > self.dt * (1.0 + 1e-12) {
            return Err(Error::Cfl(format!("step {dt} exceeds the configured step {}", self.dt)));
        }
        let t0 = Instant::now();
        let mut u = std::mem::take(&mut self.u);
        let mut rhs = std::mem::take(&mut self.rhs);
        Self::fill_halo(&mut u, &self.halo, &self.boundary, self.time);
        self.residual(&u, &mut rhs);
        match self.reconstruction {
            Reconstruction::FirstOrder => {
                let r = &rhs;
                par_interior(&self.pad, &mut u, |p, up| *up = up.axpy(dt, &r[p]));
            }
            Reconstruction::Linear { .. } => {
                let mut stage = std::mem::take(&mut self.stage);
                {
                    let (r, u0) = (&rhs, &u);
                    par_interior(&self.pad, &mut stage, |p, sp| *sp = u0[p].axpy(0.5 * dt, &r[p]));
                }
                Self::fill_halo(&mut stage, &self.halo, &self.boundary, self.time + 0.5 * dt);
                self.residual(&stage, &mut rhs);
                let r = &rhs;
                par_interior(&self.pad, &mut u, |p, up| *up = up.axpy(dt, &r[p]));
                self.stage = stage;
            }
        }
        self.u = u;
        self.rhs = rhs;
        let t1 = Instant::now();
        if self.sources.is_active() {
            self.source(dt);
        }
        let t2 = Instant::now();
        self.timings.transport += t1 - t0;
        self.timings.source += t2 - t1;
        self.time += dt;
        self.steps += 1;
        Ok(())
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }

    fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    fn state(&self) -> Vec<PhmState> {
        self.pad.gather(&self.u)
    }

    fn max_abs(&self) -> f64 {
        padded_max_abs(&self.pad, &self.u)
    }

    fn timings(&self) -> PhaseTimings {
        self.timings
    }
}
