//! Yee-grid leapfrog solver for the Maxwell curl equations (baseline).
//!
//! Grid nodes sit at cell centers; components are staggered by half cells:
//! `Ex (1/2,0,0)`, `Ey (0,1/2,0)`, `Ez (0,0,1/2)`, `Bx (0,1/2,1/2)`,
//! `By (1/2,0,1/2)`, `Bz (1/2,1/2,0)`. Offsets along inactive axes are
//! dropped, so in 2D `Ez` lives at cell centers. Boundaries are periodic.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::phm::{PhmParams, PhmState, Vec3};
use crate::problem::{FieldFn, PhaseTimings, SourceModel, Stepper};

use super::grid::StructuredGrid;

const OFFSETS: [[f64; 3]; 6] = [
    [0.5, 0.0, 0.0],
    [0.0, 0.5, 0.0],
    [0.0, 0.0, 0.5],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
];

#[derive(Clone)]
pub struct FdtdSetup {
    pub grid: StructuredGrid,
    pub params: PhmParams,
    /// `c dt / dx`.
    pub cfl: f64,
    pub sources: SourceModel,
    /// Exact solution used to seed B at `t = -dt/2`, when known.
    pub exact: Option<FieldFn>,
}

pub struct FdtdSolver {
    grid: StructuredGrid,
    params: PhmParams,
    sources: SourceModel,
    /// Ex, Ey, Ez at t^n and Bx, By, Bz at t^{n+1/2} (t^{n-1/2} before a step).
    fields: [Vec<f64>; 6],
    sigma: [Vec<f64>; 3],
    /// B is stored at `time - b_lag`.
    b_lag: f64,
    time: f64,
    dt: f64,
    steps: usize,
    timings: PhaseTimings,
}

/// Periodic neighbor along one axis.
#[derive(Clone, Copy)]
struct Nbr {
    n: [usize; 3],
}

impl Nbr {
    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    #[inline]
    fn shift(&self, c: usize, axis: usize, d: isize) -> usize {
        let mut ijk = [c % self.n[0], (c / self.n[0]) % self.n[1], c / (self.n[0] * self.n[1])];
        let n = self.n[axis] as isize;
        ijk[axis] = (ijk[axis] as isize + d).rem_euclid(n) as usize;
        self.idx(ijk[0], ijk[1], ijk[2])
    }
}

impl FdtdSolver {
    pub fn new(setup: FdtdSetup, initial: impl Fn(Vec3) -> PhmState + Sync) -> Result<Self> {
        let FdtdSetup {
            grid,
            params,
            cfl,
            sources,
            exact,
        } = setup;
        params.validate()?;
        if !grid.all_periodic() {
            return Err(invalid("the FDTD baseline supports periodic boundaries only"));
        }
        if sources.charge.is_some() {
            return Err(invalid(
                "the FDTD baseline has no cleaning potential and cannot take charge sources",
            ));
        }
        if !(cfl > 0.0) {
            return Err(invalid(format!("CFL number must be positive, got {cfl}")));
        }
        let dt = cfl * grid.min_spacing() / params.c;
        let inv2: f64 = grid.spacing[..grid.dim].iter().map(|h| 1.0 / (h * h)).sum();
        let courant = params.c * dt * inv2.sqrt();
        if courant > 1.0 + 1e-12 {
            return Err(Error::Cfl(format!(
                "Yee step violates the Courant limit (c dt sqrt(sum 1/dx^2) = {courant})"
            )));
        }
        let n = grid.n_cells();
        let pos = |comp: usize, c: usize| -> Vec3 {
            let mut x = grid.cell_center(c);
            for a in 0..grid.dim {
                x[a] += OFFSETS[comp][a] * grid.spacing[a];
            }
            x
        };
        let mut fields: [Vec<f64>; 6] = Default::default();
        for (comp, field) in fields.iter_mut().enumerate() {
            *field = (0..n).into_par_iter().map(|c| initial(pos(comp, c))[comp]).collect();
        }
        let sigma: [Vec<f64>; 3] = std::array::from_fn(|comp| match &sources.sigma {
            Some(s) => (0..n).map(|c| s(pos(comp, c))).collect(),
            None => Vec::new(),
        });
        let mut solver = Self {
            grid,
            params,
            sources,
            fields,
            sigma,
            b_lag: 0.5 * dt,
            time: 0.0,
            dt,
            steps: 0,
            timings: PhaseTimings::default(),
        };
        match exact {
            Some(ex) => {
                for comp in 3..6 {
                    let g = &solver.grid;
                    solver.fields[comp] = (0..n)
                        .into_par_iter()
                        .map(|c| {
                            let mut x = g.cell_center(c);
                            for a in 0..g.dim {
                                x[a] += OFFSETS[comp][a] * g.spacing[a];
                            }
                            ex(x, -0.5 * dt)[comp]
                        })
                        .collect();
                }
            }
            None => {
                // B(-dt/2) = B(0) + dt/2 curl E(0)
                let curl = solver.curl_e();
                for (b, cb) in solver.fields[3..6].iter_mut().zip(curl.iter()) {
                    for (v, d) in b.iter_mut().zip(cb) {
                        *v += 0.5 * dt * d;
                    }
                }
            }
        }
        Ok(solver)
    }

    fn nbr(&self) -> Nbr {
        Nbr { n: self.grid.n }
    }

    /// Curl of E at the B locations (forward differences).
    fn curl_e(&self) -> [Vec<f64>; 3] {
        let nb = self.nbr();
        let [ex, ey, ez] = [&self.fields[0], &self.fields[1], &self.fields[2]];
        let h = self.grid.spacing;
        let n = self.grid.n_cells();
        let cx = (0..n)
            .into_par_iter()
            .map(|c| (ez[nb.shift(c, 1, 1)] - ez[c]) / h[1] - (ey[nb.shift(c, 2, 1)] - ey[c]) / h[2])
            .collect();
        let cy = (0..n)
            .into_par_iter()
            .map(|c| (ex[nb.shift(c, 2, 1)] - ex[c]) / h[2] - (ez[nb.shift(c, 0, 1)] - ez[c]) / h[0])
            .collect();
        let cz = (0..n)
            .into_par_iter()
            .map(|c| (ey[nb.shift(c, 0, 1)] - ey[c]) / h[0] - (ex[nb.shift(c, 1, 1)] - ex[c]) / h[1])
            .collect();
        [cx, cy, cz]
    }

    /// Curl of B at the E locations (backward differences).
    fn curl_b(&self) -> [Vec<f64>; 3] {
        let nb = self.nbr();
        let [bx, by, bz] = [&self.fields[3], &self.fields[4], &self.fields[5]];
        let h = self.grid.spacing;
        let n = self.grid.n_cells();
        let cx = (0..n)
            .into_par_iter()
            .map(|c| (bz[c] - bz[nb.shift(c, 1, -1)]) / h[1] - (by[c] - by[nb.shift(c, 2, -1)]) / h[2])
            .collect();
        let cy = (0..n)
            .into_par_iter()
            .map(|c| (bx[c] - bx[nb.shift(c, 2, -1)]) / h[2] - (bz[c] - bz[nb.shift(c, 0, -1)]) / h[0])
            .collect();
        let cz = (0..n)
            .into_par_iter()
            .map(|c| (by[c] - by[nb.shift(c, 0, -1)]) / h[0] - (bx[c] - bx[nb.shift(c, 1, -1)]) / h[1])
            .collect();
        [cx, cy, cz]
    }

    /// Averages a staggered component onto cell centers.
    fn to_centers(&self, comp: usize, data: &[f64]) -> Vec<f64> {
        let nb = self.nbr();
        let axes: Vec<usize> = (0..self.grid.dim).filter(|&a| OFFSETS[comp][a] != 0.0).collect();
        (0..data.len())
            .map(|c| {
                let mut idx = vec![c];
                for &a in &axes {
                    let shifted: Vec<usize> = idx.iter().map(|&q| nb.shift(q, a, -1)).collect();
                    idx.extend(shifted);
                }
                idx.iter().map(|&q| data[q]).sum::<f64>() / idx.len() as f64
            })
            .collect()
    }
}

impl Stepper for FdtdSolver {
    fn name(&self) -> &'static str {
        "fdtd"
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
        // B moves from t - lag to t + dt/2; differs from dt only for a clipped step
        let db = self.b_lag + 0.5 * dt;
        let ce = self.curl_e();
        for (b, d) in self.fields[3..6].iter_mut().zip(ce.iter()) {
            b.par_iter_mut().zip(d.par_iter()).for_each(|(v, d)| *v -= db * d);
        }
        self.b_lag = 0.5 * dt;
        let cb = self.curl_b();
        let c2 = self.params.c * self.params.c;
        let eps0 = self.params.eps0;
        let t_half = self.time + 0.5 * dt;
        let grid = &self.grid;
        let current = &self.sources.current;
        for comp in 0..3 {
            let sig = &self.sigma[comp];
            let curl = &cb[comp];
            self.fields[comp].par_iter_mut().enumerate().for_each(|(c, e)| {
                let mut j = 0.0;
                if let Some(jf) = current {
                    let mut x = grid.cell_center(c);
                    for a in 0..grid.dim {
                        x[a] += OFFSETS[comp][a] * grid.spacing[a];
                    }
                    j = jf(x, t_half)[comp];
                }
                let a = if sig.is_empty() { 0.0 } else { 0.5 * sig[c] * dt / eps0 };
                *e = ((1.0 - a) * *e + dt * (c2 * curl[c] - j / eps0)) / (1.0 + a);
            });
        }
        self.timings.transport += t0.elapsed();
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
        let ce = self.curl_e();
        let mut comps: Vec<Vec<f64>> = Vec::with_capacity(6);
        for comp in 0..3 {
            comps.push(self.to_centers(comp, &self.fields[comp]));
        }
        for comp in 3..6 {
            // B(t) = B(t - lag) - lag curl E(t)
            let b: Vec<f64> = self.fields[comp]
                .iter()
                .zip(&ce[comp - 3])
                .map(|(b, d)| b - self.b_lag * d)
                .collect();
            comps.push(self.to_centers(comp, &b));
        }
        (0..self.grid.n_cells())
            .map(|c| {
                PhmState([
                    comps[0][c], comps[1][c], comps[2][c], comps[3][c], comps[4][c], comps[5][c],
                    0.0, 0.0,
                ])
            })
            .collect()
    }

    fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for f in &self.fields {
            for v in f {
                if !v.is_finite() {
                    return f64::NAN;
                }
                m = m.max(v.abs());
            }
        }
        m
    }

    fn timings(&self) -> PhaseTimings {
        self.timings
    }
}
