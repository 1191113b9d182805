//! Kinetic beam solvers on Cartesian grids: exact-shift transport (Beam-ET)
//! and corner-transport-upwind finite volumes (Beam-CTU).

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kinetic::{smoothness_omega, BeamSet, Lattice, RelaxationPolicy, MAX_BEAMS};
use crate::phm::{source_step, PhmParams, PhmState, Vec3};
use crate::problem::{FieldFn, PhaseTimings, SourceModel, Stepper};

use super::grid::{HaloPlan, Padded, StructuredGrid};
use super::par_interior;

/// Transport operator of a beam solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamTransport {
    /// Shift every beam by one cell per step; requires unit beam CFL.
    ExactShift,
    /// Upwind finite volumes with corner transport corrections.
    Ctu,
}

/// Everything needed to build a [`BeamSolver`].
#[derive(Clone)]
pub struct BeamSetup {
    pub grid: StructuredGrid,
    pub lattice: Lattice,
    pub params: PhmParams,
    pub policy: RelaxationPolicy,
    pub transport: BeamTransport,
    /// Beam CFL number `lambda c dt / dx`.
    pub cfl: f64,
    pub sources: SourceModel,
    /// State imposed in Dirichlet ghost cells.
    pub boundary: Option<FieldFn>,
}

pub struct BeamSolver {
    grid: StructuredGrid,
    pad: Padded,
    halo: HaloPlan,
    lattice: Lattice,
    params: PhmParams,
    policy: RelaxationPolicy,
    transport: BeamTransport,
    sources: SourceModel,
    boundary: Option<FieldFn>,
    sigma: Vec<f64>,
    f: Vec<BeamSet>,
    f_next: Vec<BeamSet>,
    u: Vec<PhmState>,
    time: f64,
    dt: f64,
    steps: usize,
    timings: PhaseTimings,
}

impl BeamSolver {
    pub fn new(setup: BeamSetup, initial: impl Fn(Vec3) -> PhmState + Sync) -> Result<Self> {
        let BeamSetup {
            grid,
            lattice,
            params,
            policy,
            transport,
            cfl,
            sources,
            boundary,
        } = setup;
        params.validate()?;
        policy.validate()?;
        if lattice.dim() != grid.dim {
            return Err(invalid(format!(
                "lattice is {}D but the grid is {}D",
                lattice.dim(),
                grid.dim
            )));
        }
        if (lattice.c() - params.c).abs() > 1e-14 * params.c {
            return Err(invalid("lattice and PHM parameters disagree on c"));
        }
        if !(cfl > 0.0) {
            return Err(invalid(format!("CFL number must be positive, got {cfl}")));
        }
        let speed = lattice.speed();
        let dt = cfl * grid.min_spacing() / speed;
        match transport {
            BeamTransport::ExactShift => {
                if !grid.is_uniform() {
                    return Err(invalid("exact-shift transport needs equal spacing on all axes"));
                }
                if ((dt * speed - grid.spacing[0]) / grid.spacing[0]).abs() > 1e-12 {
                    return Err(Error::Cfl(format!(
                        "exact-shift transport needs dt * lambda * c = dx (beam CFL 1), got CFL {cfl}"
                    )));
                }
            }
            BeamTransport::Ctu => {
                if cfl > 1.0 + 1e-12 {
                    return Err(Error::Cfl(format!("beam CFL {cfl} exceeds 1")));
                }
            }
        }
        let pad = Padded::new(&grid, 1);
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
        let mut f = vec![[PhmState::ZERO; MAX_BEAMS]; pad.len()];
        {
            let (lat, par) = (&lattice, &params);
            let u_ref = &u;
            par_interior(&pad, &mut f, |p, fp| *fp = lat.equilibrium(&u_ref[p], par));
        }
        let sigma = match &sources.sigma {
            Some(s) => (0..grid.n_cells()).map(|c| s(grid.cell_center(c))).collect(),
            None => Vec::new(),
        };
        if sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(invalid("conductivity must be non-negative"));
        }
        let f_next = f.clone();
        Ok(Self {
            grid,
            pad,
            halo,
            lattice,
            params,
            policy,
            transport,
            sources,
            boundary,
            sigma,
            f,
            f_next,
            u,
            time: 0.0,
            dt,
            steps: 0,
            timings: PhaseTimings::default(),
        })
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn params(&self) -> &PhmParams {
        &self.params
    }

    /// Beam distributions in cell order.
    pub fn beams(&self) -> Vec<BeamSet> {
        self.pad.gather(&self.f)
    }

    /// Replaces the beams and recomputes the macroscopic state.
    pub fn set_beams(&mut self, beams: &[BeamSet]) -> Result<()> {
        if beams.len() != self.grid.n_cells() {
            return Err(invalid("beam array does not match the grid"));
        }
        self.pad.scatter(beams, &mut self.f);
        self.update_moments_from_f();
        Ok(())
    }

    fn update_moments_from_f(&mut self) {
        let lat = &self.lattice;
        let f = &self.f;
        par_interior(&self.pad, &mut self.u, |p, up| *up = lat.moments(&f[p]));
    }

    fn boundary_state(&self, x: Vec3, t: f64) -> PhmState {
        self.boundary.as_ref().map_or(PhmState::ZERO, |b| b(x, t))
    }

    fn collide(&mut self, dt: f64) -> Result<()> {
        let omega = self.policy.uniform_omega(dt)?;
        let lat = &self.lattice;
        let params = &self.params;
        match omega {
            Some(w) => {
                let u = &self.u;
                par_interior(&self.pad, &mut self.f, |p, fp| lat.collide(fp, &u[p], w, params));
            }
            None => {
                let RelaxationPolicy::Detector { s_max, components } = &self.policy else {
                    unreachable!()
                };
                let t = self.time;
                let halo = &self.halo;
                let boundary = &self.boundary;
                halo.fill(&mut self.u, |x| boundary.as_ref().map_or(PhmState::ZERO, |b| b(x, t)));
                let u = &self.u;
                let pad = self.pad;
                let dim = self.grid.dim;
                let spacing = self.grid.spacing;
                par_interior(&self.pad, &mut self.f, |p, fp| {
                    let mut w = 2.0f64;
                    for a in 0..dim {
                        let off = pad.stride[a];
                        for &c in components {
                            let sp = (u[p + off][c] - u[p][c]) / spacing[a];
                            let sm = (u[p][c] - u[p - off][c]) / spacing[a];
                            w = w.min(smoothness_omega(sp, sm, *s_max));
                        }
                    }
                    lat.collide(fp, &u[p], w, params);
                });
            }
        }
        Ok(())
    }

    fn fill_beam_halo(&mut self) {
        let t = self.time;
        let lat = &self.lattice;
        let params = &self.params;
        let boundary = &self.boundary;
        self.halo.fill(&mut self.f, |x| {
            let u = boundary.as_ref().map_or(PhmState::ZERO, |b| b(x, t));
            lat.equilibrium(&u, params)
        });
    }

    fn shift(&mut self) {
        let m = self.lattice.m();
        let offsets: Vec<isize> = (0..m)
            .map(|k| {
                let s = self.lattice.pattern(k);
                self.pad.offset([s[0] as isize, s[1] as isize, s[2] as isize])
            })
            .collect();
        let f = &self.f;
        par_interior(&self.pad, &mut self.f_next, |p, out| {
            for k in 0..m {
                out[k] = f[(p as isize - offsets[k]) as usize][k];
            }
        });
    }

    fn ctu(&mut self, dt: f64) {
        let m = self.lattice.m();
        let dim = self.grid.dim;
        let speed = self.lattice.speed();
        let nu: Vec<f64> = (0..dim).map(|a| speed * dt / self.grid.spacing[a]).collect();
        let pad = self.pad;
        // per beam, per axis: padded offset of the upwind neighbor
        let upwind: Vec<[isize; 3]> = (0..m)
            .map(|k| {
                let s = self.lattice.pattern(k);
                let mut o = [0isize; 3];
                for a in 0..dim {
                    o[a] = s[a] as isize * pad.stride[a] as isize;
                }
                o
            })
            .collect();
        let f = &self.f;
        par_interior(&self.pad, &mut self.f_next, |p, out| {
            let p = p as isize;
            for k in 0..m {
                let off = &upwind[k];
                let at = |q: isize| f[q as usize][k];
                let face_state = |a: usize, q: isize| -> PhmState {
                    let fq = at(q);
                    let mut tr = [0usize; 2];
                    let mut nt = 0;
                    for b in 0..dim {
                        if b != a {
                            tr[nt] = b;
                            nt += 1;
                        }
                    }
                    match nt {
                        0 => fq,
                        1 => {
                            let b = tr[0];
                            fq.axpy(-0.5 * nu[b], &(fq - at(q - off[b])))
                        }
                        _ => {
                            let (b, c) = (tr[0], tr[1]);
                            let fb = at(q - off[b]);
                            let fc = at(q - off[c]);
                            let fbc = at(q - off[b] - off[c]);
                            let mut s = fq.axpy(-0.5 * nu[b], &(fq - fb));
                            s = s.axpy(-0.5 * nu[c], &(fq - fc));
                            s.axpy(nu[b] * nu[c] / 3.0, &(fq - fb - fc + fbc))
                        }
                    }
                };
                let mut fnew = at(p);
                for a in 0..dim {
                    let diff = face_state(a, p) - face_state(a, p - off[a]);
                    fnew = fnew.axpy(-nu[a], &diff);
                }
                out[k] = fnew;
            }
        });
    }

    fn micro_macro(&mut self) {
        let lat = &self.lattice;
        let f = &self.f_next;
        par_interior(&self.pad, &mut self.u, |p, up| *up = lat.moments(&f[p]));
    }

    fn source(&mut self, dt: f64) {
        let t_half = self.time + 0.5 * dt;
        let grid = &self.grid;
        let pad = self.pad;
        let lat = &self.lattice;
        let params = &self.params;
        let sources = &self.sources;
        let sigma = &self.sigma;
        let f_next = &mut self.f_next;
        // walk rows of u and f_next together
        let nx = pad.n[0];
        let h0 = pad.halo[0];
        self.u
            .par_chunks_mut(pad.ext[0])
            .zip(f_next.par_chunks_mut(pad.ext[0]))
            .enumerate()
            .for_each(|(r, (urow, frow))| {
                let Some((j, k)) = pad.row_interior(r) else {
                    return;
                };
                for i in 0..nx {
                    let c = grid.linear(i, j, k);
                    let x = grid.cell_center(c);
                    let s = if sigma.is_empty() { 0.0 } else { sigma[c] };
                    let src = sources.densities(x, t_half, s);
                    let old = urow[h0 + i];
                    let new = source_step(&old, &src, dt, params, sources.ohmic);
                    let g = lat.equilibrium(&(new - old), params);
                    for (fk, gk) in frow[h0 + i].iter_mut().zip(g.iter()).take(lat.m()) {
                        *fk += *gk;
                    }
                    urow[h0 + i] = new;
                }
            });
    }
}

impl Stepper for BeamSolver {
    fn name(&self) -> &'static str {
        match self.transport {
            BeamTransport::ExactShift => "beam_et",
            BeamTransport::Ctu => "beam_ctu",
        }
    }

    fn time(&self) -> f64 {
        self.time
    }

    fn nominal_dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) || dt > self.dt * (1.0 + 1e-12) {
            return Err(Error::Cfl(format!(
                "step {dt} exceeds the configured step {}",
                self.dt
            )));
        }
        let t0 = Instant::now();
        self.collide(dt)?;
        let t1 = Instant::now();
        self.fill_beam_halo();
        let exact = (dt - self.dt).abs() <= 1e-12 * self.dt;
        match self.transport {
            BeamTransport::ExactShift if exact => self.shift(),
            // a clipped final step is not a whole-cell shift
            _ => self.ctu(dt),
        }
        let t2 = Instant::now();
        self.micro_macro();
        let t3 = Instant::now();
        if self.sources.is_active() {
            self.source(dt);
        }
        let t4 = Instant::now();
        std::mem::swap(&mut self.f, &mut self.f_next);
        self.time += dt;
        self.steps += 1;
        self.timings.collision += t1 - t0;
        self.timings.transport += t2 - t1;
        self.timings.micro_macro += t3 - t2;
        self.timings.source += t4 - t3;
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
        super::padded_max_abs(&self.pad, &self.u)
    }

    fn timings(&self) -> PhaseTimings {
        self.timings
    }
}

impl BeamSolver {
    /// Analytic boundary state, exposed for diagnostics.
    pub fn boundary_at(&self, x: Vec3, t: f64) -> PhmState {
        self.boundary_state(x, t)
    }
}
