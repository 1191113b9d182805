//! Error norms, convergence slopes, probes and conservation measures.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::phm::{PhmParams, PhmState, Vec3, BX, BY, BZ, EX, EY, EZ, PHI};
use crate::structured::BoundaryKind;
use crate::unstructured::{FaceSide, UnstructuredMesh};

use super::{CircleSpec, Domain, LineSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

/// Volume-weighted norm of `computed - exact`; L1 and L2 are divided by the
/// total volume.
pub fn error_norm(computed: &[f64], exact: &[f64], volumes: &[f64], kind: NormKind) -> Result<f64> {
    if computed.len() != exact.len() || computed.len() != volumes.len() {
        return Err(invalid("error norm needs fields and volumes of equal length"));
    }
    let total: f64 = volumes.iter().sum();
    let it = computed.iter().zip(exact).zip(volumes).map(|((a, b), v)| ((a - b).abs(), *v));
    Ok(match kind {
        NormKind::L1 => it.map(|(e, v)| e * v).sum::<f64>() / total,
        NormKind::L2 => (it.map(|(e, v)| e * e * v).sum::<f64>() / total).sqrt(),
        NormKind::Linf => it.map(|(e, _)| e).fold(0.0, f64::max),
    })
}

/// Errors against resolution for one norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSeries {
    pub norm: NormKind,
    pub points: Vec<(usize, f64)>,
}

/// Least-squares slope of `log(error)` against `log(1/N)`.
pub fn convergence_order(series: &ConvergenceSeries) -> Result<f64> {
    let p = &series.points;
    if p.len() < 3 {
        return Err(invalid("a convergence slope needs at least three points"));
    }
    if p.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(invalid("resolutions must be strictly increasing"));
    }
    if p.iter().any(|(_, e)| !(*e > 0.0)) {
        return Err(invalid("errors must be positive to fit a slope"));
    }
    let xs: Vec<f64> = p.iter().map(|(n, _)| -(*n as f64).ln()).collect();
    let ys: Vec<f64> = p.iter().map(|(_, e)| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Probe samples: curve parameter, position and state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Samples {
    pub param: Vec<f64>,
    pub points: Vec<Vec3>,
    pub values: Vec<PhmState>,
}

impl Samples {
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }
}

/// Cell containing `x` (grids) or with the nearest centroid (meshes).
pub fn locate(domain: &Domain, x: Vec3) -> Option<usize> {
    match domain {
        Domain::Grid(g) => {
            let mut idx = [0usize; 3];
            for a in 0..g.dim {
                let s = (x[a] - g.origin[a]) / g.spacing[a];
                let n = g.n[a] as f64;
                if !(s >= -1e-9 && s <= n + 1e-9) {
                    return None;
                }
                idx[a] = (s.floor().max(0.0) as usize).min(g.n[a] - 1);
            }
            Some(g.linear(idx[0], idx[1], idx[2]))
        }
        Domain::Mesh { mesh, .. } => nearest_centroid(mesh, x),
    }
}

fn nearest_centroid(mesh: &UnstructuredMesh, x: Vec3) -> Option<usize> {
    let (lo, hi) = mesh.nodes.iter().fold(([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]), |(mut lo, mut hi), p| {
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
        (lo, hi)
    });
    if (0..mesh.dim).any(|d| x[d] < lo[d] - 1e-9 || x[d] > hi[d] + 1e-9) {
        return None;
    }
    let d2 = |c: usize| -> f64 { (0..3).map(|d| (mesh.centroids[c][d] - x[d]).powi(2)).sum() };
    (0..mesh.n_cells()).min_by(|&a, &b| d2(a).total_cmp(&d2(b)))
}

fn sample(domain: &Domain, state: &[PhmState], param: Vec<f64>, points: Vec<Vec3>) -> Result<Samples> {
    if state.len() != domain.n_cells() {
        return Err(invalid("state does not match the domain"));
    }
    let mut out = Samples::default();
    for (s, x) in param.into_iter().zip(points) {
        if let Some(c) = locate(domain, x) {
            out.param.push(s);
            out.points.push(x);
            out.values.push(state[c]);
        }
    }
    if out.values.is_empty() {
        return Err(invalid("the probe does not intersect the domain"));
    }
    Ok(out)
}

/// Nearest-cell samples at `count` equally spaced points of a segment; the
/// parameter is the arc length from `from`.
pub fn extract_line(domain: &Domain, state: &[PhmState], spec: &LineSpec) -> Result<Samples> {
    let len = (0..3).map(|d| (spec.to[d] - spec.from[d]).powi(2)).sum::<f64>().sqrt();
    let n = spec.count.max(1);
    let mut param = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let t = (i as f64 + 0.5) / n as f64;
        param.push(t * len);
        points.push(std::array::from_fn(|d| spec.from[d] + t * (spec.to[d] - spec.from[d])));
    }
    sample(domain, state, param, points)
}

/// Nearest-cell samples around a circle; the parameter is the angle.
pub fn extract_circle(domain: &Domain, state: &[PhmState], spec: &CircleSpec) -> Result<Samples> {
    let a = spec.normal.index();
    let (b, c) = ((a + 1) % 3, (a + 2) % 3);
    let (u, v) = if a == 2 { (0, 1) } else { (b, c) };
    let n = spec.count.max(1);
    let mut param = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let mut x = spec.center;
        x[u] += spec.radius * th.cos();
        x[v] += spec.radius * th.sin();
        param.push(th);
        points.push(x);
    }
    sample(domain, state, param, points)
}

/// Relative L2 distance `|a - b| / |b|` between two sample series.
pub fn relative_l2(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(invalid("sample series differ in length"));
    }
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if den == 0.0 {
        return Err(invalid("reference series is identically zero"));
    }
    Ok((num / den).sqrt())
}

/// `(1/(chi dt)) sqrt(sum_i V_i (phi_i^{n+1} - phi_i^n)^2) / (rho0/eps0)`.
pub fn phi_inconsistency_norm(
    phi_prev: &[f64],
    phi_next: &[f64],
    volumes: &[f64],
    dt: f64,
    params: &PhmParams,
    rho0: f64,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    if params.chi == 0.0 || rho0 == 0.0 {
        return Err(invalid("the inconsistency norm needs chi > 0 and rho0 != 0"));
    }
    if phi_prev.len() != phi_next.len() || phi_prev.len() != volumes.len() {
        return Err(invalid("snapshots and volumes differ in length"));
    }
    let s: f64 = phi_prev
        .iter()
        .zip(phi_next)
        .zip(volumes)
        .map(|((a, b), v)| v * (b - a).powi(2))
        .sum();
    Ok(s.sqrt() / (params.chi * dt) / (rho0 / params.eps0))
}

/// Convenience wrapper extracting `phi` from two states.
pub fn phi_inconsistency(
    prev: &[PhmState],
    next: &[PhmState],
    volumes: &[f64],
    dt: f64,
    params: &PhmParams,
    rho0: f64,
) -> Result<f64> {
    let a: Vec<f64> = prev.iter().map(|u| u[PHI]).collect();
    let b: Vec<f64> = next.iter().map(|u| u[PHI]).collect();
    phi_inconsistency_norm(&a, &b, volumes, dt, params, rho0)
}

/// Largest excursion of one component above the initial maximum or below the
/// initial minimum over a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OvershootTracker {
    component: usize,
    init_min: f64,
    init_max: f64,
    worst: f64,
}

impl OvershootTracker {
    pub fn new(initial: &[PhmState], component: usize) -> Self {
        let (lo, hi) = initial
            .iter()
            .map(|u| u[component])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Self {
            component,
            init_min: lo,
            init_max: hi,
            worst: 0.0,
        }
    }

    pub fn observe(&mut self, state: &[PhmState]) {
        for u in state {
            let v = u[self.component];
            self.worst = self.worst.max(v - self.init_max).max(self.init_min - v);
        }
    }

    pub fn value(&self) -> f64 {
        self.worst
    }
}

/// Overshoot of a single snapshot relative to given bounds.
pub fn overshoot(values: &[f64], init_min: f64, init_max: f64) -> f64 {
    values
        .iter()
        .fold(0.0f64, |w, v| w.max(v - init_max).max(init_min - v))
}

/// Discrete total variation `sum |v_{i+1} - v_i|`.
pub fn total_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Largest `|div E - rho/eps0|` and `|div B|` over the cells. Grids use
/// central differences (one-sided at non-periodic walls); meshes use
/// Green-Gauss with face averages and copied boundary values.
pub fn divergence_residuals(
    domain: &Domain,
    state: &[PhmState],
    rho: impl Fn(Vec3) -> f64,
    params: &PhmParams,
) -> Result<(f64, f64)> {
    if state.len() != domain.n_cells() {
        return Err(invalid("state does not match the domain"));
    }
    let e = [EX, EY, EZ];
    let b = [BX, BY, BZ];
    let mut worst = (0.0f64, 0.0f64);
    match domain {
        Domain::Grid(g) => {
            for c in 0..g.n_cells() {
                let ijk = g.ijk(c);
                let mut de = 0.0;
                let mut db = 0.0;
                for a in 0..g.dim {
                    let n = g.n[a];
                    if n < 2 {
                        continue;
                    }
                    let periodic = g.bc[a] == BoundaryKind::Periodic;
                    let step = |d: isize| -> Option<usize> {
                        let i = ijk[a] as isize + d;
                        let i = if periodic {
                            i.rem_euclid(n as isize)
                        } else if i < 0 || i >= n as isize {
                            return None;
                        } else {
                            i
                        };
                        let mut q = ijk;
                        q[a] = i as usize;
                        Some(g.linear(q[0], q[1], q[2]))
                    };
                    let (p, m, w) = match (step(1), step(-1)) {
                        (Some(p), Some(m)) => (p, m, 2.0),
                        (Some(p), None) => (p, c, 1.0),
                        (None, Some(m)) => (c, m, 1.0),
                        (None, None) => continue,
                    };
                    let h = w * g.spacing[a];
                    de += (state[p][e[a]] - state[m][e[a]]) / h;
                    db += (state[p][b[a]] - state[m][b[a]]) / h;
                }
                let r = rho(g.cell_center(c)) / params.eps0;
                worst.0 = worst.0.max((de - r).abs());
                worst.1 = worst.1.max(db.abs());
            }
        }
        Domain::Mesh { mesh, .. } => {
            for c in 0..mesh.n_cells() {
                let mut de = 0.0;
                let mut db = 0.0;
                for &(fi, sign) in mesh.cell_faces(c) {
                    let f = &mesh.faces[fi];
                    let other = match f.neighbor {
                        FaceSide::Cell { cell, .. } => {
                            if sign > 0.0 {
                                cell
                            } else {
                                f.owner
                            }
                        }
                        FaceSide::Boundary { .. } => c,
                    };
                    for d in 0..3 {
                        let s = sign * f.area * f.normal[d] * 0.5;
                        de += s * (state[c][e[d]] + state[other][e[d]]);
                        db += s * (state[c][b[d]] + state[other][b[d]]);
                    }
                }
                let v = mesh.volumes[c];
                let r = rho(mesh.centroids[c]) / params.eps0;
                worst.0 = worst.0.max((de / v - r).abs());
                worst.1 = worst.1.max((db / v).abs());
            }
        }
    }
    Ok(worst)
}

/// Fourier amplitude of one wavelength of `values` sampled on a periodic
/// uniform grid.
pub fn fourier_amplitude(values: &[f64], wavenumber: usize) -> f64 {
    let n = values.len() as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        let th = 2.0 * std::f64::consts::PI * wavenumber as f64 * (i as f64 + 0.5) / n;
        a += v * th.cos();
        b += v * th.sin();
    }
    2.0 * (a * a + b * b).sqrt() / n
}

/// Least-squares slope of `log(amplitude)` against time: the decay rate.
pub fn decay_rate(times: &[f64], amplitudes: &[f64]) -> Result<f64> {
    if times.len() != amplitudes.len() || times.len() < 2 {
        return Err(invalid("decay fit needs at least two samples"));
    }
    if amplitudes.iter().any(|a| !(*a > 0.0)) {
        return Err(invalid("amplitudes must be positive"));
    }
    let k = times.len() as f64;
    let ys: Vec<f64> = amplitudes.iter().map(|a| a.ln()).collect();
    let mt = times.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sty: f64 = times.iter().zip(&ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let stt: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    Ok(-sty / stt)
}

/// Scattered-field energy `sum V |E_total - E_incident|^2` in the forward
/// (`x > 0`) and backward (`x < 0`) half spaces.
pub fn hemisphere_energy(
    centers: &[Vec3],
    volumes: &[f64],
    total: &[PhmState],
    incident: &[PhmState],
) -> (f64, f64) {
    let mut fwd = 0.0;
    let mut bwd = 0.0;
    for i in 0..centers.len() {
        let d = total[i] - incident[i];
        let e2 = d[EX] * d[EX] + d[EY] * d[EY] + d[EZ] * d[EZ];
        if centers[i][0] > 0.0 {
            fwd += volumes[i] * e2;
        } else if centers[i][0] < 0.0 {
            bwd += volumes[i] * e2;
        }
    }
    (fwd, bwd)
}
