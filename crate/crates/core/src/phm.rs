//! The perfectly hyperbolic Maxwell (PHM) system.
//!
//! The unknown is the 8-vector `U = (Ex, Ey, Ez, Bx, By, Bz, phi, psi)` and the
//! system reads `dU/dt + sum_j A_j dU/dx_j = S(U)` with constant Jacobians
//! `A_j`. The two scalar potentials carry divergence errors away at speeds
//! `chi*c` (electric) and `gamma*c` (magnetic).
//!
//! Everything in this module is a pure function of its arguments.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Number of conserved components.
pub const NVARS: usize = 8;

pub const EX: usize = 0;
pub const EY: usize = 1;
pub const EZ: usize = 2;
pub const BX: usize = 3;
pub const BY: usize = 4;
pub const BZ: usize = 5;
pub const PHI: usize = 6;
pub const PSI: usize = 7;

/// Component names in storage order, as used in output files.
pub const COMPONENT_NAMES: [&str; NVARS] = ["Ex", "Ey", "Ez", "Bx", "By", "Bz", "phi", "psi"];

pub type Mat8 = SMatrix<f64, 8, 8>;
pub type Vec3 = [f64; 3];

/// Looks up a component index by its output name (case-insensitive).
pub fn component_index(name: &str) -> Option<usize> {
    COMPONENT_NAMES
        .iter()
        .position(|c| c.eq_ignore_ascii_case(name))
}

/// Material and cleaning parameters. Normalized units by default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhmParams {
    pub c: f64,
    pub eps0: f64,
    pub mu0: f64,
    /// Electric cleaning speed factor.
    pub chi: f64,
    /// Magnetic cleaning speed factor.
    pub gamma: f64,
}

impl Default for PhmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            eps0: 1.0,
            mu0: 1.0,
            chi: 1.0,
            gamma: 1.0,
        }
    }
}

impl PhmParams {
    /// Parameters with `eps0 = 1` and `mu0 = 1/c^2`.
    pub fn new(c: f64, chi: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            c,
            eps0: 1.0,
            mu0: 1.0 / (c * c),
            chi,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("wave speed c must be positive, got {}", self.c)));
        }
        if !(self.chi >= 0.0) || !(self.gamma >= 0.0) {
            return Err(invalid(format!(
                "cleaning factors must be non-negative (chi = {}, gamma = {})",
                self.chi, self.gamma
            )));
        }
        if !(self.eps0 > 0.0 && self.mu0 > 0.0) {
            return Err(invalid("eps0 and mu0 must be positive"));
        }
        let closure = self.eps0 * self.mu0 * self.c * self.c;
        if (closure - 1.0).abs() > 1e-12 {
            return Err(invalid(format!(
                "eps0 * mu0 * c^2 must equal 1, got {closure}"
            )));
        }
        Ok(())
    }

    /// Largest characteristic speed of the system.
    pub fn max_wave_speed(&self) -> f64 {
        self.c * 1f64.max(self.chi).max(self.gamma)
    }
}

/// Macroscopic PHM state `(Ex, Ey, Ez, Bx, By, Bz, phi, psi)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhmState(pub [f64; NVARS]);

impl PhmState {
    pub const ZERO: PhmState = PhmState([0.0; NVARS]);

    pub fn new(e: Vec3, b: Vec3, phi: f64, psi: f64) -> Self {
        Self([e[0], e[1], e[2], b[0], b[1], b[2], phi, psi])
    }

    /// State with a single nonzero component.
    pub fn unit(component: usize, value: f64) -> Self {
        let mut s = Self::ZERO;
        s.0[component] = value;
        s
    }

    #[inline]
    pub fn e(&self) -> Vec3 {
        [self.0[EX], self.0[EY], self.0[EZ]]
    }

    #[inline]
    pub fn b(&self) -> Vec3 {
        [self.0[BX], self.0[BY], self.0[BZ]]
    }

    #[inline]
    pub fn set_e(&mut self, e: Vec3) {
        self.0[EX..=EZ].copy_from_slice(&e);
    }

    #[inline]
    pub fn set_b(&mut self, b: Vec3) {
        self.0[BX..=BZ].copy_from_slice(&b);
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + a * other`
    #[inline]
    pub fn axpy(&self, a: f64, other: &PhmState) -> PhmState {
        let mut out = *self;
        for (o, x) in out.0.iter_mut().zip(other.0.iter()) {
            *o += a * x;
        }
        out
    }
}

impl Index<usize> for PhmState {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for PhmState {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for PhmState {
    type Output = PhmState;
    #[inline]
    fn add(mut self, rhs: PhmState) -> PhmState {
        self += rhs;
        self
    }
}

impl AddAssign for PhmState {
    #[inline]
    fn add_assign(&mut self, rhs: PhmState) {
        for (a, b) in self.0.iter_mut().zip(rhs.0.iter()) {
            *a += b;
        }
    }
}

impl Sub for PhmState {
    type Output = PhmState;
    #[inline]
    fn sub(mut self, rhs: PhmState) -> PhmState {
        self -= rhs;
        self
    }
}

impl SubAssign for PhmState {
    #[inline]
    fn sub_assign(&mut self, rhs: PhmState) {
        for (a, b) in self.0.iter_mut().zip(rhs.0.iter()) {
            *a -= b;
        }
    }
}

impl Mul<f64> for PhmState {
    type Output = PhmState;
    #[inline]
    fn mul(mut self, rhs: f64) -> PhmState {
        for a in self.0.iter_mut() {
            *a *= rhs;
        }
        self
    }
}

impl Neg for PhmState {
    type Output = PhmState;
    fn neg(self) -> PhmState {
        self * -1.0
    }
}

impl From<[f64; NVARS]> for PhmState {
    fn from(v: [f64; NVARS]) -> Self {
        Self(v)
    }
}

/// Coordinate axis of a flux direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        match i {
            0 => Some(Axis::X),
            1 => Some(Axis::Y),
            2 => Some(Axis::Z),
            _ => None,
        }
    }

    pub fn unit(self) -> Vec3 {
        let mut e = [0.0; 3];
        e[self.index()] = 1.0;
        e
    }
}

// 3x3 blocks coupling E and B along each axis.
const M_BLOCKS: [[[f64; 3]; 3]; 3] = [
    [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]],
    [[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
    [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
];

/// Constant flux Jacobian `A_j` along `axis`.
pub fn jacobian(axis: Axis, params: &PhmParams) -> Mat8 {
    let j = axis.index();
    let c2 = params.c * params.c;
    let m = &M_BLOCKS[j];
    let mut a = Mat8::zeros();
    for r in 0..3 {
        for s in 0..3 {
            a[(r, 3 + s)] = c2 * m[r][s];
            a[(3 + r, s)] = m[s][r];
        }
    }
    a[(j, PHI)] = params.chi * c2;
    a[(3 + j, PSI)] = params.gamma;
    a[(PHI, j)] = params.chi;
    a[(PSI, 3 + j)] = params.gamma * c2;
    a
}

#[inline]
fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `sum_j w_j F_j(U)` for an arbitrary (not necessarily unit) vector `w`.
///
/// This is the closed form of `(sum_j w_j A_j) U`:
/// E-flux `c^2 (B x w) + chi c^2 phi w`, B-flux `(w x E) + gamma psi w`,
/// phi-flux `chi E.w`, psi-flux `gamma c^2 B.w`.
#[inline]
pub fn flux_along(u: &PhmState, w: Vec3, params: &PhmParams) -> PhmState {
    let c2 = params.c * params.c;
    let e = u.e();
    let b = u.b();
    let bxw = cross(b, w);
    let wxe = cross(w, e);
    let cp = params.chi * c2 * u.0[PHI];
    let gp = params.gamma * u.0[PSI];
    PhmState([
        c2 * bxw[0] + cp * w[0],
        c2 * bxw[1] + cp * w[1],
        c2 * bxw[2] + cp * w[2],
        wxe[0] + gp * w[0],
        wxe[1] + gp * w[1],
        wxe[2] + gp * w[2],
        params.chi * dot(e, w),
        params.gamma * c2 * dot(b, w),
    ])
}

/// Physical flux `F_axis(U) = A_axis U`.
#[inline]
pub fn flux(u: &PhmState, axis: Axis, params: &PhmParams) -> PhmState {
    flux_along(u, axis.unit(), params)
}

fn check_unit(n: Vec3) -> Result<()> {
    let norm = dot(n, n).sqrt();
    if !((norm - 1.0).abs() <= 1e-12) {
        return Err(invalid(format!("face normal must be a unit vector, |n| = {norm}")));
    }
    Ok(())
}

/// Normal flux `sum_j n_j F_j(U)` through a face with unit normal `n`.
pub fn flux_normal(u: &PhmState, n: Vec3, params: &PhmParams) -> Result<PhmState> {
    check_unit(n)?;
    Ok(flux_along(u, n, params))
}

/// Orthonormal face frame whose first row is the face normal.
///
/// Maps global E and B triples to a local frame where the normal is the
/// x-axis; `phi` and `psi` are frame-invariant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceFrame {
    rows: [[f64; 3]; 3],
}

impl FaceFrame {
    pub fn new(n: Vec3) -> Result<Self> {
        check_unit(n)?;
        Ok(Self::new_unchecked(n))
    }

    /// Builds the frame without validating `|n| = 1`.
    pub fn new_unchecked(n: Vec3) -> Self {
        if n[0] >= 0.0 {
            Self {
                rows: base_rotation(n),
            }
        } else {
            // Mirror through diag(-1,-1,1) so the formula only sees n1 >= 0.
            let r = base_rotation([-n[0], -n[1], n[2]]);
            let mut rows = r;
            for row in rows.iter_mut() {
                row[0] = -row[0];
                row[1] = -row[1];
            }
            Self { rows }
        }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.rows
    }

    #[inline]
    pub fn to_local3(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        [dot(r[0], v), dot(r[1], v), dot(r[2], v)]
    }

    #[inline]
    pub fn to_global3(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        [
            r[0][0] * v[0] + r[1][0] * v[1] + r[2][0] * v[2],
            r[0][1] * v[0] + r[1][1] * v[1] + r[2][1] * v[2],
            r[0][2] * v[0] + r[1][2] * v[1] + r[2][2] * v[2],
        ]
    }

    #[inline]
    pub fn to_local(&self, u: &PhmState) -> PhmState {
        let e = self.to_local3(u.e());
        let b = self.to_local3(u.b());
        PhmState::new(e, b, u.0[PHI], u.0[PSI])
    }

    #[inline]
    pub fn to_global(&self, u: &PhmState) -> PhmState {
        let e = self.to_global3(u.e());
        let b = self.to_global3(u.b());
        PhmState::new(e, b, u.0[PHI], u.0[PSI])
    }
}

// Rotation with first row n, valid for n1 > -1 (used here only for n1 >= 0).
fn base_rotation(n: Vec3) -> [[f64; 3]; 3] {
    let [n1, n2, n3] = n;
    let d = 1.0 + n1;
    [
        [n1, n2, n3],
        [-n2, n1 + n3 * n3 / d, -n2 * n3 / d],
        [-n3, -n2 * n3 / d, 1.0 - n3 * n3 / d],
    ]
}

pub fn rotate_to_local(u: &PhmState, n: Vec3) -> Result<PhmState> {
    Ok(FaceFrame::new(n)?.to_local(u))
}

pub fn rotate_to_global(u: &PhmState, n: Vec3) -> Result<PhmState> {
    Ok(FaceFrame::new(n)?.to_global(u))
}

/// Closed-form characteristic decomposition of `A_1`.
///
/// `A_1` decouples into four 2x2 blocks, `(Ex, phi)`, `(Ey, Bz)`, `(Ez, By)`
/// and `(Bx, psi)`, each with a pair of opposite wave speeds.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub lambdas: [f64; NVARS],
    pub r: Mat8,
    pub r_inv: Mat8,
}

impl EigenSystem {
    pub fn new(params: &PhmParams) -> Result<Self> {
        params.validate()?;
        let c = params.c;
        // (first index, second index, p, q, speed); eigenvectors are
        // p*e_i + q*e_j for +speed and p*e_i - q*e_j for -speed.
        let blocks = [
            (EX, PHI, c, 1.0, params.chi * c),
            (EY, BZ, c, 1.0, c),
            (EZ, BY, c, -1.0, c),
            (BX, PSI, 1.0, c, params.gamma * c),
        ];
        let mut lambdas = [0.0; NVARS];
        let mut r = Mat8::zeros();
        let mut r_inv = Mat8::zeros();
        for (b, &(i, j, p, q, s)) in blocks.iter().enumerate() {
            let (kp, km) = (2 * b, 2 * b + 1);
            lambdas[kp] = s;
            lambdas[km] = -s;
            r[(i, kp)] = p;
            r[(j, kp)] = q;
            r[(i, km)] = p;
            r[(j, km)] = -q;
            r_inv[(kp, i)] = 0.5 / p;
            r_inv[(kp, j)] = 0.5 / q;
            r_inv[(km, i)] = 0.5 / p;
            r_inv[(km, j)] = -0.5 / q;
        }
        let err = (r * r_inv - Mat8::identity()).abs().max();
        if !(err <= 1e-10) {
            return Err(invalid(format!("degenerate eigenvector matrix (|R R^-1 - I| = {err})")));
        }
        Ok(Self { lambdas, r, r_inv })
    }

    fn assemble(&self, f: impl Fn(f64) -> f64) -> Mat8 {
        let mut d = Mat8::zeros();
        for (k, l) in self.lambdas.iter().enumerate() {
            d[(k, k)] = f(*l);
        }
        self.r * d * self.r_inv
    }

    /// `R diag(lambda) R^-1`, which reproduces `A_1`.
    pub fn a1(&self) -> Mat8 {
        self.assemble(|l| l)
    }

    pub fn a_plus(&self) -> Mat8 {
        self.assemble(|l| 0.5 * (l + l.abs()))
    }

    pub fn a_minus(&self) -> Mat8 {
        self.assemble(|l| 0.5 * (l - l.abs()))
    }

    /// `|A_1| = A_1^+ - A_1^-`.
    pub fn abs_a1(&self) -> Mat8 {
        self.assemble(f64::abs)
    }
}

pub fn eigensystem_a1(params: &PhmParams) -> Result<EigenSystem> {
    EigenSystem::new(params)
}

#[inline]
fn mat8_mul(m: &Mat8, u: &PhmState) -> PhmState {
    let mut out = [0.0; NVARS];
    for (r, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for c in 0..NVARS {
            s += m[(r, c)] * u.0[c];
        }
        *o = s;
    }
    PhmState(out)
}

/// Upwind (flux-vector-splitting) interface flux for the PHM system.
#[derive(Clone, Debug)]
pub struct UpwindFlux {
    params: PhmParams,
    abs_a1: Mat8,
}

impl UpwindFlux {
    pub fn new(params: &PhmParams) -> Result<Self> {
        let eig = EigenSystem::new(params)?;
        Ok(Self {
            params: *params,
            abs_a1: eig.abs_a1(),
        })
    }

    pub fn params(&self) -> &PhmParams {
        &self.params
    }

    /// `1/2 A_1 (U_L + U_R) - 1/2 |A_1| (U_R - U_L)` in the face-local frame.
    #[inline]
    pub fn local(&self, ul: &PhmState, ur: &PhmState) -> PhmState {
        let avg = flux(&(*ul + *ur), Axis::X, &self.params) * 0.5;
        let jump = mat8_mul(&self.abs_a1, &(*ur - *ul));
        avg.axpy(-0.5, &jump)
    }

    /// Normal flux through a face: rotate to the local frame, evaluate the
    /// 1D upwind flux, rotate back.
    #[inline]
    pub fn normal(&self, ul: &PhmState, ur: &PhmState, frame: &FaceFrame) -> PhmState {
        let fl = self.local(&frame.to_local(ul), &frame.to_local(ur));
        frame.to_global(&fl)
    }
}

/// Current, charge and conductivity feeding the source term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceDensities {
    /// Prescribed current density.
    pub j: Vec3,
    pub rho: f64,
    /// Conductivity for the Ohmic current `J = sigma E`.
    pub sigma: f64,
}

/// `S(U) = (-J/eps0, 0, 0, 0, chi rho/eps0, 0)` with `J = j + sigma E`.
pub fn source_eval(u: &PhmState, src: &SourceDensities, params: &PhmParams) -> PhmState {
    let e = u.e();
    let mut s = PhmState::ZERO;
    for d in 0..3 {
        s.0[EX + d] = -(src.j[d] + src.sigma * e[d]) / params.eps0;
    }
    s.0[PHI] = params.chi * src.rho / params.eps0;
    s
}

/// Time integrator for the stiff Ohmic term of the source step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OhmicIntegrator {
    /// Exact solution of `dE/dt = -(sigma E + j)/eps0` over the step.
    #[default]
    Exponential,
    /// Trapezoidal rule, `E^{n+1} = ((1 - a) E* - dt j/eps0) / (1 + a)`,
    /// `a = sigma dt / (2 eps0)`.
    CrankNicolson,
}

/// Advances `U*` over the source sub-step. The charge density in `src` is
/// expected at the mid-step time.
pub fn source_step(
    u: &PhmState,
    src: &SourceDensities,
    dt: f64,
    params: &PhmParams,
    integrator: OhmicIntegrator,
) -> PhmState {
    let mut out = *u;
    let eps0 = params.eps0;
    if src.sigma > 0.0 {
        match integrator {
            OhmicIntegrator::Exponential => {
                let decay = (-src.sigma * dt / eps0).exp();
                for d in 0..3 {
                    let e_inf = -src.j[d] / src.sigma;
                    out.0[EX + d] = e_inf + (u.0[EX + d] - e_inf) * decay;
                }
            }
            OhmicIntegrator::CrankNicolson => {
                let a = 0.5 * src.sigma * dt / eps0;
                for d in 0..3 {
                    out.0[EX + d] = ((1.0 - a) * u.0[EX + d] - dt * src.j[d] / eps0) / (1.0 + a);
                }
            }
        }
    } else {
        for d in 0..3 {
            out.0[EX + d] -= dt * src.j[d] / eps0;
        }
    }
    out.0[PHI] += dt * params.chi * src.rho / eps0;
    out
}

/// Scalar profile of an analytic plane wave.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WaveProfile {
    /// `cos(k s)`
    Cosine { wavenumber: f64 },
    /// `sin(k s)`
    Sine { wavenumber: f64 },
    /// Compact bump `exp(1 - 1/(1 - |s|/eta))` for `|s| < eta`, else 0.
    Bump { eta: f64 },
}

impl WaveProfile {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            WaveProfile::Cosine { wavenumber } => (wavenumber * s).cos(),
            WaveProfile::Sine { wavenumber } => (wavenumber * s).sin(),
            WaveProfile::Bump { eta } => {
                let r = s.abs() / eta;
                if r < 1.0 {
                    (1.0 - 1.0 / (1.0 - r)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Builds a profile from its kind name (`cosine`, `sine`, `bump`) and a
    /// shape parameter (wavenumber, or width for the bump).
    pub fn from_kind(kind: &str, shape: f64) -> Result<Self> {
        match kind {
            "cosine" => Ok(WaveProfile::Cosine { wavenumber: shape }),
            "sine" => Ok(WaveProfile::Sine { wavenumber: shape }),
            "bump" => Ok(WaveProfile::Bump { eta: shape }),
            other => Err(invalid(format!("unknown wave kind '{other}'"))),
        }
    }
}

/// A transverse electromagnetic plane wave
/// `E = A p g(d.x - x0 - c t)`, `B = A (d x p)/c g(...)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveConfig {
    pub profile: WaveProfile,
    /// Unit propagation direction.
    pub direction: Vec3,
    /// Unit polarization of E, orthogonal to `direction`.
    pub polarization: Vec3,
    /// Phase offset along `direction`.
    pub offset: f64,
    pub amplitude: f64,
}

impl WaveConfig {
    /// `Ez = A g(x - ct)`, `By = -A g(x - ct)/c`.
    pub fn along_x(profile: WaveProfile) -> Self {
        Self {
            profile,
            direction: [1.0, 0.0, 0.0],
            polarization: [0.0, 0.0, 1.0],
            offset: 0.0,
            amplitude: 1.0,
        }
    }

    /// `Ey = A g(x - ct)`, `Bz = A g(x - ct)/c`: the polarized 1D pair.
    pub fn along_x_ey(profile: WaveProfile) -> Self {
        Self {
            polarization: [0.0, 1.0, 0.0],
            ..Self::along_x(profile)
        }
    }

    /// `Ez = A g(y - y0 - ct)`, `Bx = A g(y - y0 - ct)/c`.
    pub fn along_y(profile: WaveProfile, y0: f64) -> Self {
        Self {
            profile,
            direction: [0.0, 1.0, 0.0],
            polarization: [0.0, 0.0, 1.0],
            offset: y0,
            amplitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dn = dot(self.direction, self.direction).sqrt();
        let pn = dot(self.polarization, self.polarization).sqrt();
        if (dn - 1.0).abs() > 1e-10 || (pn - 1.0).abs() > 1e-10 {
            return Err(invalid("wave direction and polarization must be unit vectors"));
        }
        if dot(self.direction, self.polarization).abs() > 1e-10 {
            return Err(invalid("wave polarization must be orthogonal to its direction"));
        }
        Ok(())
    }

    pub fn eval(&self, x: Vec3, t: f64, params: &PhmParams) -> PhmState {
        let s = dot(self.direction, x) - self.offset - params.c * t;
        let g = self.amplitude * self.profile.eval(s);
        if g == 0.0 {
            return PhmState::ZERO;
        }
        let p = self.polarization;
        let dp = cross(self.direction, p);
        let gb = g / params.c;
        PhmState::new(
            [g * p[0], g * p[1], g * p[2]],
            [gb * dp[0], gb * dp[1], gb * dp[2]],
            0.0,
            0.0,
        )
    }
}

/// Exact plane-wave solution at `(x, t)`.
pub fn analytic_plane_wave(
    cfg: &WaveConfig,
    x: Vec3,
    t: f64,
    params: &PhmParams,
) -> PhmState {
    cfg.eval(x, t, params)
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "1" => Ok(Axis::X),
            "y" | "2" => Ok(Axis::Y),
            "z" | "3" => Ok(Axis::Z),
            _ => Err(invalid(format!("unknown axis '{s}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> PhmParams {
        PhmParams::default()
    }

    #[test]
    fn jacobian_a1_matches_explicit_matrix() {
        let params = PhmParams::new(1.7, 0.6, 2.3).unwrap();
        let (c2, chi, gam) = (1.7f64 * 1.7, 0.6, 2.3);
        let a = jacobian(Axis::X, &params);
        let mut expected = Mat8::zeros();
        expected[(0, 6)] = c2 * chi;
        expected[(1, 5)] = c2;
        expected[(2, 4)] = -c2;
        expected[(3, 7)] = gam;
        expected[(4, 2)] = -1.0;
        expected[(5, 1)] = 1.0;
        expected[(6, 0)] = chi;
        expected[(7, 3)] = c2 * gam;
        assert_eq!(a, expected);
    }

    #[test]
    fn jacobian_rows_for_unit_parameters() {
        let a = jacobian(Axis::X, &p());
        let row0: Vec<f64> = (0..8).map(|c| a[(0, c)]).collect();
        let row6: Vec<f64> = (0..8).map(|c| a[(6, c)]).collect();
        assert_eq!(row0, vec![0., 0., 0., 0., 0., 0., 1., 0.]);
        assert_eq!(row6, vec![1., 0., 0., 0., 0., 0., 0., 0.]);
    }

    #[test]
    fn cleaning_off_decouples_potentials() {
        let params = PhmParams::new(1.0, 0.0, 0.0).unwrap();
        for axis in Axis::ALL {
            let a = jacobian(axis, &params);
            for k in 0..8 {
                assert_eq!(a[(PHI, k)], 0.0);
                assert_eq!(a[(PSI, k)], 0.0);
                assert_eq!(a[(k, PHI)], 0.0);
                assert_eq!(a[(k, PSI)], 0.0);
            }
        }
    }

    #[test]
    fn y_flux_of_ez_feeds_bx() {
        let u = PhmState::unit(EZ, 1.0);
        let f = flux(&u, Axis::Y, &p());
        assert_eq!(f[BX], 1.0);
    }

    #[test]
    fn z_jacobian_couples_bz_to_psi() {
        let a = jacobian(Axis::Z, &p());
        assert_eq!(a[(BZ, PSI)], 1.0);
        assert_eq!(a[(PSI, BZ)], 1.0);
    }

    #[test]
    fn flux_examples() {
        let u = PhmState([0., 1., 0., 0., 0., -1., 0., 0.]);
        assert_eq!(flux(&u, Axis::X, &p()).0, [0., -1., 0., 0., 0., 1., 0., 0.]);
        assert_eq!(flux(&PhmState::ZERO, Axis::Y, &p()), PhmState::ZERO);
        let f = flux(&PhmState::unit(EX, 1.0), Axis::X, &p());
        assert_eq!(f.0, [0., 0., 0., 0., 0., 0., 1., 0.]);
    }

    #[test]
    fn flux_matches_matrix_product() {
        let params = PhmParams::new(1.3, 0.7, 1.9).unwrap();
        let u = PhmState([0.3, -1.2, 0.8, 2.0, -0.4, 0.1, 0.9, -0.6]);
        for axis in Axis::ALL {
            let dense = jacobian(axis, &params) * nalgebra::SVector::<f64, 8>::from(u.0);
            let f = flux(&u, axis, &params);
            for k in 0..8 {
                assert!((dense[k] - f[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn normal_flux_rejects_non_unit() {
        assert!(flux_normal(&PhmState::ZERO, [1.0, 1.0, 0.0], &p()).is_err());
        let n = [1.0, 0.0, 0.0];
        let u = PhmState([1., 2., 3., 4., 5., 6., 7., 8.]);
        assert_eq!(flux_normal(&u, n, &p()).unwrap(), flux(&u, Axis::X, &p()));
    }

    #[test]
    fn normal_flux_along_z_for_ey() {
        // dense oracle: sum_j n_j A_j U with n = e_z
        let u = PhmState::unit(EY, 1.0);
        let dense = jacobian(Axis::Z, &p()) * nalgebra::SVector::<f64, 8>::from(u.0);
        let f = flux_normal(&u, [0.0, 0.0, 1.0], &p()).unwrap();
        assert_eq!(f[BX], dense[BX]);
        assert_eq!(f[BX], -1.0);
    }

    #[test]
    fn diagonal_normal_is_scaled_average() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = PhmState([0.3, -1.2, 0.8, 2.0, -0.4, 0.1, 0.9, -0.6]);
        let f = flux_normal(&u, [s, s, 0.0], &p()).unwrap();
        let avg = (flux(&u, Axis::X, &p()) + flux(&u, Axis::Y, &p())) * s;
        for k in 0..8 {
            assert!((f[k] - avg[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn rotation_special_cases() {
        let u = PhmState([1., 2., 3., 4., 5., 6., 7., 8.]);
        assert_eq!(rotate_to_local(&u, [1.0, 0.0, 0.0]).unwrap(), u);
        let r = rotate_to_local(&u, [-1.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.0, [-1., -2., 3., -4., -5., 6., 7., 8.]);
        let f = FaceFrame::new([0.0, 1.0, 0.0]).unwrap();
        assert_eq!(
            f.matrix(),
            [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
        );
    }

    #[test]
    fn eigenvalues_are_the_wave_speeds() {
        let params = PhmParams::new(1.0, 2.0, 2.0).unwrap();
        let eig = EigenSystem::new(&params).unwrap();
        let mut l = eig.lambdas.to_vec();
        l.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(l, vec![-2., -2., -1., -1., 1., 1., 2., 2.]);
    }

    #[test]
    fn abs_a1_annihilates_nothing_but_zero_speed_modes() {
        let params = PhmParams::new(1.0, 0.0, 0.0).unwrap();
        let abs = EigenSystem::new(&params).unwrap().abs_a1();
        for k in [EX, BX, PHI, PSI] {
            for c in 0..8 {
                assert_eq!(abs[(k, c)], 0.0);
            }
        }
        assert_eq!(abs[(EY, EY)], 1.0);
    }

    #[test]
    fn source_examples() {
        let params = p();
        let u = PhmState::unit(EZ, 2.0);
        let s = source_eval(&u, &SourceDensities { sigma: 1.0, ..Default::default() }, &params);
        assert_eq!(s[EZ], -2.0);
        let s = source_eval(
            &PhmState::ZERO,
            &SourceDensities { rho: 1.0, ..Default::default() },
            &params,
        );
        assert_eq!(s.0, [0., 0., 0., 0., 0., 0., 1., 0.]);
        let s = source_eval(&u, &SourceDensities::default(), &params);
        assert_eq!(s, PhmState::ZERO);
    }

    #[test]
    fn source_step_integrators_agree_for_small_steps() {
        let params = p();
        let u = PhmState::unit(EZ, 1.0);
        let src = SourceDensities { sigma: 1.0, ..Default::default() };
        let a = source_step(&u, &src, 1e-3, &params, OhmicIntegrator::Exponential);
        let b = source_step(&u, &src, 1e-3, &params, OhmicIntegrator::CrankNicolson);
        assert!((a[EZ] - (-1e-3f64).exp()).abs() < 1e-15);
        assert!((a[EZ] - b[EZ]).abs() < 1e-9);
        // stiff conductor: the exponential form drives E to zero, CN flips sign
        let src = SourceDensities { sigma: 2e4, ..Default::default() };
        let a = source_step(&u, &src, 1e-2, &params, OhmicIntegrator::Exponential);
        let b = source_step(&u, &src, 1e-2, &params, OhmicIntegrator::CrankNicolson);
        assert!(a[EZ].abs() < 1e-12);
        assert!(b[EZ] < -0.9 && b[EZ] > -1.0);
    }

    #[test]
    fn analytic_waves() {
        let params = p();
        let w = WaveConfig::along_x(WaveProfile::Cosine { wavenumber: 2.0 * std::f64::consts::PI });
        let u = w.eval([0.0; 3], 0.0, &params);
        assert_eq!(u[EZ], 1.0);
        assert_eq!(u[BY], -1.0);
        let bump = WaveConfig::along_y(WaveProfile::Bump { eta: 0.25 }, 0.45);
        assert_eq!(bump.eval([0.3, 0.45, 0.1], 0.0, &params)[EZ], 1.0);
        assert_eq!(bump.eval([0.3, 0.45, 0.1], 0.0, &params)[BX], 1.0);
        assert_eq!(bump.eval([0.0, 0.45 + 0.25, 0.0], 0.0, &params), PhmState::ZERO);
        assert_eq!(bump.eval([0.0, 0.9, 0.0], 0.1, &params), PhmState::ZERO);
        assert!(WaveProfile::from_kind("gaussian", 1.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(PhmParams::new(0.0, 1.0, 1.0).is_err());
        assert!(PhmParams::new(1.0, -1.0, 1.0).is_err());
        let mut p = PhmParams::default();
        p.mu0 = 2.0;
        assert!(p.validate().is_err());
    }
}
