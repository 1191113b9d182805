//! Discrete-velocity vector-BGK model: lattices, equilibria, collision and
//! the smoothness detector that switches the relaxation factor per cell.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::phm::{flux_along, PhmParams, PhmState, Vec3};

/// Largest beam count over all supported lattices.
pub const MAX_BEAMS: usize = 4;

/// Fixed-capacity set of beam distributions for one cell.
pub type BeamSet = [PhmState; MAX_BEAMS];

const PATTERN_3D: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];
const PATTERN_2D: [[f64; 3]; 4] = [
    [1.0, 1.0, 0.0],
    [1.0, -1.0, 0.0],
    [-1.0, 1.0, 0.0],
    [-1.0, -1.0, 0.0],
];
const PATTERN_1D: [[f64; 3]; 2] = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]];

/// D1Q2, D2Q4 or D3Q4 velocity set scaled by `lambda * c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    dim: usize,
    lambda: f64,
    c: f64,
    patterns: Vec<Vec3>,
    velocities: Vec<Vec3>,
}

impl Lattice {
    pub fn new(dim: usize, lambda: f64, c: f64) -> Result<Self> {
        if !(lambda >= 1.0 && lambda.is_finite()) {
            return Err(invalid(format!(
                "kinetic speed factor lambda must be >= 1 (sub-characteristic condition), got {lambda}"
            )));
        }
        if !(c > 0.0) {
            return Err(invalid("wave speed must be positive"));
        }
        let patterns: Vec<Vec3> = match dim {
            1 => PATTERN_1D.to_vec(),
            2 => PATTERN_2D.to_vec(),
            3 => PATTERN_3D.to_vec(),
            _ => return Err(invalid(format!("lattice dimension must be 1, 2 or 3, got {dim}"))),
        };
        let s = lambda * c;
        let velocities = patterns
            .iter()
            .map(|p| [s * p[0], s * p[1], s * p[2]])
            .collect();
        Ok(Self {
            dim,
            lambda,
            c,
            patterns,
            velocities,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of beams.
    pub fn m(&self) -> usize {
        self.velocities.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Microscopic speed along each active axis, `lambda * c`.
    pub fn speed(&self) -> f64 {
        self.lambda * self.c
    }

    pub fn velocities(&self) -> &[Vec3] {
        &self.velocities
    }

    /// Unit sign pattern of beam `k` (entries in {-1, 0, 1}).
    pub fn pattern(&self, k: usize) -> Vec3 {
        self.patterns[k]
    }

    /// `lambda c` exceeds the largest macroscopic wave speed.
    pub fn is_subcharacteristic(&self, params: &PhmParams) -> bool {
        self.speed() >= params.max_wave_speed()
    }

    /// Equilibrium of a single beam: `U/m + (v_k . F(U)) / (m lambda^2 c^2)`.
    #[inline]
    pub fn equilibrium_beam(&self, u: &PhmState, k: usize, params: &PhmParams) -> PhmState {
        let m = self.m() as f64;
        let s = self.speed();
        let f = flux_along(u, self.velocities[k], params);
        (*u * (1.0 / m)).axpy(1.0 / (m * s * s), &f)
    }

    /// Equilibrium distributions `g_k(U)`. Unused slots are zero.
    #[inline]
    pub fn equilibrium(&self, u: &PhmState, params: &PhmParams) -> BeamSet {
        let mut g = [PhmState::ZERO; MAX_BEAMS];
        for (k, gk) in g.iter_mut().enumerate().take(self.m()) {
            *gk = self.equilibrium_beam(u, k, params);
        }
        g
    }

    /// `sum_k f_k`.
    #[inline]
    pub fn moments(&self, f: &[PhmState]) -> PhmState {
        let mut u = PhmState::ZERO;
        for fk in &f[..self.m()] {
            u += *fk;
        }
        u
    }

    /// `sum_k f_k (x) v_k`, one 8-vector per axis.
    pub fn flux_moments(&self, f: &[PhmState]) -> [PhmState; 3] {
        let mut out = [PhmState::ZERO; 3];
        for (fk, v) in f[..self.m()].iter().zip(&self.velocities) {
            for (o, vj) in out.iter_mut().zip(v) {
                *o = o.axpy(*vj, fk);
            }
        }
        out
    }

    /// `f_k <- (1 - omega) f_k + omega g_k(U)`, with `U` the moments of `f`.
    #[inline]
    pub fn collide(&self, f: &mut [PhmState], u: &PhmState, omega: f64, params: &PhmParams) {
        for (k, fk) in f[..self.m()].iter_mut().enumerate() {
            let g = self.equilibrium_beam(u, k, params);
            *fk = *fk * (1.0 - omega) + g * omega;
        }
    }
}

/// Checked version of [`Lattice::collide`].
pub fn collide(
    f: &BeamSet,
    u: &PhmState,
    omega: f64,
    lattice: &Lattice,
    params: &PhmParams,
) -> Result<BeamSet> {
    check_omega(omega)?;
    let mut out = *f;
    lattice.collide(&mut out, u, omega, params);
    Ok(out)
}

pub(crate) fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega <= 2.0) {
        return Err(invalid(format!("relaxation factor omega must lie in (0, 2], got {omega}")));
    }
    Ok(())
}

/// Relaxation factor of the trapezoidal BGK collision for relaxation time `tau`.
pub fn omega_from_tau(tau: f64, dt: f64) -> Result<f64> {
    if !(tau > 0.0 && dt > 0.0) {
        return Err(invalid(format!("tau and dt must be positive (tau = {tau}, dt = {dt})")));
    }
    let r = dt / tau;
    Ok(r / (1.0 + 0.5 * r))
}

/// Van Leer average `(sign s+ + sign s-) |s+||s-| / (|s+| + |s-|)`, twice.
pub fn van_leer(s_plus: f64, s_minus: f64) -> f64 {
    let denom = s_plus.abs() + s_minus.abs();
    if denom == 0.0 {
        return 0.0;
    }
    let sign = |s: f64| {
        if s > 0.0 {
            1.0
        } else if s < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    (sign(s_plus) + sign(s_minus)) * 2.0 * s_plus.abs() * s_minus.abs() / denom
}

/// Relaxation factor chosen by the smoothness detector: 2 on smooth data,
/// 1 at extrema, flat spots and slopes steeper than `s_max`.
pub fn smoothness_omega(s_plus: f64, s_minus: f64, s_max: f64) -> f64 {
    let l = van_leer(s_plus, s_minus);
    if l == 0.0 || l.abs() > s_max {
        1.0
    } else {
        2.0
    }
}

/// How the collision picks its relaxation factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RelaxationPolicy {
    FixedOmega {
        omega: f64,
    },
    FromTau {
        tau: f64,
    },
    /// Per-cell switch between 1 and 2 based on `components` of the state.
    Detector {
        s_max: f64,
        #[serde(default = "default_monitored")]
        components: Vec<usize>,
    },
}

fn default_monitored() -> Vec<usize> {
    vec![crate::phm::EZ]
}

impl Default for RelaxationPolicy {
    fn default() -> Self {
        RelaxationPolicy::FixedOmega { omega: 2.0 }
    }
}

impl RelaxationPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            RelaxationPolicy::FixedOmega { omega } => check_omega(*omega),
            RelaxationPolicy::FromTau { tau } => {
                if *tau > 0.0 {
                    Ok(())
                } else {
                    Err(invalid(format!("tau must be positive, got {tau}")))
                }
            }
            RelaxationPolicy::Detector { s_max, components } => {
                if !(*s_max > 0.0) {
                    return Err(invalid(format!("detector s_max must be positive, got {s_max}")));
                }
                if components.is_empty() || components.iter().any(|&c| c >= crate::phm::NVARS) {
                    return Err(invalid("detector needs at least one valid component index"));
                }
                Ok(())
            }
        }
    }

    /// The relaxation factor shared by all cells, or `None` for the detector.
    pub fn uniform_omega(&self, dt: f64) -> Result<Option<f64>> {
        match self {
            RelaxationPolicy::FixedOmega { omega } => {
                check_omega(*omega)?;
                Ok(Some(*omega))
            }
            RelaxationPolicy::FromTau { tau } => omega_from_tau(*tau, dt).map(Some),
            RelaxationPolicy::Detector { .. } => Ok(None),
        }
    }
}
