//! Space-time data shared by every solver: source models, boundary states
//! and the common time-stepping driver with its stability sentinel.

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::phm::{OhmicIntegrator, PhmState, SourceDensities, Vec3};

/// A state-valued function of position and time.
pub type FieldFn = Arc<dyn Fn(Vec3, f64) -> PhmState + Send + Sync>;
/// A scalar function of position and time.
pub type ScalarFn = Arc<dyn Fn(Vec3, f64) -> f64 + Send + Sync>;
/// A vector function of position and time.
pub type VectorFn = Arc<dyn Fn(Vec3, f64) -> Vec3 + Send + Sync>;
/// A time-independent scalar function of position.
pub type MaskFn = Arc<dyn Fn(Vec3) -> f64 + Send + Sync>;

/// Prescribed current, charge and conductivity.
#[derive(Clone, Default)]
pub struct SourceModel {
    pub sigma: Option<MaskFn>,
    pub current: Option<VectorFn>,
    pub charge: Option<ScalarFn>,
    pub ohmic: OhmicIntegrator,
}

impl fmt::Debug for SourceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceModel")
            .field("sigma", &self.sigma.is_some())
            .field("current", &self.current.is_some())
            .field("charge", &self.charge.is_some())
            .field("ohmic", &self.ohmic)
            .finish()
    }
}

impl SourceModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_active(&self) -> bool {
        self.sigma.is_some() || self.current.is_some() || self.charge.is_some()
    }

    pub fn sigma_at(&self, x: Vec3) -> f64 {
        self.sigma.as_ref().map_or(0.0, |s| s(x))
    }

    /// Densities at `x` and `t`, with a precomputed conductivity.
    pub fn densities(&self, x: Vec3, t: f64, sigma: f64) -> SourceDensities {
        SourceDensities {
            j: self.current.as_ref().map_or([0.0; 3], |j| j(x, t)),
            rho: self.charge.as_ref().map_or(0.0, |r| r(x, t)),
            sigma,
        }
    }
}

/// Wall-clock time spent in each phase of a step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub collision: Duration,
    pub transport: Duration,
    pub micro_macro: Duration,
    pub source: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.collision + self.transport + self.micro_macro + self.source
    }
}

/// Common interface of every time-marching solver.
pub trait Stepper {
    fn name(&self) -> &'static str;
    fn time(&self) -> f64;
    /// Step size the solver was configured with.
    fn nominal_dt(&self) -> f64;
    /// Advances by `dt`, which may be smaller than the nominal step.
    fn step(&mut self, dt: f64) -> Result<()>;
    fn steps_taken(&self) -> usize;
    fn n_cells(&self) -> usize;
    /// Cell-centered macroscopic state in cell order.
    fn state(&self) -> Vec<PhmState>;
    /// Largest absolute component over all cells, NaN if any value is not finite.
    fn max_abs(&self) -> f64;
    fn timings(&self) -> PhaseTimings;
}

/// Largest absolute entry; NaN as soon as any entry is not finite.
pub fn state_max_abs(states: &[PhmState]) -> f64 {
    let mut m = 0.0f64;
    for s in states {
        for v in s.0 {
            if !v.is_finite() {
                return f64::NAN;
            }
            m = m.max(v.abs());
        }
    }
    m
}

/// Growth factor of the L-infinity norm that trips the sentinel.
pub const GROWTH_LIMIT: f64 = 10.0;

/// Aborts a run on non-finite values or on runaway growth.
#[derive(Clone, Copy, Debug)]
pub struct Sentinel {
    initial: f64,
    limit: f64,
}

impl Sentinel {
    pub fn new(initial_max: f64) -> Self {
        Self {
            initial: initial_max,
            limit: GROWTH_LIMIT,
        }
    }

    pub fn check(&self, step: usize, time: f64, max_abs: f64) -> Result<()> {
        if !max_abs.is_finite() {
            return Err(Error::Unstable {
                step,
                time,
                reason: "non-finite value".into(),
            });
        }
        if self.initial > 0.0 && max_abs > self.limit * self.initial {
            return Err(Error::Unstable {
                step,
                time,
                reason: format!(
                    "max |U| grew from {} to {} (more than {}x)",
                    self.initial, max_abs, self.limit
                ),
            });
        }
        Ok(())
    }
}

/// Number of steps of size `dt` needed to reach `t_end` from `t0`, and the
/// length of the final (possibly clipped) step.
pub fn step_plan(t0: f64, t_end: f64, dt: f64) -> (usize, f64) {
    let span = t_end - t0;
    if span <= 0.0 {
        return (0, 0.0);
    }
    let ratio = span / dt;
    let full = (ratio + 1e-9).floor();
    let rest = span - full * dt;
    if rest > 1e-9 * dt {
        (full as usize + 1, rest)
    } else {
        (full as usize, dt)
    }
}

/// Advances `solver` to `t_end`, clipping the final step and checking the
/// sentinel after every step. `observe` sees the solver after each step.
pub fn advance_to(
    solver: &mut dyn Stepper,
    t_end: f64,
    mut observe: impl FnMut(&dyn Stepper) -> Result<()>,
) -> Result<()> {
    let sentinel = Sentinel::new(solver.max_abs());
    let dt = solver.nominal_dt();
    let (n, last) = step_plan(solver.time(), t_end, dt);
    for s in 0..n {
        let h = if s + 1 == n { last } else { dt };
        solver.step(h)?;
        sentinel.check(solver.steps_taken(), solver.time(), solver.max_abs())?;
        observe(&*solver)?;
    }
    Ok(())
}
