//! Scenario library: initial data, sources, boundaries and probes of the
//! bundled test cases, plus a factory turning a scenario into a solver.

pub mod diagnostics;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kinetic::{Lattice, RelaxationPolicy};
use crate::phm::{Axis, PhmParams, PhmState, Vec3, WaveConfig, WaveProfile, EZ};
use crate::problem::{FieldFn, ScalarFn, SourceModel, Stepper};
use crate::structured::fvs::fvs_cfl_limit;
use crate::structured::{
    BeamSetup, BeamSolver, BeamTransport, BoundaryKind, FdtdSetup, FdtdSolver, FvsSetup, FvsSolver,
    Reconstruction, StructuredGrid,
};
use crate::unstructured::{
    default_unstructured_cfl, BeamUSolver, FvsUSolver, GradientMethod, PatchKind, UnstructuredMesh,
    UnstructuredSetup,
};

pub use diagnostics::*;

/// Where a scenario lives.
#[derive(Clone)]
pub enum Domain {
    Grid(StructuredGrid),
    Mesh {
        mesh: Arc<UnstructuredMesh>,
        bindings: Vec<(String, PatchKind)>,
    },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Grid(g) => g.dim,
            Domain::Mesh { mesh, .. } => mesh.dim,
        }
    }

    pub fn n_cells(&self) -> usize {
        match self {
            Domain::Grid(g) => g.n_cells(),
            Domain::Mesh { mesh, .. } => mesh.n_cells(),
        }
    }

    pub fn centers(&self) -> Vec<Vec3> {
        match self {
            Domain::Grid(g) => (0..g.n_cells()).map(|c| g.cell_center(c)).collect(),
            Domain::Mesh { mesh, .. } => mesh.centroids.clone(),
        }
    }

    pub fn volumes(&self) -> Vec<f64> {
        match self {
            Domain::Grid(g) => vec![g.cell_volume(); g.n_cells()],
            Domain::Mesh { mesh, .. } => mesh.volumes.clone(),
        }
    }

    pub fn grid(&self) -> Option<&StructuredGrid> {
        match self {
            Domain::Grid(g) => Some(g),
            Domain::Mesh { .. } => None,
        }
    }
}

/// Straight sampling line from `from` to `to`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub name: String,
    pub from: Vec3,
    pub to: Vec3,
    pub count: usize,
}

/// Sampling circle in the plane normal to `normal` through `center`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleSpec {
    pub name: String,
    pub center: Vec3,
    pub radius: f64,
    pub normal: Axis,
    pub count: usize,
}

/// Probes written at the end of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPlan {
    pub lines: Vec<LineSpec>,
    pub circles: Vec<CircleSpec>,
    /// Component tracked by the overshoot metric.
    pub overshoot_component: Option<usize>,
}

/// A fully specified test case.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub params: PhmParams,
    pub domain: Domain,
    pub initial: FieldFn,
    /// Exact solution, when one is known.
    pub exact: Option<FieldFn>,
    /// Incident field for Dirichlet and far-field boundaries.
    pub boundary: Option<FieldFn>,
    pub sources: SourceModel,
    pub t_end: f64,
    pub outputs: OutputPlan,
    /// The case needs the cleaning potentials (charge sources).
    pub needs_cleaning: bool,
}

impl Scenario {
    /// Checks internal consistency.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.t_end >= 0.0) {
            return Err(invalid(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.needs_cleaning && self.params.chi == 0.0 {
            return Err(invalid(
                "this case relies on divergence cleaning: chi must be positive",
            ));
        }
        match &self.domain {
            Domain::Grid(g) => {
                if g.bc.iter().any(|b| *b == BoundaryKind::AnalyticDirichlet) && self.boundary.is_none() {
                    return Err(invalid("Dirichlet boundaries need a boundary field"));
                }
            }
            Domain::Mesh { mesh, bindings } => {
                for (name, kind) in bindings {
                    if mesh.patch_id(name).is_none() {
                        return Err(invalid(format!("bound patch '{name}' does not exist on the mesh")));
                    }
                    if *kind == PatchKind::FarfieldAnalytic && self.boundary.is_none() {
                        return Err(invalid("far-field patches need an incident field"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Initial state in cell order.
    pub fn initial_state(&self) -> Vec<PhmState> {
        self.domain.centers().iter().map(|&x| (self.initial)(x, 0.0)).collect()
    }

    /// Exact state at `t` in cell order.
    pub fn exact_state(&self, t: f64) -> Option<Vec<PhmState>> {
        let ex = self.exact.as_ref()?;
        Some(self.domain.centers().iter().map(|&x| ex(x, t)).collect())
    }
}

fn wave_fn(wave: WaveConfig, params: PhmParams) -> FieldFn {
    Arc::new(move |x, t| wave.eval(x, t, &params))
}

/// Indicator of the closed square `[lo, hi]^2` in the xy-plane (`H(0) = 1`).
pub fn square_indicator(x: Vec3, lo: f64, hi: f64) -> f64 {
    if x[0] >= lo && x[0] <= hi && x[1] >= lo && x[1] <= hi {
        1.0
    } else {
        0.0
    }
}

/// Cosine plane wave `Ez = cos(2 pi (x - ct))`, `By = -Ez/c` on the periodic
/// unit box, run for one period.
pub fn plane_wave(dim: usize, n: usize, params: PhmParams) -> Result<Scenario> {
    if n < 8 {
        return Err(invalid("plane wave needs N >= 8"));
    }
    let grid = StructuredGrid::cube(dim, n, 0.0, 1.0, BoundaryKind::Periodic)?;
    let wave = WaveConfig::along_x(WaveProfile::Cosine {
        wavenumber: 2.0 * PI,
    });
    let f = wave_fn(wave, params);
    Ok(Scenario {
        name: format!("plane_wave_{dim}d"),
        params,
        domain: Domain::Grid(grid),
        initial: f.clone(),
        exact: Some(f),
        boundary: None,
        sources: SourceModel::none(),
        t_end: 1.0 / params.c,
        outputs: OutputPlan {
            lines: vec![LineSpec {
                name: "axis".into(),
                from: [0.0, 0.5, 0.5],
                to: [1.0, 0.5, 0.5],
                count: n,
            }],
            ..Default::default()
        },
        needs_cleaning: false,
    })
}

/// Polarized `Ey`/`Bz` sine wave with one wavelength on the periodic unit
/// interval, for measuring numerical dissipation.
pub fn dissipation_sine(n: usize, t_end: f64, params: PhmParams) -> Result<Scenario> {
    let grid = StructuredGrid::cube(1, n, 0.0, 1.0, BoundaryKind::Periodic)?;
    let wave = WaveConfig::along_x_ey(WaveProfile::Sine { wavenumber: 2.0 * PI });
    let f = wave_fn(wave, params);
    Ok(Scenario {
        name: "dissipation_sine".into(),
        params,
        domain: Domain::Grid(grid),
        initial: f.clone(),
        exact: Some(f),
        boundary: None,
        sources: SourceModel::none(),
        t_end,
        outputs: OutputPlan::default(),
        needs_cleaning: false,
    })
}

/// Square `Ez` pulse on `[0.25, 0.75]^2` driving an Ohmic current `J = sigma E`
/// with `sigma = 1` on the same square.
pub fn rect_pulse(n: usize, params: PhmParams) -> Result<Scenario> {
    if n < 50 {
        return Err(invalid("the rectangular pulse needs N >= 50"));
    }
    let grid = StructuredGrid::cube(2, n, 0.0, 1.0, BoundaryKind::Periodic)?;
    let f: FieldFn = Arc::new(|x, _| PhmState::unit(EZ, square_indicator(x, 0.25, 0.75)));
    Ok(Scenario {
        name: "rect_pulse".into(),
        params,
        domain: Domain::Grid(grid),
        initial: f,
        exact: None,
        boundary: None,
        sources: SourceModel {
            sigma: Some(Arc::new(|x| square_indicator(x, 0.25, 0.75))),
            ..Default::default()
        },
        t_end: 0.1,
        outputs: OutputPlan {
            lines: vec![LineSpec {
                name: "diagonal".into(),
                from: [0.0, 0.0, 0.0],
                to: [1.0, 1.0, 0.0],
                count: 2 * n,
            }],
            circles: vec![],
            overshoot_component: Some(EZ),
        },
        needs_cleaning: false,
    })
}

/// Antenna half-length and radius.
pub const ANTENNA_HALF_LENGTH: f64 = 0.125;
pub const ANTENNA_RADIUS: f64 = 0.025;

/// Staircase mask of the z-aligned antenna centered in the unit cube.
pub fn antenna_mask(x: Vec3) -> bool {
    let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
    r2 <= ANTENNA_RADIUS * ANTENNA_RADIUS && (x[2] - 0.5).abs() <= ANTENNA_HALF_LENGTH
}

/// Bump wave travelling along y past a conducting antenna.
pub fn antenna(n: usize, sigma: f64, params: PhmParams) -> Result<Scenario> {
    if !(sigma >= 0.0) {
        return Err(invalid("antenna conductivity must be non-negative"));
    }
    let grid = StructuredGrid::cube(3, n, 0.0, 1.0, BoundaryKind::AnalyticDirichlet)?;
    let wave = WaveConfig::along_y(WaveProfile::Bump { eta: 0.25 }, 0.45);
    let f = wave_fn(wave, params);
    let sources = if sigma > 0.0 {
        SourceModel {
            sigma: Some(Arc::new(move |x| if antenna_mask(x) { sigma } else { 0.0 })),
            ..Default::default()
        }
    } else {
        SourceModel::none()
    };
    let line = |name: &str, z: f64| LineSpec {
        name: name.into(),
        from: [0.5, 0.0, z],
        to: [0.5, 1.0, z],
        count: n,
    };
    Ok(Scenario {
        name: "antenna".into(),
        params,
        domain: Domain::Grid(grid),
        initial: f.clone(),
        exact: if sigma == 0.0 { Some(f.clone()) } else { None },
        boundary: Some(f),
        sources,
        t_end: 0.1,
        outputs: OutputPlan {
            lines: vec![line("z0.625", 0.625), line("z0.5", 0.5)],
            ..Default::default()
        },
        needs_cleaning: false,
    })
}

/// Plane wave `Ez = cos(pi (x - ct))` scattering off a conducting sphere. The
/// mesh must carry `sphere` and `farfield` patches.
pub fn sphere(mesh: Arc<UnstructuredMesh>, params: PhmParams) -> Result<Scenario> {
    for p in ["sphere", "farfield"] {
        if mesh.patch_id(p).is_none() {
            return Err(invalid(format!("sphere mesh lacks the '{p}' patch")));
        }
    }
    let wave = WaveConfig::along_x(WaveProfile::Cosine { wavenumber: PI });
    let f = wave_fn(wave, params);
    let circle = |r: f64| CircleSpec {
        name: format!("r{r}"),
        center: [0.0, 0.0, 0.5],
        radius: r,
        normal: Axis::Z,
        count: 360,
    };
    Ok(Scenario {
        name: "sphere".into(),
        params,
        domain: Domain::Mesh {
            mesh,
            bindings: vec![
                ("sphere".into(), PatchKind::Pec),
                ("farfield".into(), PatchKind::FarfieldAnalytic),
            ],
        },
        initial: f.clone(),
        exact: None,
        boundary: Some(f),
        sources: SourceModel::none(),
        t_end: 10.0,
        outputs: OutputPlan {
            circles: vec![circle(1.5), circle(2.5)],
            ..Default::default()
        },
        needs_cleaning: false,
    })
}

/// Amplitude of the injected charge.
pub const CHARGE_RHO0: f64 = 1e-12;

/// Injected charge `rho = rho0 w t F(x)` on `[0.49, 0.51]^2` with no current,
/// starting from zero fields; only the cleaning potential reacts to it.
pub fn charge_test(n: usize, params: PhmParams) -> Result<Scenario> {
    if n < 100 {
        return Err(invalid("the charge test needs N >= 100"));
    }
    let grid = StructuredGrid::cube(2, n, 0.0, 1.0, BoundaryKind::AnalyticDirichlet)?;
    let omega = 1.0;
    let charge: ScalarFn = Arc::new(move |x, t| CHARGE_RHO0 * omega * t * square_indicator(x, 0.49, 0.51));
    let zero: FieldFn = Arc::new(|_, _| PhmState::ZERO);
    let scn = Scenario {
        name: "charge_test".into(),
        params,
        domain: Domain::Grid(grid),
        initial: zero.clone(),
        exact: None,
        boundary: Some(zero),
        sources: SourceModel {
            charge: Some(charge),
            ..Default::default()
        },
        t_end: 5.0,
        outputs: OutputPlan::default(),
        needs_cleaning: true,
    };
    scn.validate()?;
    Ok(scn)
}

/// Solver families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    BeamEt,
    BeamCtu,
    Fvs,
    Fdtd,
    BeamU,
    FvsU,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::BeamEt,
        SolverKind::BeamCtu,
        SolverKind::Fvs,
        SolverKind::Fdtd,
        SolverKind::BeamU,
        SolverKind::FvsU,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::BeamEt => "beam_et",
            SolverKind::BeamCtu => "beam_ctu",
            SolverKind::Fvs => "fvs",
            SolverKind::Fdtd => "fdtd",
            SolverKind::BeamU => "beam_u",
            SolverKind::FvsU => "fvs_u",
        }
    }

    pub fn is_unstructured(self) -> bool {
        matches!(self, SolverKind::BeamU | SolverKind::FvsU)
    }
}

impl std::str::FromStr for SolverKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| invalid(format!("unknown solver '{s}'")))
    }
}

/// Numerical settings of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Kinetic speed factor; `None` picks the solver default.
    pub lambda: Option<f64>,
    pub policy: RelaxationPolicy,
    /// Solver-specific CFL number; `None` picks the solver default.
    pub cfl: Option<f64>,
    pub reconstruction: Reconstruction,
    pub gradient: GradientMethod,
    pub strict_cfl: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::BeamEt,
            lambda: None,
            policy: RelaxationPolicy::default(),
            cfl: None,
            reconstruction: Reconstruction::FirstOrder,
            gradient: GradientMethod::LeastSquares,
            strict_cfl: false,
        }
    }
}

/// Default kinetic speed factor on Cartesian grids is this margin times
/// `sqrt(dim) max(1, chi, gamma)`.
pub const DEFAULT_LAMBDA_MARGIN: f64 = 1.1;
/// Default kinetic speed factor on unstructured meshes.
pub const DEFAULT_LAMBDA_UNSTRUCTURED: f64 = 1.5;

impl SolverConfig {
    pub fn new(kind: SolverKind) -> Self {
        Self {
            kind,
            ..Default::default()
        }
    }

    pub fn lambda(&self, dim: usize, params: &PhmParams) -> f64 {
        self.lambda.unwrap_or(if self.kind.is_unstructured() {
            DEFAULT_LAMBDA_UNSTRUCTURED
        } else {
            DEFAULT_LAMBDA_MARGIN * (dim as f64).sqrt() * params.chi.max(params.gamma).max(1.0)
        })
    }

    /// CFL number used for a domain of dimension `dim`.
    pub fn cfl(&self, dim: usize) -> f64 {
        self.cfl.unwrap_or(match self.kind {
            SolverKind::BeamEt | SolverKind::BeamCtu => 1.0,
            SolverKind::Fvs => fvs_cfl_limit(dim),
            SolverKind::Fdtd => 0.99 / (dim as f64).sqrt(),
            SolverKind::BeamU | SolverKind::FvsU => default_unstructured_cfl(self.reconstruction),
        })
    }
}

/// Builds the solver for `scn` with initial data applied.
pub fn build_solver(scn: &Scenario, cfg: &SolverConfig) -> Result<Box<dyn Stepper>> {
    scn.validate()?;
    let params = scn.params;
    let init = |x: Vec3| (scn.initial)(x, 0.0);
    let dim = scn.domain.dim();
    let cfl = cfg.cfl(dim);
    match (&scn.domain, cfg.kind) {
        (Domain::Grid(grid), SolverKind::BeamEt | SolverKind::BeamCtu) => {
            let setup = BeamSetup {
                grid: grid.clone(),
                lattice: Lattice::new(dim, cfg.lambda(dim, &params), params.c)?,
                params,
                policy: cfg.policy.clone(),
                transport: if cfg.kind == SolverKind::BeamEt {
                    BeamTransport::ExactShift
                } else {
                    BeamTransport::Ctu
                },
                cfl,
                sources: scn.sources.clone(),
                boundary: scn.boundary.clone(),
            };
            Ok(Box::new(BeamSolver::new(setup, init)?))
        }
        (Domain::Grid(grid), SolverKind::Fvs) => {
            let setup = FvsSetup {
                grid: grid.clone(),
                params,
                cfl,
                reconstruction: cfg.reconstruction,
                strict_cfl: cfg.strict_cfl,
                sources: scn.sources.clone(),
                boundary: scn.boundary.clone(),
            };
            Ok(Box::new(FvsSolver::new(setup, init)?))
        }
        (Domain::Grid(grid), SolverKind::Fdtd) => {
            if scn.needs_cleaning {
                return Err(invalid(format!(
                    "the FDTD baseline cannot run '{}': it needs the cleaning potentials",
                    scn.name
                )));
            }
            let setup = FdtdSetup {
                grid: grid.clone(),
                params,
                cfl,
                sources: scn.sources.clone(),
                exact: scn.exact.clone(),
            };
            Ok(Box::new(FdtdSolver::new(setup, init)?))
        }
        (Domain::Mesh { mesh, bindings }, SolverKind::BeamU | SolverKind::FvsU) => {
            let setup = UnstructuredSetup {
                mesh: mesh.clone(),
                params,
                cfl,
                reconstruction: cfg.reconstruction,
                gradient: cfg.gradient,
                bindings: bindings.clone(),
                farfield: scn.boundary.clone(),
                sources: scn.sources.clone(),
            };
            if cfg.kind == SolverKind::BeamU {
                let lattice = Lattice::new(dim, cfg.lambda(dim, &params), params.c)?;
                Ok(Box::new(BeamUSolver::new(setup, lattice, cfg.policy.clone(), init)?))
            } else {
                Ok(Box::new(FvsUSolver::new(setup, init)?))
            }
        }
        (Domain::Grid(_), k) => Err(invalid(format!(
            "solver '{}' needs an unstructured mesh",
            k.name()
        ))),
        (Domain::Mesh { .. }, k) => Err(invalid(format!(
            "solver '{}' runs on Cartesian grids only",
            k.name()
        ))),
    }
}
