//! TOML run configuration.
//!
//! ```toml
//! [case]
//! name = "plane_wave"   # plane_wave | dissipation_sine | rect_pulse | antenna | sphere | charge_test
//! dim = 1
//! n = 80
//!
//! [physics]
//! c = 1.0
//! chi = 1.0
//! gamma = 1.0
//!
//! [solver]
//! kind = "beam_et"
//! policy = { mode = "fixed_omega", omega = 2.0 }
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cases::{self, NormKind, Scenario, SolverConfig, SolverKind};
use crate::error::{Error, Result};
use crate::phm::{PhmParams, EZ};
use crate::unstructured::meshgen::{sphere_in_box, SphereMeshSpec};
use crate::unstructured::{read_msh, UnstructuredMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    PlaneWave,
    DissipationSine,
    RectPulse,
    Antenna,
    Sphere,
    ChargeTest,
}

impl CaseKind {
    pub fn name(self) -> &'static str {
        match self {
            CaseKind::PlaneWave => "plane_wave",
            CaseKind::DissipationSine => "dissipation_sine",
            CaseKind::RectPulse => "rect_pulse",
            CaseKind::Antenna => "antenna",
            CaseKind::Sphere => "sphere",
            CaseKind::ChargeTest => "charge_test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseConfig {
    pub name: CaseKind,
    pub dim: usize,
    pub n: usize,
    /// Overrides the case's final time.
    pub t_end: Option<f64>,
    /// Antenna conductivity.
    pub sigma: f64,
    /// Sphere mesh file; generated from `sphere_mesh` when absent.
    pub mesh: Option<PathBuf>,
    pub sphere_mesh: SphereMeshSpec,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            name: CaseKind::PlaneWave,
            dim: 1,
            n: 80,
            t_end: None,
            sigma: 2e4,
            mesh: None,
            sphere_mesh: SphereMeshSpec::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub c: f64,
    pub chi: f64,
    pub gamma: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            chi: 1.0,
            gamma: 1.0,
        }
    }
}

impl PhysicsConfig {
    pub fn params(&self) -> Result<PhmParams> {
        PhmParams::new(self.c, self.chi, self.gamma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write a VTK snapshot of the initial and final state.
    pub vtk: bool,
    /// Write probe CSVs.
    pub probes: bool,
    /// Component used by convergence errors.
    pub component: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            vtk: true,
            probes: true,
            component: EZ,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub resolutions: Vec<usize>,
    pub norm: NormKind,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            resolutions: vec![20, 40, 80, 160, 320],
            norm: NormKind::L1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub solvers: Vec<SolverKind>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            solvers: vec![SolverKind::BeamEt, SolverKind::Fdtd],
        }
    }
}

/// Everything a CLI invocation needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: CaseConfig,
    pub physics: PhysicsConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub convergence: ConvergenceConfig,
    pub compare: CompareConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; a relative mesh path is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(m), Some(dir)) = (&cfg.case.mesh, path.parent()) {
            if m.is_relative() {
                cfg.case.mesh = Some(dir.join(m));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads or generates the sphere mesh.
    pub fn sphere_mesh(&self) -> Result<Arc<UnstructuredMesh>> {
        let data = match &self.case.mesh {
            Some(p) => read_msh(p)?,
            None => sphere_in_box(&self.case.sphere_mesh)?,
        };
        Ok(Arc::new(UnstructuredMesh::from_data(&data)?))
    }

    /// Scenario at resolution `n`; `mesh` is reused for the sphere case.
    pub fn scenario_with(&self, n: usize, mesh: Option<Arc<UnstructuredMesh>>) -> Result<Scenario> {
        let params = self.physics.params()?;
        let c = &self.case;
        let mut scn = match c.name {
            CaseKind::PlaneWave => cases::plane_wave(c.dim, n, params)?,
            CaseKind::DissipationSine => cases::dissipation_sine(n, 1.0, params)?,
            CaseKind::RectPulse => cases::rect_pulse(n, params)?,
            CaseKind::Antenna => cases::antenna(n, c.sigma, params)?,
            CaseKind::Sphere => {
                let mesh = match mesh {
                    Some(m) => m,
                    None => self.sphere_mesh()?,
                };
                cases::sphere(mesh, params)?
            }
            CaseKind::ChargeTest => cases::charge_test(n, params)?,
        };
        if let Some(t) = c.t_end {
            scn.t_end = t;
        }
        scn.validate()?;
        Ok(scn)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.scenario_with(self.case.n, None)
    }

    pub fn solver_for(&self, kind: SolverKind) -> SolverConfig {
        SolverConfig {
            kind,
            ..self.solver.clone()
        }
    }
}
