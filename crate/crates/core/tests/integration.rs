use std::f64::consts::PI;
use std::sync::Arc;

use beam_maxwell::cases::{self, error_norm, NormKind, SolverConfig, SolverKind};
use beam_maxwell::phm::*;
use beam_maxwell::problem::{FieldFn, SourceModel, Stepper};
use beam_maxwell::runner::run_case;
use beam_maxwell::structured::{BoundaryKind, FvsSetup, FvsSolver, Reconstruction, StructuredGrid};
use beam_maxwell::unstructured::meshgen::{box_mesh_3d, rect_mesh_2d, rotate_z};
use beam_maxwell::unstructured::{FvsUSolver, GradientMethod, PatchKind, UnstructuredMesh, UnstructuredSetup};

fn smooth(x: Vec3) -> PhmState {
    PhmState([
        (2.0 * PI * x[0]).sin(),
        (2.0 * PI * x[1]).cos() * x[2],
        (2.0 * PI * x[2]).cos(),
        x[0] * (1.0 - x[0]),
        0.3 * (2.0 * PI * (x[0] + x[1])).sin(),
        -0.2,
        (2.0 * PI * x[1]).sin(),
        0.5 * (2.0 * PI * x[2]).sin(),
    ])
}

#[test]
fn unstructured_hex_fvs_matches_structured_fvs() {
    let n = 6;
    let params = PhmParams::new(1.0, 0.8, 1.2).unwrap();
    let data = box_mesh_3d([n; 3], [0.0; 3], [1.0; 3], false).unwrap();
    let mut mesh = UnstructuredMesh::from_data(&data).unwrap();
    for (a, b) in [("xmin", "xmax"), ("ymin", "ymax"), ("zmin", "zmax")] {
        mesh.make_periodic(a, b).unwrap();
    }
    let mesh = Arc::new(mesh);
    let mut u = FvsUSolver::new(
        UnstructuredSetup {
            mesh: mesh.clone(),
            params,
            cfl: 0.9,
            reconstruction: Reconstruction::FirstOrder,
            gradient: GradientMethod::LeastSquares,
            bindings: vec![],
            farfield: None,
            sources: SourceModel::none(),
        },
        smooth,
    )
    .unwrap();
    let grid = StructuredGrid::cube(3, n, 0.0, 1.0, BoundaryKind::Periodic).unwrap();
    let mut s = FvsSolver::new(
        FvsSetup {
            grid: grid.clone(),
            params,
            cfl: 0.5,
            reconstruction: Reconstruction::FirstOrder,
            strict_cfl: true,
            sources: SourceModel::none(),
            boundary: None,
        },
        smooth,
    )
    .unwrap();
    let dt = u.nominal_dt().min(s.nominal_dt());
    for _ in 0..3 {
        u.step(dt).unwrap();
        s.step(dt).unwrap();
        let (su, ss) = (u.state(), s.state());
        for (c, x) in mesh.centroids.iter().enumerate() {
            let g = grid.linear(
                (x[0] * n as f64) as usize,
                (x[1] * n as f64) as usize,
                (x[2] * n as f64) as usize,
            );
            assert!((su[c] - ss[g]).max_abs() < 1e-10, "cell {c}: {:?} vs {:?}", su[c], ss[g]);
        }
    }
}

fn plane_wave_error_2d(mesh_angle: f64, wave_angle: f64, n: usize) -> f64 {
    let mut data = rect_mesh_2d([n, n], [-0.5, -0.5], [0.5, 0.5], false).unwrap();
    rotate_z(&mut data, mesh_angle);
    let mesh = Arc::new(UnstructuredMesh::from_data(&data).unwrap());
    let wave = WaveConfig {
        direction: [wave_angle.cos(), wave_angle.sin(), 0.0],
        ..WaveConfig::along_x(WaveProfile::Cosine { wavenumber: 2.0 * PI })
    };
    let params = PhmParams::default();
    let exact: FieldFn = Arc::new(move |x, t| wave.eval(x, t, &params));
    let f0 = exact.clone();
    let mut s = FvsUSolver::new(
        UnstructuredSetup {
            mesh: mesh.clone(),
            params,
            cfl: 0.8,
            reconstruction: Reconstruction::Linear {
                limiter: beam_maxwell::structured::SlopeLimiter::None,
            },
            gradient: GradientMethod::LeastSquares,
            bindings: ["xmin", "xmax", "ymin", "ymax"]
                .iter()
                .map(|p| (p.to_string(), PatchKind::FarfieldAnalytic))
                .collect(),
            farfield: Some(exact.clone()),
            sources: SourceModel::none(),
        },
        move |x| f0(x, 0.0),
    )
    .unwrap();
    let t_end = 0.5;
    while s.time() < t_end - 1e-12 {
        let dt = s.nominal_dt().min(t_end - s.time());
        s.step(dt).unwrap();
    }
    let ez: Vec<f64> = s.state().iter().map(|u| u[EZ]).collect();
    let ex: Vec<f64> = mesh.centroids.iter().map(|x| exact(*x, s.time())[EZ]).collect();
    error_norm(&ez, &ex, &mesh.volumes, NormKind::L1).unwrap()
}

#[test]
fn tilted_mesh_error_matches_aligned_mesh() {
    let aligned = plane_wave_error_2d(0.0, 0.0, 32);
    let tilted = plane_wave_error_2d(PI / 4.0, 0.0, 32);
    let ratio = tilted / aligned;
    assert!((0.5..=2.0).contains(&ratio), "aligned {aligned:e}, tilted {tilted:e}");
}

#[test]
fn rotating_mesh_and_wave_together_changes_nothing() {
    let a = plane_wave_error_2d(0.0, 0.0, 16);
    let b = plane_wave_error_2d(0.3, 0.3, 16);
    assert!((a - b).abs() <= 1e-10 * a, "{a:e} vs {b:e}");
}

#[test]
fn charge_without_cleaning_coupling_leaves_e_zero() {
    let mut scn = cases::charge_test(100, PhmParams::default()).unwrap();
    scn.t_end = 0.5;
    let live = run_case(&scn, &SolverConfig::new(SolverKind::BeamEt), None).unwrap();
    assert!(live.state.iter().any(|u| u.e() != [0.0; 3]));
    scn.params = PhmParams::new(1.0, 0.0, 1.0).unwrap();
    scn.needs_cleaning = false;
    for kind in [SolverKind::BeamEt, SolverKind::Fvs] {
        let r = run_case(&scn, &SolverConfig::new(kind), None).unwrap();
        assert!(r.report.steps > 0);
        assert!(r.state.iter().all(|u| u.e() == [0.0; 3]), "{kind:?}");
    }
}
