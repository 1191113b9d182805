//! Run orchestration: single runs, resolution sweeps and solver comparisons,
//! with probe output and timing reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::cases::{
    build_solver, convergence_order, error_norm, extract_circle, extract_line, hemisphere_energy,
    phi_inconsistency, total_variation, ConvergenceSeries, Domain, NormKind, OvershootTracker, Samples, Scenario,
    SolverConfig, SolverKind, CHARGE_RHO0,
};
use crate::error::{invalid, Error, Result};
use crate::io::{write_grid_vtk, write_mesh_vtk, OutputConfig, RunConfig, Table, Value};
use crate::phm::{PhmState, COMPONENT_NAMES, EZ, PHI};
use crate::problem::{advance_to, Stepper};

/// Wall time per phase in seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PhaseSeconds {
    pub collision: f64,
    pub transport: f64,
    pub map: f64,
    pub source: f64,
}

/// Summary of one solver run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub solver: String,
    pub cells: usize,
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
    pub phases: PhaseSeconds,
    pub wall_seconds: f64,
    /// Cell updates per second of stepping time.
    pub throughput: f64,
    pub scalars: BTreeMap<String, f64>,
    pub series: BTreeMap<String, Vec<(f64, f64)>>,
    pub outputs: Vec<PathBuf>,
}

/// Final data of a run kept in memory for further analysis.
pub struct RunResult {
    pub report: RunReport,
    pub initial: Vec<PhmState>,
    pub state: Vec<PhmState>,
    pub probes: Vec<(String, Samples)>,
}

/// Runs `f` on a dedicated pool of `threads` workers; 0 keeps the global pool.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Evaluates every probe of the scenario's output plan.
pub fn probe_all(scn: &Scenario, state: &[PhmState]) -> Result<Vec<(String, Samples)>> {
    let mut out = Vec::new();
    for l in &scn.outputs.lines {
        out.push((l.name.clone(), extract_line(&scn.domain, state, l)?));
    }
    for c in &scn.outputs.circles {
        out.push((c.name.clone(), extract_circle(&scn.domain, state, c)?));
    }
    Ok(out)
}

/// Probe table: parameter, position, then all components.
pub fn samples_table(s: &Samples) -> Table {
    let mut cols = vec!["s".to_string(), "x".into(), "y".into(), "z".into()];
    cols.extend(COMPONENT_NAMES.iter().map(|c| c.to_string()));
    let mut t = Table::new(cols);
    for i in 0..s.values.len() {
        let mut row: Vec<Value> = vec![s.param[i].into()];
        row.extend(s.points[i].iter().map(|&v| Value::from(v)));
        row.extend(s.values[i].0.iter().map(|&v| Value::from(v)));
        t.rows.push(row);
    }
    t
}

fn write_snapshot(domain: &Domain, state: &[PhmState], title: &str, path: &Path) -> Result<()> {
    match domain {
        Domain::Grid(g) => write_grid_vtk(g, state, title, path),
        Domain::Mesh { mesh, .. } => write_mesh_vtk(mesh, state, title, path),
    }
}

/// Runs one scenario with one solver; with `out` set, writes VTK snapshots,
/// probe CSVs and a JSON report into `out.dir`.
pub fn run_case(scn: &Scenario, cfg: &SolverConfig, out: Option<&OutputConfig>) -> Result<RunResult> {
    let mut solver = build_solver(scn, cfg)?;
    let initial = solver.state();
    let volumes = scn.domain.volumes();
    let mut overshoot = scn.outputs.overshoot_component.map(|c| OvershootTracker::new(&initial, c));
    let mut phi_series = Vec::new();
    let mut prev_phi = if scn.needs_cleaning { Some(initial.clone()) } else { None };
    let mut prev_t = solver.time();
    let start = Instant::now();
    advance_to(solver.as_mut(), scn.t_end, |s: &dyn Stepper| {
        if overshoot.is_none() && prev_phi.is_none() {
            return Ok(());
        }
        let st = s.state();
        if let Some(o) = overshoot.as_mut() {
            o.observe(&st);
        }
        if let Some(prev) = prev_phi.as_mut() {
            let dt = s.time() - prev_t;
            if scn.params.chi > 0.0 && dt > 0.0 {
                let v = phi_inconsistency(prev, &st, &volumes, dt, &scn.params, CHARGE_RHO0)?;
                phi_series.push((s.time(), v));
            }
            *prev = st;
            prev_t = s.time();
        }
        Ok(())
    })?;
    let wall = start.elapsed().as_secs_f64();
    let state = solver.state();
    let tm = solver.timings();
    let mut report = RunReport {
        scenario: scn.name.clone(),
        solver: solver.name().to_string(),
        cells: solver.n_cells(),
        steps: solver.steps_taken(),
        dt: solver.nominal_dt(),
        t_end: solver.time(),
        phases: PhaseSeconds {
            collision: tm.collision.as_secs_f64(),
            transport: tm.transport.as_secs_f64(),
            map: tm.micro_macro.as_secs_f64(),
            source: tm.source.as_secs_f64(),
        },
        wall_seconds: wall,
        throughput: if wall > 0.0 {
            (solver.n_cells() * solver.steps_taken()) as f64 / wall
        } else {
            0.0
        },
        ..Default::default()
    };
    if let Some(exact) = scn.exact_state(solver.time()) {
        let comp = out.map_or(EZ, |o| o.component);
        let a: Vec<f64> = state.iter().map(|u| u[comp]).collect();
        let b: Vec<f64> = exact.iter().map(|u| u[comp]).collect();
        for (k, name) in [(NormKind::L1, "error_l1"), (NormKind::L2, "error_l2"), (NormKind::Linf, "error_linf")] {
            report.scalars.insert(name.into(), error_norm(&a, &b, &volumes, k)?);
        }
    }
    if let Some(o) = &overshoot {
        report.scalars.insert("overshoot".into(), o.value());
    }
    if !phi_series.is_empty() {
        report.series.insert("phi_inconsistency".into(), phi_series);
    }
    if let (Some(inc), Domain::Mesh { .. }) = (&scn.boundary, &scn.domain) {
        let centers = scn.domain.centers();
        let incident: Vec<PhmState> = centers.iter().map(|&x| inc(x, solver.time())).collect();
        let (f, b) = hemisphere_energy(&centers, &volumes, &state, &incident);
        report.scalars.insert("scattered_energy_forward".into(), f);
        report.scalars.insert("scattered_energy_backward".into(), b);
    }
    let probes = probe_all(scn, &state)?;
    if let (Some(c), Some((_, s))) = (scn.outputs.overshoot_component, probes.first()) {
        report.scalars.insert("probe_total_variation".into(), total_variation(&s.component(c)));
    }
    if let Some(o) = out {
        std::fs::create_dir_all(&o.dir)?;
        let stem = format!("{}_{}", scn.name, report.solver);
        if o.vtk {
            for (tag, st) in [("initial", &initial), ("final", &state)] {
                let p = o.dir.join(format!("{stem}_{tag}.vtk"));
                write_snapshot(&scn.domain, st, &format!("{stem} {tag}"), &p)?;
                report.outputs.push(p);
            }
        }
        if o.probes {
            for (name, s) in &probes {
                let p = o.dir.join(format!("{stem}_{name}.csv"));
                samples_table(s).write_csv(&p)?;
                report.outputs.push(p);
            }
            if let Some(series) = report.series.get("phi_inconsistency") {
                let mut t = Table::new(["t", "phi_inconsistency"]);
                for &(a, b) in series {
                    t.rows.push(vec![a.into(), b.into()]);
                }
                let p = o.dir.join(format!("{stem}_phi.csv"));
                t.write_csv(&p)?;
                report.outputs.push(p);
            }
        }
        let p = o.dir.join(format!("{stem}_report.json"));
        report.outputs.push(p.clone());
        let json = serde_json::to_string_pretty(&report).map_err(|e| invalid(e.to_string()))?;
        std::fs::write(&p, json)?;
    }
    Ok(RunResult {
        report,
        initial,
        state,
        probes,
    })
}

/// Result of a resolution sweep.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub series: ConvergenceSeries,
    pub slope: Option<f64>,
    pub runs: Vec<RunReport>,
    pub outputs: Vec<PathBuf>,
}

/// Runs the configured case at each resolution and fits the error slope.
pub fn run_convergence(cfg: &RunConfig, write: bool) -> Result<ConvergenceReport> {
    let mut points = Vec::new();
    let mut runs = Vec::new();
    let comp = cfg.output.component;
    for &n in &cfg.convergence.resolutions {
        let scn = cfg.scenario_with(n, None)?;
        let r = run_case(&scn, &cfg.solver, None)?;
        let exact = scn
            .exact_state(r.report.t_end)
            .ok_or_else(|| invalid(format!("case '{}' has no exact solution to measure errors", scn.name)))?;
        let a: Vec<f64> = r.state.iter().map(|u| u[comp]).collect();
        let b: Vec<f64> = exact.iter().map(|u| u[comp]).collect();
        points.push((n, error_norm(&a, &b, &scn.domain.volumes(), cfg.convergence.norm)?));
        runs.push(r.report);
    }
    let series = ConvergenceSeries {
        norm: cfg.convergence.norm,
        points,
    };
    let slope = convergence_order(&series).ok();
    let mut outputs = Vec::new();
    if write {
        std::fs::create_dir_all(&cfg.output.dir)?;
        let mut t = Table::new(["n", "error"]);
        for &(n, e) in &series.points {
            t.rows.push(vec![n.into(), e.into()]);
        }
        let name = runs.first().map_or("case".to_string(), |r| r.scenario.clone());
        let p = cfg.output.dir.join(format!("convergence_{}_{}.csv", name, cfg.solver.kind.name()));
        t.write_csv(&p)?;
        outputs.push(p);
    }
    Ok(ConvergenceReport {
        series,
        slope,
        runs,
        outputs,
    })
}

/// Result of running several solvers on one case.
pub struct CompareReport {
    pub runs: Vec<RunResult>,
    /// Human-readable runtime table.
    pub runtime_table: String,
    pub outputs: Vec<PathBuf>,
}

/// Runs each solver on the same scenario and pairs their probes.
pub fn run_compare(cfg: &RunConfig, solvers: &[SolverKind], write: bool) -> Result<CompareReport> {
    if solvers.len() < 2 {
        return Err(invalid("compare needs at least two solvers"));
    }
    let mut scn_mesh = None;
    let mut runs = Vec::new();
    for &k in solvers {
        let scn = cfg.scenario_with(cfg.case.n, scn_mesh.clone())?;
        if let Domain::Mesh { mesh, .. } = &scn.domain {
            scn_mesh = Some(mesh.clone());
        }
        runs.push(run_case(&scn, &cfg.solver_for(k), None)?);
    }
    let mut outputs = Vec::new();
    let names: Vec<String> = runs.iter().map(|r| r.report.solver.clone()).collect();
    if write {
        std::fs::create_dir_all(&cfg.output.dir)?;
        for (pi, (probe, first)) in runs[0].probes.iter().enumerate() {
            let mut cols = vec!["s".to_string(), "x".into(), "y".into(), "z".into()];
            for n in &names {
                cols.extend(COMPONENT_NAMES.iter().map(|c| format!("{n}_{c}")));
            }
            let mut t = Table::new(cols);
            for i in 0..first.values.len() {
                let mut row: Vec<Value> = vec![first.param[i].into()];
                row.extend(first.points[i].iter().map(|&v| Value::from(v)));
                for r in &runs {
                    let s = &r.probes[pi].1;
                    if s.values.len() != first.values.len() {
                        return Err(Error::InvalidInput("probe sizes differ between solvers".into()));
                    }
                    row.extend(s.values[i].0.iter().map(|&v| Value::from(v)));
                }
                t.rows.push(row);
            }
            let p = cfg.output.dir.join(format!("compare_{}_{probe}.csv", runs[0].report.scenario));
            t.write_csv(&p)?;
            outputs.push(p);
        }
    }
    let mut table = format!(
        "{:<10} {:>10} {:>8} {:>12} {:>14} {:>12}\n",
        "solver", "cells", "steps", "wall [s]", "cells*steps/s", "overshoot"
    );
    for r in &runs {
        let o = r
            .report
            .scalars
            .get("overshoot")
            .map_or("-".to_string(), |v| format!("{v:.4e}"));
        table.push_str(&format!(
            "{:<10} {:>10} {:>8} {:>12.3} {:>14.3e} {:>12}\n",
            r.report.solver, r.report.cells, r.report.steps, r.report.wall_seconds, r.report.throughput, o
        ));
    }
    if write {
        let p = cfg.output.dir.join(format!("compare_{}_runtime.txt", runs[0].report.scenario));
        std::fs::write(&p, &table)?;
        outputs.push(p);
    }
    Ok(CompareReport {
        runs,
        runtime_table: table,
        outputs,
    })
}

/// `phi` column of a state, for tests and probes.
pub fn phi_of(state: &[PhmState]) -> Vec<f64> {
    state.iter().map(|u| u[PHI]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::CaseKind;

    fn cfg(dir: &Path) -> RunConfig {
        let mut c = RunConfig::default();
        c.case.n = 16;
        c.output.dir = dir.to_path_buf();
        c
    }

    #[test]
    fn zero_time_writes_initial_only() {
        let d = tempfile::tempdir().unwrap();
        let mut c = cfg(d.path());
        c.case.t_end = Some(0.0);
        let scn = c.scenario().unwrap();
        let r = run_case(&scn, &c.solver, Some(&c.output)).unwrap();
        assert_eq!(r.report.steps, 0);
        assert_eq!(r.state, r.initial);
        assert!(r.report.outputs.iter().all(|p| p.exists()));
    }

    #[test]
    fn throughput_matches_counts() {
        let d = tempfile::tempdir().unwrap();
        let c = cfg(d.path());
        let r = run_case(&c.scenario().unwrap(), &c.solver, None).unwrap();
        let rep = &r.report;
        let expect = (rep.cells * rep.steps) as f64 / rep.wall_seconds;
        assert!((rep.throughput - expect).abs() <= 1e-9 * expect);
        assert!(rep.scalars["error_l1"] < 0.1);
    }

    #[test]
    fn compare_pairs_probes() {
        let d = tempfile::tempdir().unwrap();
        let mut c = cfg(d.path());
        c.case.name = CaseKind::RectPulse;
        c.case.n = 50;
        let r = run_compare(&c, &[SolverKind::BeamEt, SolverKind::Fdtd], true).unwrap();
        assert_eq!(r.runs.len(), 2);
        assert!(r.runtime_table.contains("fdtd"));
        let t = Table::read_csv(&r.outputs[0]).unwrap();
        assert_eq!(t.columns.len(), 4 + 16);
        assert_eq!(t.len(), 100);
    }

    #[test]
    fn convergence_sweep_writes_series() {
        let d = tempfile::tempdir().unwrap();
        let mut c = cfg(d.path());
        c.convergence.resolutions = vec![16, 32, 64];
        let r = run_convergence(&c, true).unwrap();
        assert!((r.slope.unwrap() - 2.0).abs() < 0.3, "{:?}", r.slope);
        assert!(r.outputs[0].exists());
    }
}
