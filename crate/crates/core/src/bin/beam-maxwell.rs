use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use beam_maxwell::cases::SolverKind;
use beam_maxwell::io::RunConfig;
use beam_maxwell::kinetic::RelaxationPolicy;
use beam_maxwell::runner::{run_case, run_compare, run_convergence, with_threads};
use beam_maxwell::unstructured::meshgen::{box_mesh_3d, rect_mesh_2d, sphere_in_box, SphereMeshSpec};
use beam_maxwell::unstructured::{read_msh, write_msh, UnstructuredMesh};
use beam_maxwell::Error;

const EXIT_UNSTABLE: u8 = 3;

#[derive(Parser)]
#[command(name = "beam-maxwell", version, about = "Kinetic beam and reference solvers for the PHM system")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario.
    Run(Common),
    /// Sweep resolutions and fit the error slope.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Comma-separated resolutions.
        #[arg(long, value_delimiter = ',')]
        resolutions: Option<Vec<usize>>,
    },
    /// Run several solvers on one scenario.
    Compare {
        /// Comma-separated solver names.
        #[arg(value_delimiter = ',')]
        solvers: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Validate a mesh and print counts and quality.
    MeshInfo {
        mesh: PathBuf,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Write one of the bundled generated meshes.
    MeshGen {
        #[command(subcommand)]
        kind: MeshKind,
    },
}

#[derive(Subcommand)]
enum MeshKind {
    /// Cube-sphere hexahedral mesh of a sphere in a box.
    Sphere {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SphereMeshSpec::default().n_angular)]
        n_angular: usize,
        #[arg(long, default_value_t = SphereMeshSpec::default().n_radial)]
        n_radial: usize,
        #[arg(long, default_value_t = SphereMeshSpec::default().first_layer)]
        first_layer: f64,
    },
    /// Box of hexahedra or tetrahedra (3D) or quads or triangles (2D).
    Box {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// Split into simplices.
        #[arg(long)]
        simplices: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Case name when no config is given.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Fixed relaxation factor.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Refuse CFL numbers above the stability limit.
    #[arg(long)]
    strict_cfl: bool,
}

impl Common {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(name) = &self.case {
            c.case.name = toml::Value::String(name.replace('-', "_"))
                .try_into()
                .map_err(|_| Error::Config(format!("unknown case '{name}'")))?;
        }
        if let Some(d) = self.dim {
            c.case.dim = d;
        }
        if let Some(s) = &self.solver {
            c.solver.kind = s.parse()?;
        }
        if let Some(n) = self.n {
            c.case.n = n;
        }
        if let Some(w) = self.omega {
            c.solver.policy = RelaxationPolicy::FixedOmega { omega: w };
        }
        if let Some(l) = self.lambda {
            c.solver.lambda = Some(l);
        }
        if let Some(x) = self.chi {
            c.physics.chi = x;
        }
        if let Some(g) = self.gamma {
            c.physics.gamma = g;
        }
        if let Some(v) = self.cfl {
            c.solver.cfl = Some(v);
        }
        if let Some(t) = self.t_end {
            c.case.t_end = Some(t);
        }
        if let Some(d) = &self.out_dir {
            c.output.dir = d.clone();
        }
        if self.strict_cfl {
            c.solver.strict_cfl = true;
        }
        Ok(c)
    }
}

fn execute(cmd: Cmd) -> Result<(), Error> {
    match cmd {
        Cmd::Run(common) => {
            let cfg = common.config()?;
            with_threads(common.threads, || -> Result<(), Error> {
                let scn = cfg.scenario()?;
                let r = run_case(&scn, &cfg.solver, Some(&cfg.output))?;
                let rep = &r.report;
                println!(
                    "{} / {}: {} cells, {} steps to t = {}, {:.3} s ({:.3e} cells*steps/s)",
                    rep.scenario, rep.solver, rep.cells, rep.steps, rep.t_end, rep.wall_seconds, rep.throughput
                );
                for (k, v) in &rep.scalars {
                    println!("  {k} = {v:e}");
                }
                for p in &rep.outputs {
                    println!("  wrote {}", p.display());
                }
                Ok(())
            })?
        }
        Cmd::Convergence { common, resolutions } => {
            let mut cfg = common.config()?;
            if let Some(r) = resolutions {
                cfg.convergence.resolutions = r;
            }
            with_threads(common.threads, || -> Result<(), Error> {
                let r = run_convergence(&cfg, true)?;
                println!("{:>8} {:>14}", "N", "error");
                for (n, e) in &r.series.points {
                    println!("{n:>8} {e:>14.6e}");
                }
                match r.slope {
                    Some(s) => println!("slope = {s:.4}"),
                    None => println!("slope = n/a (need three or more resolutions)"),
                }
                for p in &r.outputs {
                    println!("wrote {}", p.display());
                }
                Ok(())
            })?
        }
        Cmd::Compare { solvers, common } => {
            let cfg = common.config()?;
            let kinds = if solvers.is_empty() {
                cfg.compare.solvers.clone()
            } else {
                solvers.iter().map(|s| s.parse()).collect::<Result<Vec<SolverKind>, _>>()?
            };
            with_threads(common.threads, || -> Result<(), Error> {
                let r = run_compare(&cfg, &kinds, true)?;
                print!("{}", r.runtime_table);
                for p in &r.outputs {
                    println!("wrote {}", p.display());
                }
                Ok(())
            })?
        }
        Cmd::MeshInfo { mesh, json } => {
            let data = read_msh(&mesh)?;
            let m = UnstructuredMesh::from_data(&data)?;
            let s = m.summary();
            if json {
                println!("{}", serde_json::to_string_pretty(&s).map_err(|e| Error::Config(e.to_string()))?);
            } else {
                println!("dimension      {}", s.dim);
                println!("nodes          {}", s.nodes);
                println!("cells          {}", s.cells);
                for (k, n) in &s.cell_kinds {
                    println!("  {k:<12} {n}");
                }
                println!("interior faces {}", s.interior_faces);
                println!("boundary faces {}", s.boundary_faces);
                for (p, n) in &s.patches {
                    println!("  patch {p:<8} {n} faces");
                }
                println!("total volume   {:e}", s.total_volume);
                println!("volume range   {:e} .. {:e}", s.min_volume, s.max_volume);
                println!("closure error  {:e}", s.max_closure_error);
            }
            Ok(())
        }
        Cmd::MeshGen { kind } => {
            let (data, out) = match kind {
                MeshKind::Sphere {
                    out,
                    n_angular,
                    n_radial,
                    first_layer,
                } => {
                    let spec = SphereMeshSpec {
                        n_angular,
                        n_radial,
                        first_layer,
                        ..Default::default()
                    };
                    (sphere_in_box(&spec)?, out)
                }
                MeshKind::Box { out, n, dim, simplices } => {
                    let data = match dim {
                        2 => rect_mesh_2d([n; 2], [0.0; 2], [1.0; 2], simplices)?,
                        3 => box_mesh_3d([n; 3], [0.0; 3], [1.0; 3], simplices)?,
                        _ => return Err(Error::Config("mesh-gen box needs --dim 2 or 3".into())),
                    };
                    (data, out)
                }
            };
            let cells = UnstructuredMesh::from_data(&data)?.n_cells();
            write_msh(&data, &out)?;
            println!("wrote {} ({} cells)", out.display(), cells);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Unstable { .. }) {
                ExitCode::from(EXIT_UNSTABLE)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
