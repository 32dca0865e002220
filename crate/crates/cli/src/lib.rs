//! Command-line driver: `ossify run|picard|mesh|validate <config>`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;
use ossify::coupling::{contraction_factor, picard_iterate, run_simulation};
use ossify::fields::{ParameterSet, ScaffoldDensity};
use ossify::io::{axial_planes, export_mesh_vtk, export_slices, export_timeseries, export_vtk, slice_average};
use ossify::mesh::Mesh;
use ossify::scenario::{dump_config, load_config, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Months at which axial slice profiles are written, when inside the run.
const SLICE_MONTHS: [f64; 2] = [3.0, 12.0];

#[derive(Debug, Parser)]
#[command(name = "ossify", version, about = "Bone regeneration in a degrading scaffold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the coupled simulation and write VTK snapshots and CSV summaries.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fixed-point iteration of the coupled problem over a short window.
    Picard {
        config: PathBuf,
        /// Window length in months.
        #[arg(long)]
        window: f64,
        #[arg(long, default_value_t = 20)]
        max_iter: usize,
    },
    /// Build the mesh and print its statistics.
    Mesh {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
}

enum Failure {
    Invalid(String),
    Solver(String),
}

impl Failure {
    fn solver(e: impl std::fmt::Display) -> Self {
        Failure::Solver(e.to_string())
    }
}

pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    if let Some(threads) = std::env::var("OSSIFY_THREADS").ok().and_then(|v| v.parse().ok()) {
        // fails harmlessly if the pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = match cli.command {
        Command::Run { config, out } => run(&config, &out),
        Command::Picard {
            config,
            window,
            max_iter,
        } => picard(&config, window, max_iter),
        Command::Mesh { config, out } => mesh(&config, out.as_deref()),
        Command::Validate { config } => load(&config).map(|(s, _)| {
            println!("{}: ok ({})", config.display(), s.name);
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INVALID
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            EXIT_SOLVER
        }
    }
}

fn load(path: &Path) -> Result<(Scenario, ParameterSet), Failure> {
    load_config(path).map_err(|e| Failure::Invalid(e.to_string()))
}

fn build_mesh(scenario: &Scenario) -> Result<Mesh, Failure> {
    let mesh = scenario.mesh.build().map_err(Failure::solver)?;
    info!("mesh: {} nodes, {} tets", mesh.node_count(), mesh.tet_count());
    Ok(mesh)
}

fn run(config: &Path, out: &Path) -> Result<(), Failure> {
    let (scenario, params) = load(config)?;
    let mesh = build_mesh(&scenario)?;
    fs::create_dir_all(out).map_err(|e| Failure::Solver(format!("{}: {e}", out.display())))?;
    fs::write(out.join("config.toml"), dump_config(&scenario, &params))
        .map_err(|e| Failure::Solver(format!("{}: {e}", out.display())))?;

    let trajectory = run_simulation(&mesh, &params, &scenario).map_err(Failure::solver)?;
    let last = trajectory.states.len() - 1;
    for (i, state) in trajectory.states.iter().enumerate() {
        if i % scenario.output_every == 0 || i == last {
            export_vtk(state, &mesh, out.join(format!("state_{i:04}.vtk"))).map_err(Failure::solver)?;
        }
    }
    export_timeseries(&trajectory, &mesh, out.join("timeseries.csv")).map_err(Failure::solver)?;

    let rho = ScaffoldDensity::uniform(mesh.node_count(), &params).map_err(Failure::solver)?;
    let planes = axial_planes(&mesh);
    for month in SLICE_MONTHS {
        if month > params.t_end + 1e-9 {
            continue;
        }
        let profile = slice_average(trajectory.at_time(month), &mesh, &rho, planes).map_err(Failure::solver)?;
        export_slices(&profile, out.join(format!("slices_month_{month}.csv"))).map_err(Failure::solver)?;
    }
    println!("wrote {} states to {}", trajectory.states.len(), out.display());
    Ok(())
}

fn picard(config: &Path, window: f64, max_iter: usize) -> Result<(), Failure> {
    let (scenario, params) = load(config)?;
    let mesh = build_mesh(&scenario)?;
    let (_, report) = picard_iterate(&mesh, &params, &scenario, window, max_iter).map_err(Failure::solver)?;
    println!("iteration,distance");
    for (k, d) in report.iterates.iter().enumerate() {
        println!("{},{d:.6e}", k + 1);
    }
    match contraction_factor(&report) {
        Ok(q) => println!("contraction factor {q:.4}"),
        Err(e) => println!("contraction factor unavailable: {e}"),
    }
    if report.converged {
        Ok(())
    } else {
        Err(Failure::Solver(format!(
            "no convergence to {:e} in {} iterations",
            params.picard_tol,
            report.iterates.len()
        )))
    }
}

fn mesh(config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let (scenario, _) = load(config)?;
    let mesh = build_mesh(&scenario)?;
    println!(
        "{} nodes, {} tets, {} boundary faces, {} axial planes",
        mesh.node_count(),
        mesh.tet_count(),
        mesh.boundary.len(),
        axial_planes(&mesh)
    );
    if let Some(path) = out {
        export_mesh_vtk(&mesh, path).map_err(Failure::solver)?;
    }
    Ok(())
}
