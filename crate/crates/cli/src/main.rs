//! Batch front-end for the fluid / rigid-body solver.
//!
//! Verbs: `run` a scenario file, `verify` two run directories against
//! each other, `derive` time-derivative artifacts from a finished run,
//! `mesh-info` for geometry inspection/export, and `diag` to recompute
//! diagnostics on stored states.
//!
//! Exit codes: 0 on success with all configured contracts passing,
//! 1 when a run finishes but a contract or comparison fails, 2 for
//! invalid configuration or malformed input, 3 when the gap monitor
//! aborts, 4 on solver failure.

use clap::{Args, Parser, Subcommand};
use fsi_core::io::{
    derive_run, emit_diagnostics, load_run, read_mesh, run_scenario, verify_runs, write_mesh,
    Scenario,
};
use fsi_core::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fsi", about = "Fluid / rigid-body interaction batch solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Scenario overrides shared by `run`; flags mirror the scenario fields.
#[derive(Args, Debug)]
struct Overrides {
    /// Replace the initial-data preset.
    #[arg(long)]
    preset: Option<String>,
    /// Mesh refinement level.
    #[arg(long)]
    level: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    gap_delta: Option<f64>,
    #[arg(long)]
    exponent_s: Option<f64>,
    #[arg(long)]
    exponent_r: Option<f64>,
    /// Snapshot stride for states and field files.
    #[arg(long)]
    stride: Option<usize>,
    /// Disable VTK field snapshots.
    #[arg(long)]
    no_fields: bool,
}

impl Overrides {
    fn apply(&self, sc: &mut Scenario) {
        if let Some(p) = &self.preset {
            sc.initial = fsi_core::io::InitialData::Preset(p.clone());
        }
        if let Some(l) = self.level {
            sc.geometry.level = l;
        }
        if let Some(v) = self.dt {
            sc.solver.dt = v;
        }
        if let Some(v) = self.t_end {
            sc.solver.t_end = v;
        }
        if let Some(v) = self.theta {
            sc.solver.theta = v;
        }
        if let Some(v) = self.gap_delta {
            sc.solver.gap_delta = v;
        }
        if let Some(v) = self.exponent_s {
            sc.solver.exponent_s = v;
        }
        if let Some(v) = self.exponent_r {
            sc.solver.exponent_r = v;
        }
        if let Some(v) = self.stride {
            sc.output.stride = v;
        }
        if self.no_fields {
            sc.output.fields = false;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario file and emit run artifacts.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Output directory (default: <output root>/<scenario stem>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare a candidate run directory against a baseline.
    Verify {
        baseline: PathBuf,
        candidate: PathBuf,
        /// Absolute tolerance on every compared entry.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Emit time-derivative artifacts for a finished run.
    Derive {
        run_dir: PathBuf,
        /// Derivative order.
        #[arg(long, default_value_t = 1)]
        l: usize,
    },
    /// Print mesh statistics for a geometry, optionally exporting it.
    MeshInfo {
        #[arg(long, default_value_t = 1)]
        level: usize,
        #[arg(long, default_value_t = 0.5)]
        r_in: f64,
        #[arg(long, default_value_t = 2.0)]
        r_out: f64,
        /// Write the mesh in the ASCII exchange format.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Read a mesh back instead of generating one.
        #[arg(long)]
        import: Option<PathBuf>,
    },
    /// Recompute diagnostics and contracts from stored run states.
    Diag { run_dir: PathBuf },
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::Format(_) => 2,
        Error::GapViolation(_) => 3,
        _ => 4,
    }
}

fn output_root() -> PathBuf {
    std::env::var_os("FSI_OUTPUT_ROOT").map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

fn cmd_run(scenario_path: &Path, out: Option<PathBuf>, overrides: &Overrides) -> Result<bool, Error> {
    let mut scenario = Scenario::load(scenario_path)?;
    overrides.apply(&mut scenario);
    let dir = out.unwrap_or_else(|| {
        let stem = scenario_path
            .file_stem()
            .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
        output_root().join(stem)
    });
    let outcome = run_scenario(&scenario, &dir)?;
    println!("run finished: dir={} dt={}", outcome.dir.display(), outcome.dt_effective);
    for c in &outcome.summary.checks {
        println!(
            "contract {}: value={:.6e} threshold={:.6e} {}",
            c.name,
            c.value,
            c.threshold,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(outcome.summary.pass)
}

fn cmd_verify(baseline: &Path, candidate: &Path, tol: f64) -> Result<bool, Error> {
    let report = verify_runs(baseline, candidate, tol)?;
    for f in &report.files {
        println!(
            "{}: max diff {:.6e} {}",
            f.name,
            f.max_abs_diff,
            if f.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(report.pass)
}

fn cmd_mesh_info(
    level: usize,
    r_in: f64,
    r_out: f64,
    export: Option<PathBuf>,
    import: Option<PathBuf>,
) -> Result<bool, Error> {
    let mesh = match import {
        Some(path) => read_mesh(&path)?,
        None => fsi_core::mesh::build_shell_mesh(level, r_in, r_out, nalgebra::Vector3::zeros())?,
    };
    println!(
        "level={} r_in={} r_out={} vertices={} tets={} inner_faces={} outer_faces={}",
        mesh.level,
        mesh.r_in,
        mesh.r_out,
        mesh.vertices.len(),
        mesh.tets.len(),
        mesh.inner_faces.len(),
        mesh.outer_faces.len()
    );
    println!("volume={:.9e} max_edge={:.9e}", mesh.volume(), mesh.max_edge_length());
    if let Some(path) = export {
        write_mesh(&path, &mesh)?;
        println!("exported to {}", path.display());
    }
    Ok(true)
}

fn cmd_diag(run_dir: &Path) -> Result<bool, Error> {
    let (solver, result, manifest) = load_run(run_dir)?;
    let summary = emit_diagnostics(&solver, &result, &manifest.scenario, run_dir)?;
    for c in &summary.checks {
        println!(
            "contract {}: value={:.6e} threshold={:.6e} {}",
            c.name,
            c.value,
            c.threshold,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(summary.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { scenario, out, overrides } => cmd_run(&scenario, out, &overrides),
        Command::Verify { baseline, candidate, tol } => cmd_verify(&baseline, &candidate, tol),
        Command::Derive { run_dir, l } => derive_run(&run_dir, l).map(|()| {
            println!("derivative artifacts written to {}", run_dir.display());
            true
        }),
        Command::MeshInfo { level, r_in, r_out, export, import } => {
            cmd_mesh_info(level, r_in, r_out, export, import)
        }
        Command::Diag { run_dir } => cmd_diag(&run_dir),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
