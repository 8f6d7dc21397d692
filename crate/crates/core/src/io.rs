//! Scenario files, run orchestration, and the on-disk artifact formats.
//!
//! A run owns one output directory. It receives a JSON scenario
//! (geometry, initial data, solver parameters, diagnostics selection),
//! executes the solve, and emits: a JSON manifest (config echo,
//! iteration counts, contraction factors, wall-clock times), a rigid
//! trajectory CSV, full state snapshots in a little-endian binary
//! container, legacy-VTK ASCII field snapshots, one CSV per requested
//! diagnostic family, and a pass/fail summary JSON. Every format
//! carries a schema tag in its header.

use crate::diagnostics::{
    boundary_trace_residual, energy_report, hypothesis_monitor, momentum_residual,
    prodi_serrin_norm, uniqueness_gap,
};
use crate::mesh::{build_shell_mesh, ShellMesh};
use crate::rigid_motion::{RigidState, RigidTrajectory};
use crate::solver::{solve_time_derivative, FsiSolver, SolveResult, SolverConfig};
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Read as _, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCENARIO_SCHEMA: &str = "fsi-scenario-v1";
pub const MANIFEST_SCHEMA: &str = "fsi-manifest-v1";
pub const SUMMARY_SCHEMA: &str = "fsi-summary-v1";
pub const TRAJECTORY_SCHEMA: &str = "fsi-trajectory-v1";
pub const STATES_SCHEMA: &str = "fsi-states-v1";
pub const MESH_SCHEMA: &str = "fsi-mesh-v1";
pub const FIELDS_SCHEMA: &str = "fsi-fields-v1";
pub const DIAGNOSTICS_SCHEMA: &str = "fsi-diagnostics-v1";

/// Diagnostic families a scenario may request.
pub const DIAGNOSTIC_FAMILIES: &[&str] =
    &["energy", "momentum", "hypothesis", "prodi_serrin", "traces", "uniqueness"];

/// Shell geometry and mesh resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub r_in: f64,
    pub r_out: f64,
    /// Initial body center; the shell is meshed concentrically around it.
    pub q0: [f64; 3],
    pub level: usize,
}

impl Geometry {
    pub fn q0_vec(&self) -> Vector3<f64> {
        Vector3::new(self.q0[0], self.q0[1], self.q0[2])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_in > 0.0 && self.r_out > self.r_in) {
            return Err(Error::invalid("geometry requires 0 < r_in < r_out"));
        }
        if self.level > 5 {
            return Err(Error::invalid("mesh level capped at 5"));
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<ShellMesh> {
        build_shell_mesh(self.level, self.r_in, self.r_out, self.q0_vec())
    }
}

/// How the initial velocity state is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    /// Named scripted scenario: "rest", "spin-down", or "wall-approach".
    Preset(String),
    /// Path to a JSON coefficient file holding a full state vector.
    CoefficientFile(String),
}

impl InitialData {
    fn validate(&self) -> Result<()> {
        match self {
            InitialData::Preset(name) => match name.as_str() {
                "rest" | "spin-down" | "wall-approach" => Ok(()),
                other => Err(Error::invalid(format!("unknown preset '{other}'"))),
            },
            InitialData::CoefficientFile(path) => {
                if path.is_empty() {
                    Err(Error::invalid("coefficient file path is empty"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Output stride and field emission switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    /// Every `stride`-th step is written to the state container and the
    /// VTK snapshot series. Stride 1 keeps everything, which the
    /// derivative post-processing requires.
    pub stride: usize,
    /// Emit legacy-VTK ASCII field snapshots.
    pub fields: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { stride: 1, fields: true }
    }
}

/// Thresholds for the pass/fail checks in the summary report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Contracts {
    /// Energy slack may go negative only by this fraction of E(0).
    pub energy_slack_rel: f64,
    /// Bound on the mapped-back boundary trace residuals.
    pub trace_tol: f64,
    /// Optional bound on the semi-discrete momentum residual.
    pub momentum_max: Option<f64>,
    /// Bound on the nonlinear-vs-relinearized solution gap.
    pub uniqueness_max: f64,
}

impl Default for Contracts {
    fn default() -> Self {
        Contracts {
            energy_slack_rel: 1e-8,
            trace_tol: 1e-8,
            momentum_max: None,
            uniqueness_max: 1e-8,
        }
    }
}

/// A complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: String,
    pub geometry: Geometry,
    pub initial: InitialData,
    pub solver: SolverConfig,
    #[serde(default = "default_diagnostics")]
    pub diagnostics: Vec<String>,
    #[serde(default)]
    pub contracts: Contracts,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_diagnostics() -> Vec<String> {
    vec!["energy".into(), "hypothesis".into(), "traces".into()]
}

impl Scenario {
    /// A ready-to-run configuration for one of the named presets.
    pub fn preset(name: &str, level: usize) -> Scenario {
        Scenario {
            schema: SCENARIO_SCHEMA.to_string(),
            geometry: Geometry { r_in: 0.5, r_out: 2.0, q0: [0.0; 3], level },
            initial: InitialData::Preset(name.to_string()),
            solver: SolverConfig::default(),
            diagnostics: default_diagnostics(),
            contracts: Contracts::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(Error::invalid(format!(
                "unsupported scenario schema '{}', expected '{SCENARIO_SCHEMA}'",
                self.schema
            )));
        }
        self.geometry.validate()?;
        self.initial.validate()?;
        self.solver.validate()?;
        if self.output.stride == 0 {
            return Err(Error::invalid("output stride must be at least 1"));
        }
        for fam in &self.diagnostics {
            if !DIAGNOSTIC_FAMILIES.contains(&fam.as_str()) {
                return Err(Error::invalid(format!("unknown diagnostic family '{fam}'")));
            }
        }
        if !(self.contracts.energy_slack_rel > 0.0
            && self.contracts.trace_tol > 0.0
            && self.contracts.uniqueness_max > 0.0)
        {
            return Err(Error::invalid("contract thresholds must be positive"));
        }
        if let Some(m) = self.contracts.momentum_max {
            if !(m > 0.0) {
                return Err(Error::invalid("momentum_max must be positive"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let sc: Scenario =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("scenario: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read scenario {}: {e}", path.display())))?;
        Scenario::from_json(&text)
    }
}

/// One fixed-point window as recorded in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowLog {
    pub window_start: f64,
    pub window_steps: usize,
    pub iterations: usize,
    pub bisections: usize,
    pub picard_iters: usize,
    pub final_residual: f64,
    pub mu_hats: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WallClock {
    pub total_s: f64,
    pub solve_s: f64,
    pub diagnostics_s: f64,
}

/// Config echo plus iteration/μ̂/wall-clock records for a finished run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub scenario: Scenario,
    /// Step size actually used (may be smaller than configured after
    /// step-halving retries).
    pub dt_effective: f64,
    pub n_steps: usize,
    pub windows: Vec<WindowLog>,
    pub wall_clock: WallClock,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path)?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::Format(format!("unsupported manifest schema '{}'", m.schema)));
        }
        Ok(m)
    }
}

/// One evaluated contract in the summary report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryReport {
    pub schema: String,
    pub checks: Vec<ContractCheck>,
    pub pass: bool,
}

/// Everything a caller needs after a completed run.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub dt_effective: f64,
    pub summary: SummaryReport,
}

// ---------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------

/// Writes the rigid trajectory as CSV: t, q(3), flattened Q(9), a(3), ω(3).
pub fn write_trajectory(path: &Path, rigid: &RigidTrajectory) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# {TRAJECTORY_SCHEMA}")?;
    writeln!(
        w,
        "t,qx,qy,qz,Q00,Q01,Q02,Q10,Q11,Q12,Q20,Q21,Q22,ax,ay,az,wx,wy,wz"
    )?;
    for s in &rigid.states {
        let mut row = vec![s.t, s.q.x, s.q.y, s.q.z];
        for i in 0..3 {
            for j in 0..3 {
                row.push(s.rot[(i, j)]);
            }
        }
        row.extend([s.a.x, s.a.y, s.a.z, s.omega.x, s.omega.y, s.omega.z]);
        let text: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", text.join(","))?;
    }
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<RigidTrajectory> {
    let rows = read_csv_rows(path, TRAJECTORY_SCHEMA)?;
    let mut states = Vec::with_capacity(rows.len());
    for row in &rows {
        if row.len() != 19 {
            return Err(Error::Format("trajectory row must have 19 columns".into()));
        }
        let mut rot = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                rot[(i, j)] = row[4 + 3 * i + j];
            }
        }
        states.push(RigidState {
            t: row[0],
            q: Vector3::new(row[1], row[2], row[3]),
            rot,
            a: Vector3::new(row[13], row[14], row[15]),
            omega: Vector3::new(row[16], row[17], row[18]),
        });
    }
    if states.is_empty() {
        return Err(Error::Format("trajectory has no samples".into()));
    }
    let dt = if states.len() > 1 { states[1].t - states[0].t } else { 1.0 };
    Ok(RigidTrajectory { states, dt })
}

// ---------------------------------------------------------------------
// Binary state container
// ---------------------------------------------------------------------

/// Writes state snapshots: an ASCII header line with the schema tag and
/// dimensions, then the sample times and the state rows as raw
/// little-endian f64.
pub fn write_states(path: &Path, times: &[f64], states: &[Vec<f64>]) -> Result<()> {
    if times.len() != states.len() {
        return Err(Error::invalid("one time per state snapshot required"));
    }
    let m = states.first().map_or(0, |s| s.len());
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{STATES_SCHEMA} {} {}", states.len(), m)?;
    for t in times {
        w.write_all(&t.to_le_bytes())?;
    }
    for z in states {
        if z.len() != m {
            return Err(Error::invalid("state snapshots differ in length"));
        }
        for v in z {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_states(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("state container has no header".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::Format("state container header is not UTF-8".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != STATES_SCHEMA {
        return Err(Error::Format(format!("unsupported state container header '{header}'")));
    }
    let n: usize = parts[1].parse().map_err(|_| Error::Format("bad state count".into()))?;
    let m: usize = parts[2].parse().map_err(|_| Error::Format("bad state length".into()))?;
    let body = &bytes[nl + 1..];
    if body.len() != 8 * n * (m + 1) {
        return Err(Error::Format("state container is truncated".into()));
    }
    let f64_at = |k: usize| f64::from_le_bytes(body[8 * k..8 * k + 8].try_into().unwrap());
    let times: Vec<f64> = (0..n).map(f64_at).collect();
    let states: Vec<Vec<f64>> =
        (0..n).map(|i| (0..m).map(|j| f64_at(n + i * m + j)).collect()).collect();
    Ok((times, states))
}

// ---------------------------------------------------------------------
// Mesh ASCII and VTK snapshots
// ---------------------------------------------------------------------

/// Writes the mesh in a plain ASCII format: header with schema tag and
/// shell parameters, then vertices, tets, and tagged boundary faces
/// (1 = body surface, 2 = outer wall).
pub fn write_mesh(path: &Path, mesh: &ShellMesh) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{MESH_SCHEMA}")?;
    writeln!(
        w,
        "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {}",
        mesh.r_in, mesh.r_out, mesh.center.x, mesh.center.y, mesh.center.z, mesh.level
    )?;
    writeln!(
        w,
        "{} {} {} {}",
        mesh.vertices.len(),
        mesh.tets.len(),
        mesh.inner_faces.len(),
        mesh.outer_faces.len()
    )?;
    for v in &mesh.vertices {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
    }
    for t in &mesh.tets {
        writeln!(w, "{} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    for f in &mesh.inner_faces {
        writeln!(w, "{} {} {} 1", f[0], f[1], f[2])?;
    }
    for f in &mesh.outer_faces {
        writeln!(w, "{} {} {} 2", f[0], f[1], f[2])?;
    }
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<ShellMesh> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let bad = |msg: &str| Error::Format(format!("mesh file: {msg}"));
    if lines.next() != Some(MESH_SCHEMA) {
        return Err(bad("missing schema tag"));
    }
    let params: Vec<f64> = lines
        .next()
        .ok_or_else(|| bad("missing parameter line"))?
        .split_whitespace()
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("bad parameter line"))?;
    if params.len() != 6 {
        return Err(bad("parameter line must have 6 entries"));
    }
    let counts: Vec<usize> = lines
        .next()
        .ok_or_else(|| bad("missing count line"))?
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("bad count line"))?;
    if counts.len() != 4 {
        return Err(bad("count line must have 4 entries"));
    }
    let mut vertices = Vec::with_capacity(counts[0]);
    for _ in 0..counts[0] {
        let v: Vec<f64> = lines
            .next()
            .ok_or_else(|| bad("truncated vertex block"))?
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad vertex"))?;
        if v.len() != 3 {
            return Err(bad("vertex needs 3 coordinates"));
        }
        vertices.push(Vector3::new(v[0], v[1], v[2]));
    }
    let mut read_indexed = |n: usize, width: usize, what: &str| -> Result<Vec<Vec<usize>>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<usize> = lines
                .next()
                .ok_or_else(|| bad(&format!("truncated {what} block")))?
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(&format!("bad {what}")))?;
            if row.len() != width {
                return Err(bad(&format!("{what} row width mismatch")));
            }
            out.push(row);
        }
        Ok(out)
    };
    let tets = read_indexed(counts[1], 4, "tet")?
        .into_iter()
        .map(|r| [r[0], r[1], r[2], r[3]])
        .collect();
    let faces_of = |rows: Vec<Vec<usize>>, tag: usize| -> Result<Vec<[usize; 3]>> {
        rows.into_iter()
            .map(|r| {
                if r[3] != tag {
                    Err(bad("boundary tag mismatch"))
                } else {
                    Ok([r[0], r[1], r[2]])
                }
            })
            .collect()
    };
    let inner_faces = faces_of(read_indexed(counts[2], 4, "inner face")?, 1)?;
    let outer_faces = faces_of(read_indexed(counts[3], 4, "outer face")?, 2)?;
    Ok(ShellMesh {
        vertices,
        tets,
        inner_faces,
        outer_faces,
        r_in: params[0],
        r_out: params[1],
        center: Vector3::new(params[2], params[3], params[4]),
        level: params[5] as usize,
    })
}

/// Writes one field snapshot as legacy-VTK ASCII (linear tetrahedra on
/// the mesh vertices; velocity vectors and pressure at the vertices).
pub fn write_vtk_snapshot(
    path: &Path,
    solver: &FsiSolver,
    z: &[f64],
    t: f64,
) -> Result<()> {
    let space = &solver.sys.space;
    let mesh = &space.mesh;
    let n_verts = mesh.vertices.len();
    let vel = space.node_velocities(z);
    let p_off = space.pressure_offset();
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{FIELDS_SCHEMA} t={t:.17e}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {n_verts} double")?;
    for v in &mesh.vertices {
        writeln!(w, "{:.9e} {:.9e} {:.9e}", v.x, v.y, v.z)?;
    }
    writeln!(w, "CELLS {} {}", mesh.tets.len(), 5 * mesh.tets.len())?;
    for t in &mesh.tets {
        writeln!(w, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.tets.len())?;
    for _ in &mesh.tets {
        writeln!(w, "10")?;
    }
    writeln!(w, "POINT_DATA {n_verts}")?;
    writeln!(w, "VECTORS velocity double")?;
    for v in vel.iter().take(n_verts) {
        writeln!(w, "{:.9e} {:.9e} {:.9e}", v.x, v.y, v.z)?;
    }
    writeln!(w, "SCALARS pressure double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for i in 0..n_verts {
        writeln!(w, "{:.9e}", z[p_off + i])?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Diagnostics CSVs
// ---------------------------------------------------------------------

fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# {DIAGNOSTICS_SCHEMA}")?;
    writeln!(w, "{header}")?;
    for row in rows {
        let text: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", text.join(","))?;
    }
    Ok(())
}

/// Reads every numeric row of a CSV artifact, skipping `#` comments and
/// the column-name header; checks the schema tag when one is present.
pub fn read_csv_rows(path: &Path, expect_schema: &str) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut saw_schema = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(tag) = line.strip_prefix('#') {
            if tag.trim() == expect_schema {
                saw_schema = true;
            }
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) => continue, // column-name header
        }
    }
    if !saw_schema {
        return Err(Error::Format(format!(
            "{} is missing the schema tag '{expect_schema}'",
            path.display()
        )));
    }
    Ok(rows)
}

/// Computes the selected diagnostic families, writes one CSV each, and
/// evaluates the configured contracts.
pub fn emit_diagnostics(
    solver: &FsiSolver,
    result: &SolveResult,
    scenario: &Scenario,
    dir: &Path,
) -> Result<SummaryReport> {
    let mut checks = Vec::new();
    for fam in &scenario.diagnostics {
        match fam.as_str() {
            "energy" => {
                let rep = energy_report(solver, result)?;
                let rows: Vec<Vec<f64>> = (0..rep.times.len())
                    .map(|k| vec![rep.times[k], rep.energy[k], rep.dissipation[k], rep.slack[k]])
                    .collect();
                write_csv(&dir.join("energy.csv"), "t,energy,dissipation,slack", &rows)?;
                let e0 = rep.energy[0];
                let slack_min = rep.slack.iter().copied().fold(f64::INFINITY, f64::min);
                let threshold = -scenario.contracts.energy_slack_rel * e0.abs();
                checks.push(ContractCheck {
                    name: "energy_slack".into(),
                    value: slack_min,
                    threshold,
                    pass: slack_min >= threshold,
                });
            }
            "momentum" => {
                let rep = momentum_residual(solver, result)?;
                let rows: Vec<Vec<f64>> = (0..rep.times.len())
                    .map(|k| vec![rep.times[k], rep.r_a[k], rep.r_omega[k]])
                    .collect();
                write_csv(&dir.join("momentum.csv"), "t,r_a,r_omega", &rows)?;
                if let Some(bound) = scenario.contracts.momentum_max {
                    let worst = rep
                        .r_a
                        .iter()
                        .chain(&rep.r_omega)
                        .copied()
                        .fold(0.0f64, f64::max);
                    checks.push(ContractCheck {
                        name: "momentum_residual".into(),
                        value: worst,
                        threshold: bound,
                        pass: worst <= bound,
                    });
                }
            }
            "hypothesis" => {
                let rep = hypothesis_monitor(solver, result)?;
                write_csv(
                    &dir.join("hypothesis.csv"),
                    "min_gap,max_accel,max_angular_accel,exponents_ok,gap_ok",
                    &[vec![
                        rep.min_gap,
                        rep.max_accel,
                        rep.max_angular_accel,
                        rep.exponents_ok as usize as f64,
                        rep.gap_ok as usize as f64,
                    ]],
                )?;
                checks.push(ContractCheck {
                    name: "hypothesis_gap".into(),
                    value: rep.min_gap,
                    threshold: solver.config.gap_delta,
                    pass: rep.gap_ok && rep.exponents_ok,
                });
            }
            "prodi_serrin" => {
                let (s, r) = (solver.config.exponent_s, solver.config.exponent_r);
                let norm = prodi_serrin_norm(solver, result, s, r, 3)?;
                write_csv(&dir.join("prodi_serrin.csv"), "s,r,norm", &[vec![s, r, norm]])?;
                checks.push(ContractCheck {
                    name: "prodi_serrin_finite".into(),
                    value: norm,
                    threshold: f64::MAX,
                    pass: norm.is_finite(),
                });
            }
            "traces" => {
                let z = result.states.last().expect("run has at least the initial state");
                let state = result.rigid.states.last().expect("rigid trajectory is nonempty");
                let rep = boundary_trace_residual(&solver.sys.space, z, state);
                write_csv(&dir.join("traces.csv"), "body,wall", &[vec![rep.body, rep.wall]])?;
                let worst = rep.body.max(rep.wall);
                checks.push(ContractCheck {
                    name: "boundary_traces".into(),
                    value: worst,
                    threshold: scenario.contracts.trace_tol,
                    pass: worst <= scenario.contracts.trace_tol,
                });
            }
            "uniqueness" => {
                let gap = uniqueness_gap(solver, result)?;
                write_csv(&dir.join("uniqueness.csv"), "gap", &[vec![gap]])?;
                checks.push(ContractCheck {
                    name: "uniqueness_gap".into(),
                    value: gap,
                    threshold: scenario.contracts.uniqueness_max,
                    pass: gap <= scenario.contracts.uniqueness_max,
                });
            }
            other => return Err(Error::invalid(format!("unknown diagnostic family '{other}'"))),
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    let summary = SummaryReport { schema: SUMMARY_SCHEMA.into(), checks, pass };
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail"),
    )?;
    Ok(summary)
}

// ---------------------------------------------------------------------
// Run orchestration
// ---------------------------------------------------------------------

fn initial_state_for(solver: &FsiSolver, scenario: &Scenario) -> Result<Vec<f64>> {
    match &scenario.initial {
        InitialData::Preset(name) => match name.as_str() {
            "rest" => solver.initial_state(Vector3::zeros(), Vector3::zeros()),
            "spin-down" => solver.initial_state(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0)),
            other => Err(Error::invalid(format!("preset '{other}' is not a solver run"))),
        },
        InitialData::CoefficientFile(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::invalid(format!("cannot read coefficient file {path}: {e}")))?;
            #[derive(Deserialize)]
            struct Coeffs {
                schema: String,
                z: Vec<f64>,
            }
            let c: Coeffs = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("coefficient file: {e}")))?;
            if c.schema != STATES_SCHEMA {
                return Err(Error::Format(format!(
                    "coefficient file schema '{}' unsupported",
                    c.schema
                )));
            }
            let n = solver.sys.space.n_total();
            if c.z.len() != n {
                return Err(Error::invalid(format!(
                    "coefficient file has {} entries, space needs {n}",
                    c.z.len()
                )));
            }
            solver.sys.project(&c.z)
        }
    }
}

/// Walks the scripted wall-approach trajectory: constant translation at
/// a speed chosen so the body-wall gap crosses the configured δ at
/// two-thirds of the time span. The gap monitor aborts with a gap
/// violation at the first step below δ; the trajectory covered up to
/// that point is still written out.
fn run_wall_approach(scenario: &Scenario, dir: &Path) -> Result<RunOutcome> {
    let geo = &scenario.geometry;
    let cfg = &scenario.solver;
    let gap0 = geo.r_out - geo.r_in;
    let delta = cfg.gap_delta;
    if gap0 <= delta {
        return Err(Error::invalid("wall-approach scenario starts inside the gap threshold"));
    }
    let speed = 1.5 * (gap0 - delta) / cfg.t_end;
    let q0 = geo.q0_vec();
    let ex = Vector3::new(1.0, 0.0, 0.0);
    let mut states = Vec::new();
    let mut violated = None;
    for k in 0..=cfg.steps() {
        let t = k as f64 * cfg.dt;
        let q = q0 + speed * t * ex;
        let gap = geo.r_out - (q - q0).norm() - geo.r_in;
        if gap < delta {
            violated = Some((t, gap));
            break;
        }
        states.push(RigidState {
            t,
            q,
            rot: Matrix3::identity(),
            a: speed * ex,
            omega: Vector3::zeros(),
        });
    }
    let rigid = RigidTrajectory { states, dt: cfg.dt };
    write_trajectory(&dir.join("trajectory.csv"), &rigid)?;
    match violated {
        Some((t, gap)) => Err(Error::GapViolation(format!(
            "body-wall gap {gap:.6} fell below delta = {delta} at t = {t}"
        ))),
        None => Err(Error::invalid(
            "wall-approach scenario ended before reaching the gap threshold",
        )),
    }
}

/// Executes a scenario into `dir`: solve, artifacts, diagnostics,
/// contracts. The directory is created; an existing directory is reused
/// (one run must own it exclusively).
pub fn run_scenario(scenario: &Scenario, dir: &Path) -> Result<RunOutcome> {
    scenario.validate()?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("scenario.json"), scenario.to_json())?;

    if scenario.initial == InitialData::Preset("wall-approach".into()) {
        return run_wall_approach(scenario, dir);
    }

    let started = Instant::now();
    let mesh = scenario.geometry.build_mesh()?;
    write_mesh(&dir.join("mesh.txt"), &mesh)?;

    // Nonlinear solve with the step-halving fallback, keeping the
    // final solver around for the diagnostics pass.
    let solve_started = Instant::now();
    let mut cfg = scenario.solver.clone();
    let mut attempt: Option<(FsiSolver, SolveResult)> = None;
    let mut last_err = None;
    for _ in 0..4 {
        let solver = FsiSolver::new(mesh.clone(), cfg.clone())?;
        let z0 = initial_state_for(&solver, scenario)?;
        match solver.solve_nonlinear(&z0) {
            Ok(r) => {
                attempt = Some((solver, r));
                break;
            }
            Err(Error::SolverFailure(msg)) => {
                last_err = Some(Error::SolverFailure(msg));
                cfg.dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    let (solver, result) = match attempt {
        Some(pair) => pair,
        None => return Err(last_err.unwrap_or_else(|| Error::SolverFailure("run failed".into()))),
    };
    let solve_s = solve_started.elapsed().as_secs_f64();

    write_trajectory(&dir.join("trajectory.csv"), &result.rigid)?;
    let stride = scenario.output.stride;
    let kept: Vec<usize> = (0..result.states.len()).step_by(stride).collect();
    let times: Vec<f64> = kept.iter().map(|&k| result.times[k]).collect();
    let snaps: Vec<Vec<f64>> = kept.iter().map(|&k| result.states[k].clone()).collect();
    write_states(&dir.join("states.bin"), &times, &snaps)?;
    if scenario.output.fields {
        for (i, &k) in kept.iter().enumerate() {
            let name = format!("fields_{i:05}.vtk");
            write_vtk_snapshot(&dir.join(name), &solver, &result.states[k], result.times[k])?;
        }
    }

    let diag_started = Instant::now();
    let summary = emit_diagnostics(&solver, &result, scenario, dir)?;
    let diagnostics_s = diag_started.elapsed().as_secs_f64();

    let windows = result
        .logs
        .iter()
        .map(|l| WindowLog {
            window_start: l.window_start,
            window_steps: l.window_steps,
            iterations: l.iterations,
            bisections: l.bisections,
            picard_iters: l.picard_iters,
            final_residual: l.residuals.last().copied().unwrap_or(0.0),
            mu_hats: l.mu_hats.clone(),
        })
        .collect();
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA.into(),
        scenario: scenario.clone(),
        dt_effective: cfg.dt,
        n_steps: result.states.len() - 1,
        windows,
        wall_clock: WallClock {
            total_s: started.elapsed().as_secs_f64(),
            solve_s,
            diagnostics_s,
        },
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail"),
    )?;
    Ok(RunOutcome { dir: dir.to_path_buf(), dt_effective: cfg.dt, summary })
}

/// Rebuilds the solver and full state trajectory of a finished run.
pub fn load_run(dir: &Path) -> Result<(FsiSolver, SolveResult, RunManifest)> {
    let manifest = RunManifest::load(&dir.join("manifest.json"))?;
    let mut cfg = manifest.scenario.solver.clone();
    cfg.dt = manifest.dt_effective;
    let mesh = manifest.scenario.geometry.build_mesh()?;
    let solver = FsiSolver::new(mesh, cfg)?;
    let (times, states) = read_states(&dir.join("states.bin"))?;
    let rigid = read_trajectory(&dir.join("trajectory.csv"))?;
    let result = SolveResult { times, states, rigid, logs: Vec::new() };
    Ok((solver, result, manifest))
}

// ---------------------------------------------------------------------
// Derivative post-processing
// ---------------------------------------------------------------------

/// Solves the order-`l` time-derivative problem along a finished run and
/// writes its rigid trajectory plus a finite-difference consistency
/// diagnostic. Requires the base run to be stored at stride 1 and to
/// have used theta = 1/2.
pub fn derive_run(dir: &Path, l: usize) -> Result<()> {
    if l != 1 {
        return Err(Error::invalid("only the first time derivative (l = 1) is supported"));
    }
    let (solver, base, manifest) = load_run(dir)?;
    if manifest.scenario.output.stride != 1 {
        return Err(Error::invalid(
            "derivative post-processing needs every step stored (output stride 1)",
        ));
    }
    let deriv = solve_time_derivative(&solver, &base)?;

    let r_off = solver.sys.space.rigid_offset();
    let rows: Vec<Vec<f64>> = deriv
        .times
        .iter()
        .zip(&deriv.states)
        .map(|(t, z)| {
            let mut row = vec![*t];
            row.extend_from_slice(&z[r_off..r_off + 6]);
            row
        })
        .collect();
    write_csv(&dir.join("derivative.csv"), "t,dax,day,daz,dwx,dwy,dwz", &rows)?;
    write_states(&dir.join("derivative_states.bin"), &deriv.times, &deriv.states)?;

    // Consistency: the derivative unknown is t·dU/dt, so at interior
    // steps it must match t_k times the centered difference of the base
    // states, up to the scheme order.
    let dt = solver.config.dt;
    let n = solver.sys.space.n_vel + 6;
    let mut rows = Vec::new();
    for k in 1..base.states.len().saturating_sub(1) {
        let t = base.times[k];
        let diff: Vec<f64> = (0..solver.sys.space.n_total())
            .map(|i| {
                let fd = (base.states[k + 1][i] - base.states[k - 1][i]) / (2.0 * dt);
                if i < n {
                    deriv.states[k][i] - t * fd
                } else {
                    0.0
                }
            })
            .collect();
        rows.push(vec![t, solver.sys.mass_norm(&diff)]);
    }
    write_csv(&dir.join("fd_consistency.csv"), "t,residual", &rows)?;
    Ok(())
}

// ---------------------------------------------------------------------
// Run comparison
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct FileDiff {
    pub name: String,
    pub max_abs_diff: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub files: Vec<FileDiff>,
    pub pass: bool,
}

fn table_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for (ra, rb) in a.iter().zip(b) {
        if ra.len() != rb.len() {
            return f64::INFINITY;
        }
        for (x, y) in ra.iter().zip(rb) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

/// Field-by-field comparison of two run directories: config echo must
/// match exactly; every CSV and state container present in the baseline
/// must exist in the candidate and agree within `tol`.
pub fn verify_runs(baseline: &Path, candidate: &Path, tol: f64) -> Result<VerifyReport> {
    let mut files = Vec::new();

    let sa = Scenario::load(&baseline.join("scenario.json"))?;
    let sb = Scenario::load(&candidate.join("scenario.json"))?;
    let same = sa == sb;
    files.push(FileDiff {
        name: "scenario.json".into(),
        max_abs_diff: if same { 0.0 } else { f64::INFINITY },
        pass: same,
    });

    let csvs: &[(&str, &str)] = &[
        ("trajectory.csv", TRAJECTORY_SCHEMA),
        ("energy.csv", DIAGNOSTICS_SCHEMA),
        ("momentum.csv", DIAGNOSTICS_SCHEMA),
        ("hypothesis.csv", DIAGNOSTICS_SCHEMA),
        ("prodi_serrin.csv", DIAGNOSTICS_SCHEMA),
        ("traces.csv", DIAGNOSTICS_SCHEMA),
        ("uniqueness.csv", DIAGNOSTICS_SCHEMA),
        ("derivative.csv", DIAGNOSTICS_SCHEMA),
        ("fd_consistency.csv", DIAGNOSTICS_SCHEMA),
    ];
    for (name, schema) in csvs {
        let pa = baseline.join(name);
        if !pa.exists() {
            continue;
        }
        let pb = candidate.join(name);
        let diff = if pb.exists() {
            table_diff(&read_csv_rows(&pa, schema)?, &read_csv_rows(&pb, schema)?)
        } else {
            f64::INFINITY
        };
        files.push(FileDiff { name: (*name).into(), max_abs_diff: diff, pass: diff <= tol });
    }

    for name in ["states.bin", "derivative_states.bin"] {
        let pa = baseline.join(name);
        if !pa.exists() {
            continue;
        }
        let pb = candidate.join(name);
        let diff = if pb.exists() {
            let (ta, za) = read_states(&pa)?;
            let (tb, zb) = read_states(&pb)?;
            table_diff(&[ta], &[tb]).max(table_diff(&za, &zb))
        } else {
            f64::INFINITY
        };
        files.push(FileDiff { name: name.into(), max_abs_diff: diff, pass: diff <= tol });
    }

    let pass = files.iter().all(|f| f.pass);
    Ok(VerifyReport { files, pass })
}
