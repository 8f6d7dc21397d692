//! Window-based fixed-point marching for the linearized problem and
//! the Picard outer loop for the nonlinear one.
//!
//! A window of consecutive implicit steps is solved by sweeping the
//! whole window repeatedly: each sweep marches the factored flat
//! system with geometry corrections evaluated at the previous sweep's
//! trajectory. The measured contraction factor decides convergence;
//! windows that refuse to contract are bisected in time and retried.

use super::corrections::{correction_rhs, CorrectionInput, FieldEval};
use super::stokes::{StokesMode, StokesSystem};
use super::SolverConfig;
use crate::fem::eval_velocity;
use crate::mesh::ShellMesh;
use crate::rigid_motion::{BodyGeometry, RigidTrajectory};
use crate::transform::{build_cutoff, CutoffField, FlowParams, FlowTransformBuilder, PotentialField, TransformData};
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};

/// Convergence record of one fixed-point window.
#[derive(Debug, Clone)]
pub struct FixedPointLog {
    pub window_start: f64,
    pub window_steps: usize,
    pub iterations: usize,
    /// Successive-sweep distances in the weighted mass norm.
    pub residuals: Vec<f64>,
    /// Per-iteration contraction factors.
    pub mu_hats: Vec<f64>,
    pub bisections: usize,
    pub picard_iters: usize,
}

impl FixedPointLog {
    /// Largest measured contraction factor after the first iteration.
    pub fn mu_max(&self) -> Option<f64> {
        self.mu_hats.iter().copied().fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }
}

/// Linearization data: the rigid motion driving the transform and the
/// transformed field the convection linearizes around, sampled at
/// every step time.
#[derive(Debug, Clone)]
pub struct TildeData {
    pub a_ref: Vec<Vector3<f64>>,
    pub omega_ref: Vec<Vector3<f64>>,
    pub states: Vec<Vec<f64>>,
}

/// A completed run: states at uniform times plus the reconstructed
/// physical body path and the per-window iteration logs.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub rigid: RigidTrajectory,
    pub logs: Vec<FixedPointLog>,
}

impl SolveResult {
    /// Repackages the run as linearization data for a follow-up solve.
    pub fn as_tilde(&self, solver: &FsiSolver) -> TildeData {
        let (a_ref, omega_ref) = rigid_samples(&solver.sys.space, &self.states);
        TildeData { a_ref, omega_ref, states: self.states.clone() }
    }
}

/// Outcome of a window sweep loop that the adaptive driver reacts to.
enum WindowError {
    NotContracting,
    Fatal(Error),
}

/// The assembled problem: factored flat system, cutoff geometry and
/// run parameters.
pub struct FsiSolver {
    pub sys: StokesSystem,
    pub cutoff: CutoffField,
    pub config: SolverConfig,
    pub inertia: Matrix3<f64>,
    pub r_out: f64,
    positions: Vec<Vector3<f64>>,
}

impl FsiSolver {
    pub fn new(mesh: ShellMesh, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let r_in = mesh.r_in;
        let r_out = mesh.r_out;
        let center = mesh.center;
        let inertia = BodyGeometry::new(r_in, center)?.ball_inertia();
        let cutoff = build_cutoff(r_in, r_out, center, 0.3, 0.25)?;
        let space = crate::fem::CoupledSpace::new(mesh);
        let sys = StokesSystem::new(
            space,
            StokesMode::Unsteady { dt: config.dt, theta: config.theta },
            inertia,
            false,
        )?;
        let positions = sys.cache.positions();
        Ok(FsiSolver { sys, cutoff, config, inertia, r_out, positions })
    }

    /// Divergence-free initial state from the rigid extension field:
    /// interpolate `curl(zeta psi)` at the nodes, set the rigid
    /// unknowns, then project onto the discrete constraint set.
    pub fn initial_state(&self, a0: Vector3<f64>, omega0: Vector3<f64>) -> Result<Vec<f64>> {
        let space = &self.sys.space;
        let field = PotentialField::extension(a0, omega0, &self.cutoff);
        let values: Vec<Vector3<f64>> = space.node_pos.iter().map(|p| field.value(p)).collect();
        let mut z = vec![0.0; space.n_total()];
        space.set_from_nodes(&values, &a0, &omega0, &mut z);

        let projector = StokesSystem::new(
            space.clone(),
            StokesMode::Projection,
            self.inertia,
            true,
        )?;
        projector.project(&z)
    }

    /// Body-wall distance at a body center position.
    pub fn gap(&self, q: &Vector3<f64>) -> f64 {
        self.r_out - (q - self.cutoff.q0).norm() - self.sys.space.mesh.r_in
    }

    fn check_gap(&self, rigid: &RigidTrajectory, t0: f64, t1: f64) -> Result<()> {
        let mut t = t0;
        while t <= t1 + 1e-12 {
            let gap = self.gap(&rigid.state_at(t).q);
            if gap < self.config.gap_delta {
                return Err(Error::GapViolation(format!(
                    "body-wall gap {gap:.4} fell below delta {:.4} at t = {t:.4}",
                    self.config.gap_delta
                )));
            }
            t += self.config.dt;
        }
        Ok(())
    }

    /// Physical body path reconstructed from reference rigid samples.
    pub fn rigid_path(
        &self,
        a_ref: &[Vector3<f64>],
        omega_ref: &[Vector3<f64>],
    ) -> Result<RigidTrajectory> {
        RigidTrajectory::from_reference_samples(
            self.cutoff.q0,
            Matrix3::identity(),
            self.config.dt,
            a_ref,
            omega_ref,
        )
    }

    /// Fresh transform builder over the quadrature points.
    pub fn builder(&self, rigid: RigidTrajectory) -> Result<FlowTransformBuilder> {
        FlowTransformBuilder::new(
            &self.positions,
            self.cutoff,
            rigid,
            self.r_out,
            FlowParams { stencil_h: 1e-3, ode_substeps: self.config.ode_substeps },
        )
    }

    /// Coefficient-time transform frames for `steps` steps starting at
    /// the builder's current time. For backward Euler the coefficient
    /// time is the step end; for Crank-Nicolson the midpoint.
    pub fn coefficient_frames(
        &self,
        builder: &mut FlowTransformBuilder,
        steps: usize,
    ) -> Result<Vec<TransformData>> {
        let dt = self.config.dt;
        let theta = self.config.theta;
        let mut frames = Vec::with_capacity(steps);
        for _ in 0..steps {
            builder.advance(theta * dt)?;
            frames.push(builder.snapshot()?);
            if theta < 1.0 {
                builder.advance((1.0 - theta) * dt)?;
            }
        }
        Ok(frames)
    }

    fn eval(&self, z: &[f64]) -> FieldEval {
        eval_velocity(&self.sys.space, &self.sys.cache, z)
    }

    fn rigid_of(&self, z: &[f64]) -> (Vector3<f64>, Vector3<f64>) {
        let r = self.sys.space.rigid_offset();
        (
            Vector3::new(z[r], z[r + 1], z[r + 2]),
            Vector3::new(z[r + 3], z[r + 4], z[r + 5]),
        )
    }

    /// One sweep through a window: march the flat system with
    /// corrections taken from the previous sweep's trajectory.
    fn sweep(
        &self,
        z_start: &[f64],
        frames: &[TransformData],
        tilde_evals: &[FieldEval],
        tilde_rigid: &[(Vector3<f64>, Vector3<f64>)],
        guess: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>> {
        let theta = self.config.theta;
        let dt = self.config.dt;
        let nv6 = self.sys.space.n_vel + 6;
        let k = frames.len();
        let mut states: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut prev = z_start.to_vec();
        let mut ev_prev = self.eval(&prev);
        for n in 0..k {
            let ev_hat = self.eval(&guess[n]);
            let u_c: FieldEval = ev_prev
                .iter()
                .zip(&ev_hat)
                .map(|(a, b)| (theta * b.0 + (1.0 - theta) * a.0, theta * b.1 + (1.0 - theta) * a.1))
                .collect();
            let du: Vec<Vector3<f64>> =
                ev_hat.iter().zip(&ev_prev).map(|(b, a)| b.0 - a.0).collect();
            let tilde_c: FieldEval = tilde_evals[n]
                .iter()
                .zip(&tilde_evals[n + 1])
                .map(|(a, b)| (theta * b.0 + (1.0 - theta) * a.0, theta * b.1 + (1.0 - theta) * a.1))
                .collect();
            let (a_p, o_p) = self.rigid_of(&prev);
            let (a_h, o_h) = self.rigid_of(&guess[n]);
            let a_c = theta * a_h + (1.0 - theta) * a_p;
            let omega_c = theta * o_h + (1.0 - theta) * o_p;
            let omega_tilde =
                theta * tilde_rigid[n + 1].1 + (1.0 - theta) * tilde_rigid[n].1;

            let mut extra = correction_rhs(
                &self.sys.space,
                &self.sys.cache,
                &self.inertia,
                &CorrectionInput {
                    frame: &frames[n],
                    u_c: &u_c,
                    du: &du,
                    u_tilde: &tilde_c,
                    a_c,
                    omega_c,
                    omega_tilde,
                    dt,
                },
            );
            if theta < 1.0 {
                let kz = self.sys.stiffness().mul_vec(&prev[..nv6]);
                for (e, v) in extra.iter_mut().zip(&kz) {
                    *e -= (1.0 - theta) * v;
                }
            }
            let z_next = self.sys.step(&prev, &extra)?;
            ev_prev = self.eval(&z_next);
            prev = z_next.clone();
            states.push(z_next);
        }
        Ok(states)
    }

    /// Fixed-point iteration on one window. Returns the converged
    /// per-step states or signals that the window must be split.
    fn fixed_point(
        &self,
        z_start: &[f64],
        frames: &[TransformData],
        tilde_evals: &[FieldEval],
        tilde_rigid: &[(Vector3<f64>, Vector3<f64>)],
        t_start: f64,
        log: &mut FixedPointLog,
    ) -> std::result::Result<Vec<Vec<f64>>, WindowError> {
        let k = frames.len();
        // First guess: the linearization trajectory itself.
        let mut guess: Vec<Vec<f64>> = Vec::with_capacity(k);
        for n in 0..k {
            guess.push(tilde_guess(tilde_evals.len(), n, z_start));
        }
        let _ = t_start;
        let mut guess: Vec<Vec<f64>> = guess;
        // If linearization states are usable as a guess, prefer them;
        // otherwise start from the window's initial state.
        let mut prev_delta: Option<f64> = None;
        let mut stall = 0;
        for it in 0..self.config.max_fp_iter {
            let states = self
                .sweep(z_start, frames, tilde_evals, tilde_rigid, &guess)
                .map_err(WindowError::Fatal)?;
            let delta = states
                .iter()
                .zip(&guess)
                .map(|(a, b)| {
                    let dz: Vec<f64> =
                        a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
                    self.sys.mass_norm(&dz)
                })
                .fold(0.0_f64, f64::max);
            log.iterations = it + 1;
            log.residuals.push(delta);
            if let Some(p) = prev_delta {
                if p > 0.0 {
                    let mu = delta / p;
                    log.mu_hats.push(mu);
                    if mu >= 1.0 {
                        stall += 1;
                        if stall >= 3 {
                            return Err(WindowError::NotContracting);
                        }
                    } else {
                        stall = 0;
                    }
                }
            }
            if delta < self.config.fp_tol {
                return Ok(states);
            }
            prev_delta = Some(delta);
            guess = states;
        }
        Err(WindowError::NotContracting)
    }

    /// Window solve with bisection fallback: a non-contracting window
    /// of at least two steps is split in half and both halves retried.
    fn solve_window(
        &self,
        z_start: &[f64],
        frames: &[TransformData],
        tilde_evals: &[FieldEval],
        tilde_rigid: &[(Vector3<f64>, Vector3<f64>)],
        t_start: f64,
        depth: usize,
        logs: &mut Vec<FixedPointLog>,
    ) -> Result<Vec<Vec<f64>>> {
        let k = frames.len();
        let mut log = FixedPointLog {
            window_start: t_start,
            window_steps: k,
            iterations: 0,
            residuals: Vec::new(),
            mu_hats: Vec::new(),
            bisections: depth,
            picard_iters: 0,
        };
        match self.fixed_point(z_start, frames, tilde_evals, tilde_rigid, t_start, &mut log) {
            Ok(states) => {
                logs.push(log);
                Ok(states)
            }
            Err(WindowError::Fatal(e)) => Err(e),
            Err(WindowError::NotContracting) => {
                if std::env::var_os("FSI_DEBUG_FP").is_some() {
                    eprintln!(
                        "window t0={} steps={} depth={} residuals={:?} mu={:?}",
                        t_start, k, depth, log.residuals, log.mu_hats
                    );
                }
                logs.push(log);
                if depth >= 12 {
                    return Err(Error::SolverFailure(
                        "window bisection depth exceeded".into(),
                    ));
                }
                if k < 2 {
                    return Err(Error::SolverFailure(
                        "single-step window failed to contract".into(),
                    ));
                }
                let m = k / 2;
                let mut first = self.solve_window(
                    z_start,
                    &frames[..m],
                    &tilde_evals[..=m],
                    &tilde_rigid[..=m],
                    t_start,
                    depth + 1,
                    logs,
                )?;
                let z_mid = first.last().cloned().expect("nonempty half window");
                let second = self.solve_window(
                    &z_mid,
                    &frames[m..],
                    &tilde_evals[m..],
                    &tilde_rigid[m..],
                    t_start + m as f64 * self.config.dt,
                    depth + 1,
                    logs,
                )?;
                first.extend(second);
                Ok(first)
            }
        }
    }

    /// Solves the problem linearized around the given data over the
    /// whole configured time span.
    pub fn solve_linearized(&self, z0: &[f64], tilde: &TildeData) -> Result<SolveResult> {
        let steps = self.config.steps();
        if tilde.states.len() != steps + 1
            || tilde.a_ref.len() != steps + 1
            || tilde.omega_ref.len() != steps + 1
        {
            return Err(Error::invalid("linearization data must cover every step time"));
        }
        let rigid = self.rigid_path(&tilde.a_ref, &tilde.omega_ref)?;
        self.check_gap(&rigid, 0.0, self.config.t_end)?;
        let mut builder = self.builder(rigid.clone())?;

        let tilde_evals: Vec<FieldEval> =
            tilde.states.iter().map(|z| self.eval(z)).collect();
        let tilde_rigid: Vec<(Vector3<f64>, Vector3<f64>)> = tilde
            .a_ref
            .iter()
            .zip(&tilde.omega_ref)
            .map(|(a, o)| (*a, *o))
            .collect();

        let mut logs = Vec::new();
        let mut states: Vec<Vec<f64>> = vec![z0.to_vec()];
        let mut step0 = 0;
        while step0 < steps {
            let k = self.config.window_steps.min(steps - step0);
            let frames = self.coefficient_frames(&mut builder, k).map_err(gap_to_gap)?;
            let window = self.solve_window(
                states.last().unwrap(),
                &frames,
                &tilde_evals[step0..=step0 + k],
                &tilde_rigid[step0..=step0 + k],
                step0 as f64 * self.config.dt,
                0,
                &mut logs,
            )?;
            states.extend(window);
            step0 += k;
        }

        let times: Vec<f64> = (0..=steps).map(|n| n as f64 * self.config.dt).collect();
        Ok(SolveResult { times, states, rigid, logs })
    }

    /// Nonlinear solve: per window, Picard iteration in which both the
    /// convection field and the domain motion come from the previous
    /// iterate, each inner pass being a fixed-point window solve.
    pub fn solve_nonlinear(&self, z0: &[f64]) -> Result<SolveResult> {
        let steps = self.config.steps();
        let dt = self.config.dt;
        let mut logs: Vec<FixedPointLog> = Vec::new();
        let mut states: Vec<Vec<f64>> = vec![z0.to_vec()];
        let mut checkpoint: Option<FlowTransformBuilder> = None;

        let mut step0 = 0;
        while step0 < steps {
            let k = self.config.window_steps.min(steps - step0);
            // Initial linearization: hold the last accepted state.
            let hold = states.last().unwrap().clone();
            let mut tilde_states: Vec<Vec<f64>> = vec![hold.clone(); k];

            let mut accepted: Option<Vec<Vec<f64>>> = None;
            let mut picard_iters = 0;
            for picard in 0..self.config.max_picard_iter {
                picard_iters = picard + 1;
                // Candidate rigid history: accepted prefix plus the
                // window linearization.
                let full: Vec<&Vec<f64>> =
                    states.iter().chain(tilde_states.iter()).collect();
                let (a_ref, omega_ref) = rigid_samples_ref(&self.sys.space, &full);
                let rigid = self.rigid_path(&a_ref, &omega_ref)?;
                self.check_gap(&rigid, step0 as f64 * dt, (step0 + k) as f64 * dt)?;

                let mut builder = match &checkpoint {
                    Some(b) => {
                        let mut b = b.clone();
                        b.trajectory = rigid.clone();
                        b
                    }
                    None => self.builder(rigid.clone())?,
                };
                let frames =
                    self.coefficient_frames(&mut builder, k).map_err(gap_to_gap)?;

                let window_nodes: Vec<&Vec<f64>> = std::iter::once(states.last().unwrap())
                    .chain(tilde_states.iter())
                    .collect();
                let tilde_evals: Vec<FieldEval> =
                    window_nodes.iter().map(|z| self.eval(z)).collect();
                let tilde_rigid: Vec<(Vector3<f64>, Vector3<f64>)> =
                    window_nodes.iter().map(|z| self.rigid_of(z)).collect();

                let log_base = logs.len();
                let window = self.solve_window(
                    states.last().unwrap(),
                    &frames,
                    &tilde_evals,
                    &tilde_rigid,
                    step0 as f64 * dt,
                    0,
                    &mut logs,
                )?;
                for l in logs[log_base..].iter_mut() {
                    l.picard_iters = picard + 1;
                }

                let delta = window
                    .iter()
                    .zip(&tilde_states)
                    .map(|(a, b)| {
                        let dz: Vec<f64> =
                            a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
                        self.sys.mass_norm(&dz)
                    })
                    .fold(0.0_f64, f64::max);
                if delta < self.config.picard_tol {
                    accepted = Some(window);
                    break;
                }
                tilde_states = window;
            }
            let window = accepted.ok_or_else(|| {
                Error::SolverFailure(format!(
                    "Picard iteration did not converge in {picard_iters} passes"
                ))
            })?;
            states.extend(window);

            // Re-advance the checkpoint under the accepted history so
            // the next window starts from a consistent transform.
            let all: Vec<&Vec<f64>> = states.iter().collect();
            let (a_ref, omega_ref) = rigid_samples_ref(&self.sys.space, &all);
            let rigid = self.rigid_path(&a_ref, &omega_ref)?;
            let mut b = match checkpoint.take() {
                Some(mut b) => {
                    b.trajectory = rigid;
                    b
                }
                None => self.builder(rigid)?,
            };
            for _ in 0..k {
                b.advance(dt).map_err(gap_to_gap)?;
            }
            checkpoint = Some(b);
            step0 += k;
        }

        let all: Vec<&Vec<f64>> = states.iter().collect();
        let (a_ref, omega_ref) = rigid_samples_ref(&self.sys.space, &all);
        let rigid = self.rigid_path(&a_ref, &omega_ref)?;
        let times: Vec<f64> = (0..=steps).map(|n| n as f64 * dt).collect();
        Ok(SolveResult { times, states, rigid, logs })
    }
}

/// Nonlinear solve with the step-halving fallback: on inner
/// non-convergence the run is retried with dt halved, up to three
/// times.
pub fn solve_nonlinear(mesh: &ShellMesh, config: &SolverConfig, a0: Vector3<f64>, omega0: Vector3<f64>) -> Result<SolveResult> {
    let mut cfg = config.clone();
    let mut last_err = None;
    for _ in 0..4 {
        let solver = FsiSolver::new(mesh.clone(), cfg.clone())?;
        let z0 = solver.initial_state(a0, omega0)?;
        match solver.solve_nonlinear(&z0) {
            Ok(r) => return Ok(r),
            Err(Error::SolverFailure(msg)) => {
                last_err = Some(Error::SolverFailure(msg));
                cfg.dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::SolverFailure("nonlinear solve failed".into())))
}

/// Linearized solve around explicit data (free function mirror of the
/// method, for callers that own only the mesh).
pub fn solve_linearized(
    mesh: &ShellMesh,
    config: &SolverConfig,
    z0: &[f64],
    tilde: &TildeData,
) -> Result<SolveResult> {
    let solver = FsiSolver::new(mesh.clone(), config.clone())?;
    solver.solve_linearized(z0, tilde)
}

fn tilde_guess(_n_nodes: usize, _n: usize, z_start: &[f64]) -> Vec<f64> {
    z_start.to_vec()
}

fn gap_to_gap(e: Error) -> Error {
    match e {
        Error::GapViolation(m) => Error::GapViolation(m),
        other => other,
    }
}

fn rigid_samples(
    space: &crate::fem::CoupledSpace,
    states: &[Vec<f64>],
) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    let refs: Vec<&Vec<f64>> = states.iter().collect();
    rigid_samples_ref(space, &refs)
}

fn rigid_samples_ref(
    space: &crate::fem::CoupledSpace,
    states: &[&Vec<f64>],
) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    let r = space.rigid_offset();
    let a = states
        .iter()
        .map(|z| Vector3::new(z[r], z[r + 1], z[r + 2]))
        .collect();
    let o = states
        .iter()
        .map(|z| Vector3::new(z[r + 3], z[r + 4], z[r + 5]))
        .collect();
    (a, o)
}
