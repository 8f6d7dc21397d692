//! Post-run diagnostics: every quantity the analysis tracks —
//! energy balance, integrability norms, body momentum residuals,
//! the linearization gap, product-rule defects of the transformed
//! operators and the standing hypotheses on the trajectory — computed
//! as pure functions of a completed run and its configuration.
//!
//! All integrals are taken on the reference mesh; the change of
//! variables preserves volume, so reference quadrature weights are
//! physical quadrature weights.

use crate::fem::{
    assemble_vector_rhs, eval_velocity, tet_rule, CoupledSpace, NodeClass, QuadCache,
};
use crate::operators::{
    op_g, op_g_from, op_l, op_l_from, op_m, op_m_from, op_n, op_n_gamma_from, weak_gl_point,
    OpCoeffs, PressureJet, VelocityJet,
};
use crate::rigid_motion::RigidState;
use crate::solver::{
    check_exponents, correction_rhs, CorrectionInput, FsiSolver, SolveResult,
};
use crate::transform::{FlowParams, FlowTransformBuilder, TransformData, TransformSequence};
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};

/// Discrete energy balance of a run: total kinetic energy, viscous
/// dissipation rate and the signed balance slack
/// `E(0) - E(t) - int dissipation`, never clamped.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub slack: Vec<f64>,
}

/// Norms of the body momentum equations tested against rigid test
/// functions, at interior step times.
#[derive(Debug, Clone)]
pub struct MomentumResidual {
    pub times: Vec<f64>,
    pub r_a: Vec<f64>,
    pub r_omega: Vec<f64>,
}

/// Max-norm product-rule defects of the four transformed operators.
#[derive(Debug, Clone)]
pub struct LeibnizReport {
    pub l: f64,
    pub m: f64,
    pub n: f64,
    pub g: f64,
}

/// Trajectory-level standing hypotheses: body-wall separation, rigid
/// acceleration bounds and exponent admissibility.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub min_gap: f64,
    pub max_accel: f64,
    pub max_angular_accel: f64,
    pub exponents_ok: bool,
    pub gap_ok: bool,
}

/// Boundary trace defects of a state mapped back to the physical
/// domain: no-slip on the wall, rigid trace on the body.
#[derive(Debug, Clone)]
pub struct TraceResidual {
    pub body: f64,
    pub wall: f64,
}

fn flat_weights(cache: &QuadCache) -> Vec<f64> {
    cache
        .elems
        .iter()
        .flat_map(|e| e.points.iter().map(|p| p.weight))
        .collect()
}

fn rigid_of(space: &CoupledSpace, z: &[f64]) -> (Vector3<f64>, Vector3<f64>) {
    let r = space.rigid_offset();
    (
        Vector3::new(z[r], z[r + 1], z[r + 2]),
        Vector3::new(z[r + 3], z[r + 4], z[r + 5]),
    )
}

fn run_dt(result: &SolveResult) -> Result<f64> {
    if result.times.len() < 2 {
        return Err(Error::invalid("run has no steps"));
    }
    Ok(result.times[1] - result.times[0])
}

/// Transform snapshots at every step time of the run, over the
/// solver's quadrature points.
fn step_frames(solver: &FsiSolver, result: &SolveResult) -> Result<Vec<TransformData>> {
    let dt = run_dt(result)?;
    let mut builder = solver.builder(result.rigid.clone())?;
    let mut frames = Vec::with_capacity(result.times.len());
    frames.push(builder.snapshot()?);
    for _ in 1..result.times.len() {
        builder.advance(dt)?;
        frames.push(builder.snapshot()?);
    }
    Ok(frames)
}

/// Energy, dissipation rate and balance slack at every step time.
///
/// The energy is the metric-weighted kinetic energy of the fluid plus
/// the body's translational and rotational energy; the dissipation
/// rate is the transformed viscous form of the state against itself,
/// which equals `2 int |D u|^2` on the moving domain. The slack is the
/// signed defect of the balance with the dissipation integral
/// accumulated by the same theta rule the scheme uses; implicit
/// stepping over-dissipates, so the slack stays nonnegative up to the
/// geometry corrections.
pub fn energy_report(solver: &FsiSolver, result: &SolveResult) -> Result<EnergyReport> {
    let dt = run_dt(result)?;
    let theta = solver.config.theta;
    let space = &solver.sys.space;
    let cache = &solver.sys.cache;
    let weights = flat_weights(cache);
    let frames = step_frames(solver, result)?;

    let n = result.times.len();
    let mut energy = Vec::with_capacity(n);
    let mut dissipation = Vec::with_capacity(n);
    for (z, frame) in result.states.iter().zip(&frames) {
        let evals = eval_velocity(space, cache, z);
        let mut e = 0.0;
        let mut d = 0.0;
        for ((w, (u, grad)), p) in weights.iter().zip(&evals).zip(&frame.points) {
            e += w * (p.g * u).dot(u);
            let (a, b) = weak_gl_point(p, u, grad);
            d += w * (a.dot(u) + b.component_mul(grad).sum());
        }
        let (a, omega) = rigid_of(space, z);
        e += a.norm_squared() + (solver.inertia * omega).dot(&omega);
        energy.push(0.5 * e);
        dissipation.push(d);
    }

    let mut slack = Vec::with_capacity(n);
    let mut accum = 0.0;
    slack.push(0.0);
    for k in 1..n {
        accum += dt * (theta * dissipation[k] + (1.0 - theta) * dissipation[k - 1]);
        slack.push(energy[0] - energy[k] - accum);
    }
    Ok(EnergyReport { times: result.times.clone(), energy, dissipation, slack })
}

/// The mixed space-time integrability norm
/// `( int ( int |u|^s dx )^{r/s} dt )^{1/r}` of a run, with the
/// spatial integral at quadrature `degree` and trapezoidal time
/// quadrature. The pointwise physical speed is `sqrt(U . g U)`; volume
/// preservation makes the reference measure exact.
pub fn prodi_serrin_norm(
    solver: &FsiSolver,
    result: &SolveResult,
    s: f64,
    r: f64,
    degree: usize,
) -> Result<f64> {
    check_exponents(s, r)?;
    let dt = run_dt(result)?;
    let space = &solver.sys.space;
    let cache = QuadCache::build(space, &tet_rule(degree));
    let weights = flat_weights(&cache);
    let positions = cache.positions();
    let mut builder = FlowTransformBuilder::new(
        &positions,
        solver.cutoff,
        result.rigid.clone(),
        solver.r_out,
        FlowParams { stencil_h: 1e-3, ode_substeps: solver.config.ode_substeps },
    )?;

    let mut layers = Vec::with_capacity(result.times.len());
    for (k, z) in result.states.iter().enumerate() {
        if k > 0 {
            builder.advance(dt)?;
        }
        let frame = builder.snapshot()?;
        let evals = eval_velocity(space, &cache, z);
        let mut space_int = 0.0;
        for ((w, (u, _)), p) in weights.iter().zip(&evals).zip(&frame.points) {
            space_int += w * (p.g * u).dot(u).max(0.0).powf(0.5 * s);
        }
        layers.push(space_int.powf(r / s));
    }

    let mut time_int = 0.0;
    for k in 1..layers.len() {
        time_int += 0.5 * dt * (layers[k] + layers[k - 1]);
    }
    Ok(time_int.powf(1.0 / r))
}

/// Residuals of the six body momentum rows at interior step times: the
/// metric-weighted time derivative (centered differences of the
/// states) plus the viscous forces minus the assembled geometry and
/// source corrections, all tested against the rigid test functions.
/// The states satisfy the implicit scheme, not this centered form, so
/// the residual shrinks at the scheme's first order as `dt` drops.
pub fn momentum_residual(solver: &FsiSolver, result: &SolveResult) -> Result<MomentumResidual> {
    let dt = run_dt(result)?;
    let space = &solver.sys.space;
    let cache = &solver.sys.cache;
    let r_off = space.rigid_offset();
    let nv6 = space.n_vel + 6;
    let frames = step_frames(solver, result)?;
    let evals: Vec<_> = result.states.iter().map(|z| eval_velocity(space, cache, z)).collect();
    let zero_du = vec![Vector3::zeros(); cache.n_points];

    let n = result.times.len();
    let mut times = Vec::new();
    let mut r_a = Vec::new();
    let mut r_omega = Vec::new();
    for k in 1..n.saturating_sub(1) {
        let du_fd: Vec<Vector3<f64>> = evals[k + 1]
            .iter()
            .zip(&evals[k - 1])
            .map(|(p, m)| (p.0 - m.0) / (2.0 * dt))
            .collect();
        let frame = &frames[k];
        let mdot = assemble_vector_rhs(space, cache, |i| frame.points[i].g * du_fd[i]);

        let (a_p, o_p) = rigid_of(space, &result.states[k + 1]);
        let (a_m, o_m) = rigid_of(space, &result.states[k - 1]);
        let da = (a_p - a_m) / (2.0 * dt);
        let domega = solver.inertia * ((o_p - o_m) / (2.0 * dt));

        let kz = solver.sys.stiffness().mul_vec(&result.states[k][..nv6]);
        let (a_c, omega_c) = rigid_of(space, &result.states[k]);
        let corr = correction_rhs(
            space,
            cache,
            &solver.inertia,
            &CorrectionInput {
                frame,
                u_c: &evals[k],
                du: &zero_du,
                u_tilde: &evals[k],
                a_c,
                omega_c,
                omega_tilde: omega_c,
                dt,
            },
        );

        let mut res = [0.0; 6];
        for j in 0..3 {
            res[j] = mdot[r_off + j] + da[j] + kz[r_off + j] - corr[r_off + j];
            res[3 + j] = mdot[r_off + 3 + j] + domega[j] + kz[r_off + 3 + j] - corr[r_off + 3 + j];
        }
        times.push(result.times[k]);
        r_a.push((res[0] * res[0] + res[1] * res[1] + res[2] * res[2]).sqrt());
        r_omega.push((res[3] * res[3] + res[4] * res[4] + res[5] * res[5]).sqrt());
    }
    Ok(MomentumResidual { times, r_a, r_omega })
}

/// Distance between a converged nonlinear run and the linear problem
/// re-solved around it, in the weighted mass norm over all step times.
/// A contractive scheme leaves the nonlinear solution a fixed point of
/// its own linearization, so this gap is a direct uniqueness check.
pub fn uniqueness_gap(solver: &FsiSolver, nonlinear: &SolveResult) -> Result<f64> {
    let tilde = nonlinear.as_tilde(solver);
    let linear = solver.solve_linearized(&nonlinear.states[0], &tilde)?;
    let mut gap = 0.0_f64;
    for (a, b) in linear.states.iter().zip(&nonlinear.states) {
        let dz: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
        gap = gap.max(solver.sys.mass_norm(&dz));
    }
    Ok(gap)
}

fn analytic_jet(y: &Vector3<f64>) -> VelocityJet {
    // Divergence-free trigonometric field with a closed-form jet.
    let u = Vector3::new(
        y[1].sin() * y[2].cos(),
        y[2].sin() * y[0].cos(),
        y[0].sin() * y[1].cos(),
    );
    let grad = Matrix3::new(
        0.0,
        y[1].cos() * y[2].cos(),
        -y[1].sin() * y[2].sin(),
        -y[2].sin() * y[0].sin(),
        0.0,
        y[2].cos() * y[0].cos(),
        y[0].cos() * y[1].cos(),
        -y[0].sin() * y[1].sin(),
        0.0,
    );
    let hess = [
        Matrix3::new(
            0.0, 0.0, 0.0,
            0.0, -y[1].sin() * y[2].cos(), -y[1].cos() * y[2].sin(),
            0.0, -y[1].cos() * y[2].sin(), -y[1].sin() * y[2].cos(),
        ),
        Matrix3::new(
            -y[2].sin() * y[0].cos(), 0.0, -y[2].cos() * y[0].sin(),
            0.0, 0.0, 0.0,
            -y[2].cos() * y[0].sin(), 0.0, -y[2].sin() * y[0].cos(),
        ),
        Matrix3::new(
            -y[0].sin() * y[1].cos(), -y[0].cos() * y[1].sin(), 0.0,
            -y[0].cos() * y[1].sin(), -y[0].sin() * y[1].cos(), 0.0,
            0.0, 0.0, 0.0,
        ),
    ];
    VelocityJet { u, grad, hess }
}

fn analytic_pressure(y: &Vector3<f64>) -> PressureJet {
    PressureJet {
        p: y[0].sin() * y[1].cos() + 0.5 * y[2] * y[2],
        grad: Vector3::new(
            y[0].cos() * y[1].cos(),
            -y[0].sin() * y[1].sin(),
            y[2],
        ),
    }
}

fn scale_jet(jet: &VelocityJet, s: f64) -> VelocityJet {
    VelocityJet {
        u: s * jet.u,
        grad: s * jet.grad,
        hess: [s * jet.hess[0], s * jet.hess[1], s * jet.hess[2]],
    }
}

/// Product-rule defects of the transformed operators over a snapshot
/// window: the centered time difference of `op(t) U(t)` for a smooth
/// manufactured space-time field, minus `op dU/dt` minus the same
/// operator with time-differentiated coefficient tensors. Consistent
/// coefficient derivatives leave only the `O(dt^2)` difference error.
pub fn leibniz_residual(seq: &TransformSequence) -> Result<LeibnizReport> {
    let center = seq.center();
    let n = center.points.len();
    let t_c = center.t;

    let tau = |t: f64| 1.0 + 0.3 * (1.3 * t).sin();
    let tau_dot = |t: f64| 0.39 * (1.3 * t).cos();

    let jets: Vec<VelocityJet> = center.points.iter().map(|p| analytic_jet(&p.y)).collect();
    let pjs: Vec<PressureJet> = center.points.iter().map(|p| analytic_pressure(&p.y)).collect();

    // Per-frame operator samples at the manufactured field U = tau V.
    let mut s_l = Vec::with_capacity(seq.frames.len());
    let mut s_m = Vec::with_capacity(seq.frames.len());
    let mut s_n = Vec::with_capacity(seq.frames.len());
    let mut s_g = Vec::with_capacity(seq.frames.len());
    for frame in &seq.frames {
        let tk = tau(frame.t);
        let mut fl = Vec::with_capacity(n);
        let mut fm = Vec::with_capacity(n);
        let mut fn_ = Vec::with_capacity(n);
        let mut fg = Vec::with_capacity(n);
        for (p, (jet, pj)) in frame.points.iter().zip(jets.iter().zip(&pjs)) {
            let jt = scale_jet(jet, tk);
            fl.push(op_l(p, &jt)?);
            fm.push(op_m(p, &jt));
            // The convection's lagged field is the same manufactured field.
            fn_.push(op_n(p, &(tk * jet.u), &jt));
            fg.push(op_g(p, &PressureJet { p: tk * pj.p, grad: tk * pj.grad }));
        }
        s_l.push(fl);
        s_m.push(fm);
        s_n.push(fn_);
        s_g.push(fg);
    }
    let fd_l = seq.derivative_samples(1, &s_l)?;
    let fd_m = seq.derivative_samples(1, &s_m)?;
    let fd_n = seq.derivative_samples(1, &s_n)?;
    let fd_g = seq.derivative_samples(1, &s_g)?;

    let dcs = OpCoeffs::sequence_derivative(seq, 1)?;
    let (tc, tdc) = (tau(t_c), tau_dot(t_c));

    let mut rep = LeibnizReport { l: 0.0, m: 0.0, n: 0.0, g: 0.0 };
    for i in 0..n {
        let p = &center.points[i];
        let jet = &jets[i];
        let pj = &pjs[i];
        let dc = &dcs[i];

        let rl = fd_l[i] - tdc * op_l(p, jet)? - tc * op_l_from(dc, jet);
        let rm = fd_m[i] - tdc * op_m(p, jet) - tc * op_m_from(dc, jet);
        // Both the transported field and the transport direction carry
        // tau, so the field part of the product rule appears twice.
        let rn = fd_n[i]
            - 2.0 * tc * tdc * op_n(p, &jet.u, jet)
            - tc * tc * op_n_gamma_from(dc, &jet.u, jet);
        let rg = fd_g[i] - tdc * op_g(p, pj) - tc * op_g_from(dc, pj);

        rep.l = rep.l.max(rl.norm());
        rep.m = rep.m.max(rm.norm());
        rep.n = rep.n.max(rn.norm());
        rep.g = rep.g.max(rg.norm());
    }
    Ok(rep)
}

/// Trajectory-level hypothesis check: minimal body-wall separation,
/// peak rigid accelerations (finite differences of the physical body
/// velocities) and admissibility of the configured exponents.
pub fn hypothesis_monitor(solver: &FsiSolver, result: &SolveResult) -> Result<HypothesisReport> {
    let dt = run_dt(result)?;
    let states: Vec<RigidState> =
        result.times.iter().map(|&t| result.rigid.state_at(t)).collect();

    let min_gap = states
        .iter()
        .map(|s| solver.gap(&s.q))
        .fold(f64::INFINITY, f64::min);

    let rate = |f: &dyn Fn(&RigidState) -> Vector3<f64>| -> f64 {
        let n = states.len();
        let mut max = 0.0_f64;
        for k in 0..n {
            let d = if k == 0 {
                (f(&states[1]) - f(&states[0])) / dt
            } else if k == n - 1 {
                (f(&states[n - 1]) - f(&states[n - 2])) / dt
            } else {
                (f(&states[k + 1]) - f(&states[k - 1])) / (2.0 * dt)
            };
            max = max.max(d.norm());
        }
        max
    };
    let max_accel = rate(&|s| s.a);
    let max_angular_accel = rate(&|s| s.omega);

    let exponents_ok =
        check_exponents(solver.config.exponent_s, solver.config.exponent_r).is_ok();
    Ok(HypothesisReport {
        min_gap,
        max_accel,
        max_angular_accel,
        exponents_ok,
        gap_ok: min_gap >= solver.config.gap_delta,
    })
}

/// Boundary trace defects of one state, mapped back to the physical
/// domain through the rigid state: on the body the physical trace must
/// be the rigid velocity field, on the wall it must vanish. Both hold
/// structurally in the coupled space, so anything above interpolation
/// error flags a broken coupling.
pub fn boundary_trace_residual(
    space: &CoupledSpace,
    z: &[f64],
    state: &RigidState,
) -> TraceResidual {
    let nodal = space.node_velocities(z);
    let mut body = 0.0_f64;
    let mut wall = 0.0_f64;
    for (n, class) in space.node_class.iter().enumerate() {
        match class {
            NodeClass::Inner => {
                let r = space.node_pos[n] - space.q0;
                let u_phys = state.rot * nodal[n];
                let expect = state.a + state.omega.cross(&(state.rot * r));
                body = body.max((u_phys - expect).norm());
            }
            NodeClass::Outer => {
                wall = wall.max(nodal[n].norm());
            }
            NodeClass::Free => {}
        }
    }
    TraceResidual { body, wall }
}
