//! Bootstrap solve for the scaled time derivative `V = t dU/dt`.
//!
//! Differentiating the marching equation in time and multiplying by t
//! gives a problem for V with the same linear structure as the base
//! one — same viscous form, transport, and rigid coupling — plus
//! sources built from the base solution: the time derivative of the
//! geometry coefficients applied to the frozen base field, the base
//! time derivative itself, the metric rate acting on V, the
//! linearized convection with V in the transport slot, and matching
//! rigid sources. V vanishes at t = 0, so no initial regularity is
//! consumed: one more derivative is gained per solve.
//!
//! The sources need second-order accuracy in time to preserve the
//! Crank-Nicolson order, so this solve requires theta = 1/2 and
//! evaluates everything at step midpoints; coefficient time
//! derivatives are centered differences of the step-end transform
//! frames.

use super::corrections::{correction_rhs, CorrectionInput, FieldEval};
use super::march::{FsiSolver, SolveResult};
use crate::fem::{assemble_vector_rhs, eval_velocity};
use crate::operators::{op_n, VelocityJet};
use crate::transform::TransformData;
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};

/// States of the derivative unknown at the base step times.
#[derive(Debug, Clone)]
pub struct DerivativeResult {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Solves for `V = t dU/dt` along a converged base run.
///
/// `base` must come from the same solver configuration, which must use
/// theta = 1/2.
pub fn solve_time_derivative(solver: &FsiSolver, base: &SolveResult) -> Result<DerivativeResult> {
    let cfg = &solver.config;
    if (cfg.theta - 0.5).abs() > 1e-12 {
        return Err(Error::invalid("the derivative solve requires theta = 1/2"));
    }
    let steps = cfg.steps();
    if base.states.len() != steps + 1 {
        return Err(Error::invalid("base run does not cover the configured time span"));
    }
    let dt = cfg.dt;
    let space = &solver.sys.space;
    let cache = &solver.sys.cache;
    let nv6 = space.n_vel + 6;
    let r_off = space.rigid_offset();
    let rigid_of = |z: &[f64]| {
        (
            Vector3::new(z[r_off], z[r_off + 1], z[r_off + 2]),
            Vector3::new(z[r_off + 3], z[r_off + 4], z[r_off + 5]),
        )
    };

    let base_evals: Vec<FieldEval> =
        base.states.iter().map(|z| eval_velocity(space, cache, z)).collect();

    let mut builder = solver.builder(base.rigid.clone())?;
    let mut frame_lo = builder.snapshot()?;
    let mut states: Vec<Vec<f64>> = vec![vec![0.0; space.n_total()]];

    let mut step0 = 0;
    while step0 < steps {
        let k = cfg.window_steps.min(steps - step0);

        // Transform frames at the step midpoints and ends.
        let mut frames_lo: Vec<TransformData> = Vec::with_capacity(k);
        let mut frames_mid: Vec<TransformData> = Vec::with_capacity(k);
        let mut frames_hi: Vec<TransformData> = Vec::with_capacity(k);
        for s in 0..k {
            frames_lo.push(if s == 0 { frame_lo.clone() } else { frames_hi[s - 1].clone() });
            builder.advance(0.5 * dt)?;
            frames_mid.push(builder.snapshot()?);
            builder.advance(0.5 * dt)?;
            frames_hi.push(builder.snapshot()?);
        }
        frame_lo = frames_hi[k - 1].clone();

        // Iterate-independent data per step: midpoint base field, its
        // time derivative, rigid midpoint data, and the frozen-field
        // coefficient-derivative source.
        struct StepData {
            u_mid: FieldEval,
            g_dot: Vec<Matrix3<f64>>,
            omega_mid: Vector3<f64>,
            source: Vec<f64>,
        }
        let mut data: Vec<StepData> = Vec::with_capacity(k);
        for s in 0..k {
            let n = step0 + s;
            let t_mid = (n as f64 + 0.5) * dt;
            let ev_lo = &base_evals[n];
            let ev_hi = &base_evals[n + 1];
            let u_mid: FieldEval = ev_lo
                .iter()
                .zip(ev_hi)
                .map(|(a, b)| (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1)))
                .collect();
            let u_t: Vec<Vector3<f64>> =
                ev_lo.iter().zip(ev_hi).map(|(a, b)| (b.0 - a.0) / dt).collect();
            let (a_lo, o_lo) = rigid_of(&base.states[n]);
            let (a_hi, o_hi) = rigid_of(&base.states[n + 1]);
            let a_mid = 0.5 * (a_lo + a_hi);
            let omega_mid = 0.5 * (o_lo + o_hi);
            let da_dt = (a_hi - a_lo) / dt;
            let domega_dt = (o_hi - o_lo) / dt;

            // d/dt of the coefficient-dependent weak terms, applied to
            // the frozen base field: centered difference of the
            // correction load across the step-end frames. The flat
            // parts and the rigid sources are frame-independent and
            // cancel in the difference.
            let du0 = vec![Vector3::zeros(); cache.n_points];
            let frozen = |frame: &TransformData| {
                correction_rhs(
                    space,
                    cache,
                    &solver.inertia,
                    &CorrectionInput {
                        frame,
                        u_c: &u_mid,
                        du: &du0,
                        u_tilde: &u_mid,
                        a_c: a_mid,
                        omega_c: omega_mid,
                        omega_tilde: omega_mid,
                        dt,
                    },
                )
            };
            let c_lo = frozen(&frames_lo[s]);
            let c_hi = frozen(&frames_hi[s]);

            let g_mid: Vec<Matrix3<f64>> = frames_mid[s].points.iter().map(|p| p.g).collect();
            let g_dot: Vec<Matrix3<f64>> = frames_lo[s]
                .points
                .iter()
                .zip(&frames_hi[s].points)
                .map(|(lo, hi)| (hi.g - lo.g) / dt)
                .collect();

            // Base time-derivative load, metric weighted.
            let mut source = assemble_vector_rhs(space, cache, |i| g_mid[i] * u_t[i]);
            for (srcv, (lo, hi)) in source.iter_mut().zip(c_lo.iter().zip(&c_hi)) {
                *srcv += t_mid * (hi - lo) / dt;
            }
            // Rigid sources: the base rates plus the t-scaled
            // derivative of the body source terms.
            let g1 = -domega_dt.cross(&a_mid);
            let h1 = -domega_dt.cross(&(solver.inertia * omega_mid));
            let jdo = solver.inertia * domega_dt;
            for c in 0..3 {
                source[r_off + c] += da_dt[c] + t_mid * g1[c];
                source[r_off + 3 + c] += jdo[c] + t_mid * h1[c];
            }
            data.push(StepData { u_mid, g_dot, omega_mid, source });
        }

        // Fixed-point sweeps over the window.
        let mut guess: Vec<Vec<f64>> = vec![states.last().unwrap().clone(); k];
        let mut converged = false;
        for _ in 0..cfg.max_fp_iter {
            let mut new_states: Vec<Vec<f64>> = Vec::with_capacity(k);
            let mut prev = states.last().unwrap().clone();
            let mut ev_prev = eval_velocity(space, cache, &prev);
            for s in 0..k {
                let d = &data[s];
                let ev_hat = eval_velocity(space, cache, &guess[s]);
                let v_c: FieldEval = ev_prev
                    .iter()
                    .zip(&ev_hat)
                    .map(|(a, b)| (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1)))
                    .collect();
                let dv: Vec<Vector3<f64>> =
                    ev_hat.iter().zip(&ev_prev).map(|(b, a)| b.0 - a.0).collect();
                let (a_p, o_p) = rigid_of(&prev);
                let (a_h, o_h) = rigid_of(&guess[s]);

                let mut extra = correction_rhs(
                    space,
                    cache,
                    &solver.inertia,
                    &CorrectionInput {
                        frame: &frames_mid[s],
                        u_c: &v_c,
                        du: &dv,
                        u_tilde: &d.u_mid,
                        a_c: 0.5 * (a_p + a_h),
                        omega_c: 0.5 * (o_p + o_h),
                        omega_tilde: d.omega_mid,
                        dt,
                    },
                );
                // Metric rate acting on V, and the linearized
                // convection with V transporting the base field.
                let conv = assemble_vector_rhs(space, cache, |i| {
                    let pd = &frames_mid[s].points[i];
                    let jet_u = VelocityJet {
                        u: d.u_mid[i].0,
                        grad: d.u_mid[i].1,
                        hess: [Matrix3::zeros(); 3],
                    };
                    -(d.g_dot[i] * v_c[i].0) - pd.g * op_n(pd, &v_c[i].0, &jet_u)
                });
                let kz = solver.sys.stiffness().mul_vec(&prev[..nv6]);
                for ((e, c), (srcv, kv)) in extra
                    .iter_mut()
                    .zip(&conv)
                    .zip(d.source.iter().zip(&kz))
                {
                    *e += c + srcv - 0.5 * kv;
                }
                let v_next = solver.sys.step(&prev, &extra)?;
                ev_prev = eval_velocity(space, cache, &v_next);
                prev = v_next.clone();
                new_states.push(v_next);
            }
            let delta = new_states
                .iter()
                .zip(&guess)
                .map(|(a, b)| {
                    let dz: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
                    solver.sys.mass_norm(&dz)
                })
                .fold(0.0_f64, f64::max);
            guess = new_states;
            if delta < cfg.fp_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::SolverFailure(
                "derivative window fixed point did not converge".into(),
            ));
        }
        states.extend(guess);
        step0 += k;
    }

    let times: Vec<f64> = (0..=steps).map(|n| n as f64 * dt).collect();
    Ok(DerivativeResult { times, states })
}
