//! Acceptance suite: twelve numbered criteria, run sequentially, one
//! pass/fail line each. Tolerances are pinned; a failure panics at the
//! end with the collected list so every criterion still reports.
//!
//! Run with `--nocapture` to see the per-criterion lines.

use fsi_core::diagnostics::{
    boundary_trace_residual, energy_report, leibniz_residual, prodi_serrin_norm, uniqueness_gap,
};
use fsi_core::fem::{eval_velocity, tet_rule, CoupledSpace, QuadCache};
use fsi_core::mesh::build_shell_mesh;
use fsi_core::operators::{
    op_g, op_l, op_m, op_n, pressure_cancellation_analytic, pressure_cancellation_fd,
    weak_gl_point, PressureJet, VelocityJet,
};
use fsi_core::rigid_motion::{inertia_tensor, BodyGeometry, RigidState, RigidTrajectory};
use fsi_core::solver::{
    check_exponents, correction_rhs, solve_time_derivative, CorrectionInput, FsiSolver,
    SolveResult, SolverConfig, StokesMode, StokesSystem,
};
use fsi_core::transform::{
    build_cutoff, FlowParams, FlowTransformBuilder, PointData, SpaceTimeMap, TransformData,
    TransformSequence, TwistMap,
};
use nalgebra::{Matrix3, Vector3};
use std::time::Instant;

// ---------------------------------------------------------------------
// Shared manufactured data
// ---------------------------------------------------------------------

/// Divergence-free trigonometric field with a closed-form jet.
fn field_jet(x: &Vector3<f64>) -> VelocityJet {
    let u = Vector3::new(
        x[1].sin() * x[2].cos(),
        x[2].sin() * x[0].cos(),
        x[0].sin() * x[1].cos(),
    );
    let grad = Matrix3::new(
        0.0,
        x[1].cos() * x[2].cos(),
        -x[1].sin() * x[2].sin(),
        -x[2].sin() * x[0].sin(),
        0.0,
        x[2].cos() * x[0].cos(),
        x[0].cos() * x[1].cos(),
        -x[0].sin() * x[1].sin(),
        0.0,
    );
    let hess = [
        Matrix3::new(
            0.0, 0.0, 0.0,
            0.0, -x[1].sin() * x[2].cos(), -x[1].cos() * x[2].sin(),
            0.0, -x[1].cos() * x[2].sin(), -x[1].sin() * x[2].cos(),
        ),
        Matrix3::new(
            -x[2].sin() * x[0].cos(), 0.0, -x[2].cos() * x[0].sin(),
            0.0, 0.0, 0.0,
            -x[2].cos() * x[0].sin(), 0.0, -x[2].sin() * x[0].cos(),
        ),
        Matrix3::new(
            -x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin(), 0.0,
            -x[0].cos() * x[1].sin(), -x[0].sin() * x[1].cos(), 0.0,
            0.0, 0.0, 0.0,
        ),
    ];
    VelocityJet { u, grad, hess }
}

fn twist() -> TwistMap {
    TwistMap { base: 0.35, rate: 0.6, r_lo: 0.5, r_hi: 2.0 }
}

/// Pulled-back field U(y) = (grad X)^{-1} u(X(y)) with a jet from
/// fourth-order central differences of spacing `h`.
fn pulled_back_jet4(map: &TwistMap, t: f64, y: &Vector3<f64>, h: f64) -> VelocityJet {
    let value = |y: &Vector3<f64>| -> Vector3<f64> {
        let f = map.grad(t, y);
        f.try_inverse().unwrap() * field_jet(&map.x(t, y)).u
    };
    let at = |j: usize, s: f64| -> Vector3<f64> {
        let mut p = *y;
        p[j] += s;
        value(&p)
    };
    let at2 = |j: usize, sj: f64, k: usize, sk: f64| -> Vector3<f64> {
        let mut p = *y;
        p[j] += sj;
        p[k] += sk;
        value(&p)
    };
    let u = value(y);
    let mut grad = Matrix3::zeros();
    let mut hess = [Matrix3::zeros(); 3];
    // Fourth-order first derivative weights on offsets (-2, -1, 1, 2).
    let w1 = [1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0];
    let off = [-2.0, -1.0, 1.0, 2.0];
    for j in 0..3 {
        let mut d = Vector3::zeros();
        for (w, o) in w1.iter().zip(&off) {
            d += *w * at(j, o * h);
        }
        d /= h;
        for i in 0..3 {
            grad[(i, j)] = d[i];
        }
    }
    for j in 0..3 {
        for k in 0..3 {
            let d = if j == k {
                // Fourth-order second derivative.
                (-at(j, 2.0 * h) + 16.0 * at(j, h) - 30.0 * u + 16.0 * at(j, -h)
                    - at(j, -2.0 * h))
                    / (12.0 * h * h)
            } else {
                // Tensor product of the fourth-order first derivatives.
                let mut d = Vector3::zeros();
                for (wj, oj) in w1.iter().zip(&off) {
                    for (wk, ok) in w1.iter().zip(&off) {
                        d += wj * wk * at2(j, oj * h, k, ok * h);
                    }
                }
                d / (h * h)
            };
            for i in 0..3 {
                hess[i][(j, k)] = d[i];
            }
        }
    }
    VelocityJet { u, grad, hess }
}

fn spin_down_solver(level: usize, cfg: SolverConfig) -> (FsiSolver, Vec<f64>) {
    let mesh = build_shell_mesh(level, 0.5, 2.0, Vector3::zeros()).unwrap();
    let solver = FsiSolver::new(mesh, cfg).unwrap();
    let z0 = solver
        .initial_state(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0))
        .unwrap();
    (solver, z0)
}

fn short_spin_config(dt: f64) -> SolverConfig {
    let mut cfg = SolverConfig::default();
    cfg.dt = dt;
    cfg.t_end = 0.1;
    cfg.window_steps = 5;
    cfg.fp_tol = 1e-10;
    cfg.picard_tol = 1e-10;
    cfg
}

// ---------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------

type Check = std::result::Result<String, String>;
fn c03_pullback_consistency() -> Check {
    let map = twist();
    let t = 0.3;
    let points = [
        Vector3::new(0.9, 0.2, -0.4),
        Vector3::new(-0.3, 1.0, 0.5),
        Vector3::new(0.7, -0.5, 0.6),
    ];
    let grad_p = |x: &Vector3<f64>| {
        Vector3::new(x[1] * (x[0] * x[1]).cos(), x[0] * (x[0] * x[1]).cos(), x[2])
    };
    let errors = |h: f64| -> (f64, f64, f64) {
        let (mut el, mut en, mut eg) = (0.0f64, 0.0f64, 0.0f64);
        for y in points {
            let d = TransformData::from_map(&map, t, &[y], 1e-4).unwrap().points[0].clone();
            let jet = pulled_back_jet4(&map, t, &y, h);
            let inv = d.grad_x.try_inverse().unwrap();
            let phys = field_jet(&d.x);
            let lap =
                Vector3::new(phys.hess[0].trace(), phys.hess[1].trace(), phys.hess[2].trace());
            el = el.max((op_l(&d, &jet).unwrap() - inv * lap).norm());
            let ut_ref = inv * phys.u;
            en = en.max((op_n(&d, &ut_ref, &jet) - inv * (phys.grad * phys.u)).norm());
            let pj = PressureJet { p: 0.0, grad: d.grad_x.transpose() * grad_p(&d.x) };
            eg = eg.max((op_g(&d, &pj) - inv * grad_p(&d.x)).norm());
        }
        (el, en, eg)
    };
    let (l1, n1, g1) = errors(1.0 / 64.0);
    let (l2, n2, _) = errors(1.0 / 128.0);
    let ratio_l = l1 / l2;
    let ratio_n = n1 / n2;
    let detail = format!(
        "h=1/64: L {l1:.2e}, N {n1:.2e}, G {g1:.2e} (each <1e-4); refinement ratios L {ratio_l:.1}, N {ratio_n:.1} (>8)"
    );
    if l1 < 1e-4 && n1 < 1e-4 && g1 < 1e-4 && ratio_l > 8.0 && ratio_n > 8.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[test]
fn c3() {
    let map = twist();
    let t = 0.3;
    for h in [1.0/64.0, 1.0/128.0, 1.0/256.0] {
        let y = Vector3::new(0.9, 0.2, -0.4);
        let d = TransformData::from_map(&map, t, &[y], 1e-4).unwrap().points[0].clone();
        let jet = pulled_back_jet4(&map, t, &y, h);
        let inv = d.grad_x.try_inverse().unwrap();
        let phys = field_jet(&d.x);
        let lap = Vector3::new(phys.hess[0].trace(), phys.hess[1].trace(), phys.hess[2].trace());
        let el = (op_l(&d, &jet).unwrap() - inv * lap).norm();
        let en = (op_n(&d, &(inv*phys.u), &jet) - inv * (phys.grad * phys.u)).norm();
        println!("h={h}: L={el:.3e} N={en:.3e}");
    }
    match c03_pullback_consistency() { Ok(s)|Err(s) => println!("c03: {s}") }
}
