//! Space-time maps with pointwise Jacobians, used both as the analytic
//! realization of the flow transform and as independent oracles for the
//! finite-difference metric pipeline.

use super::{CutoffField, PotentialField};
use crate::rigid_motion::RigidTrajectory;
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};

/// A time-dependent map `X(t, y)` with its spatial Jacobian and time
/// derivatives. `grad[(i, j)] = d X_i / d y_j`.
pub trait SpaceTimeMap {
    fn x(&self, t: f64, y: &Vector3<f64>) -> Vector3<f64>;
    fn grad(&self, t: f64, y: &Vector3<f64>) -> Matrix3<f64>;

    /// d X / d t at fixed `y`; default is a centered difference.
    fn xdot(&self, t: f64, y: &Vector3<f64>) -> Vector3<f64> {
        let h = 1e-5;
        (self.x(t + h, y) - self.x(t - h, y)) / (2.0 * h)
    }

    /// d (grad X) / d t at fixed `y`; default is a centered difference.
    fn grad_xdot(&self, t: f64, y: &Vector3<f64>) -> Matrix3<f64> {
        let h = 1e-5;
        (self.grad(t + h, y) - self.grad(t - h, y)) / (2.0 * h)
    }
}

/// The identity map; metric data degenerates to the flat values.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMap;

impl SpaceTimeMap for IdentityMap {
    fn x(&self, _t: f64, y: &Vector3<f64>) -> Vector3<f64> {
        *y
    }
    fn grad(&self, _t: f64, _y: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::identity()
    }
    fn xdot(&self, _t: f64, _y: &Vector3<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }
    fn grad_xdot(&self, _t: f64, _y: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::zeros()
    }
}

fn rz(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rz_d(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

fn rz_dd(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(-c, s, 0.0, -s, -c, 0.0, 0.0, 0.0, 0.0)
}

/// Radius-dependent twist about the z axis,
/// `X = R_z(alpha(t, |y|)) y` with
/// `alpha = (base + rate sin t) bump(|y|)`.
///
/// The bump vanishes outside `(r_lo, r_hi)`, so the map is the identity
/// near both boundaries; the determinant is exactly one because the
/// angular shear is area preserving on each sphere.
#[derive(Debug, Clone, Copy)]
pub struct TwistMap {
    pub base: f64,
    pub rate: f64,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl TwistMap {
    /// C^2 bump, 0 at both ends, peak 1 in the middle.
    fn bump(&self, r: f64) -> (f64, f64) {
        if r <= self.r_lo || r >= self.r_hi {
            return (0.0, 0.0);
        }
        let width = self.r_hi - self.r_lo;
        let s = (r - self.r_lo) / width;
        let b = 64.0 * s.powi(3) * (1.0 - s).powi(3);
        let db = 64.0 * (3.0 * s * s * (1.0 - s).powi(3) - 3.0 * s.powi(3) * (1.0 - s).powi(2))
            / width;
        (b, db)
    }

    fn angle(&self, t: f64, r: f64) -> (f64, f64, f64, f64) {
        let amp = self.base + self.rate * t.sin();
        let damp = self.rate * t.cos();
        let (b, db) = self.bump(r);
        // (alpha, d alpha / d r, d alpha / d t, d^2 alpha / dr dt)
        (amp * b, amp * db, damp * b, damp * db)
    }
}

impl SpaceTimeMap for TwistMap {
    fn x(&self, t: f64, y: &Vector3<f64>) -> Vector3<f64> {
        let (alpha, ..) = self.angle(t, y.norm());
        rz(alpha) * y
    }

    fn grad(&self, t: f64, y: &Vector3<f64>) -> Matrix3<f64> {
        let r = y.norm();
        if r < 1e-14 {
            return Matrix3::identity();
        }
        let (alpha, ar, ..) = self.angle(t, r);
        rz(alpha) + (rz_d(alpha) * y) * (y.transpose() * (ar / r))
    }

    fn xdot(&self, t: f64, y: &Vector3<f64>) -> Vector3<f64> {
        let (alpha, _, at, _) = self.angle(t, y.norm());
        rz_d(alpha) * y * at
    }

    fn grad_xdot(&self, t: f64, y: &Vector3<f64>) -> Matrix3<f64> {
        let r = y.norm();
        if r < 1e-14 {
            return Matrix3::zeros();
        }
        let (alpha, ar, at, art) = self.angle(t, r);
        let grad_alpha = y * (ar / r);
        let grad_at = y * (art / r);
        rz_dd(alpha) * y * at * grad_alpha.transpose()
            + rz_d(alpha) * at
            + (rz_d(alpha) * y) * grad_at.transpose()
    }
}

/// Static map with quadratic components,
/// `X_i = y_i + (L y)_i + y^T Q_i y / 2`.
///
/// Its metric derivatives are polynomial, so the Christoffel symbols
/// have a closed form that serves as an oracle for the stencil path.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticMap {
    pub linear: Matrix3<f64>,
    /// One symmetric matrix per component of X.
    pub quad: [Matrix3<f64>; 3],
}

impl QuadraticMap {
    /// d (grad X) / d y_l, constant in `y`.
    fn dgrad(&self, l: usize) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = self.quad[i][(j, l)];
            }
        }
        m
    }

    /// Exact metric derivatives `dg[l] = d g / d y_l`.
    pub fn exact_dg(&self, y: &Vector3<f64>) -> [Matrix3<f64>; 3] {
        let f = self.grad(0.0, y);
        let mut dg = [Matrix3::zeros(); 3];
        for l in 0..3 {
            let df = self.dgrad(l);
            dg[l] = df.transpose() * f + f.transpose() * df;
        }
        dg
    }
}

impl SpaceTimeMap for QuadraticMap {
    fn x(&self, _t: f64, y: &Vector3<f64>) -> Vector3<f64> {
        let mut out = y + self.linear * y;
        for i in 0..3 {
            out[i] += 0.5 * (y.transpose() * self.quad[i] * y)[(0, 0)];
        }
        out
    }

    fn grad(&self, _t: f64, y: &Vector3<f64>) -> Matrix3<f64> {
        let mut f = Matrix3::identity() + self.linear;
        for i in 0..3 {
            let row = (self.quad[i] * y).transpose();
            for j in 0..3 {
                f[(i, j)] += row[(0, j)];
            }
        }
        f
    }

    fn xdot(&self, _t: f64, _y: &Vector3<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }
    fn grad_xdot(&self, _t: f64, _y: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::zeros()
    }
}

/// The flow map of the transport field for a given rigid trajectory,
/// evaluated by fresh Runge-Kutta integration from t = 0 for every call.
///
/// Slow but stateless; the production path keeps running clusters in
/// `FlowTransformBuilder` and uses this map as its oracle and for the
/// nested-difference divergence terms.
#[derive(Debug, Clone)]
pub struct RigidFlowMap {
    pub cutoff: CutoffField,
    pub trajectory: RigidTrajectory,
    /// Integration step for the characteristic ODE.
    pub dt_ode: f64,
}

impl RigidFlowMap {
    pub fn new(cutoff: CutoffField, trajectory: RigidTrajectory, dt_ode: f64) -> Result<Self> {
        if !(dt_ode > 0.0) {
            return Err(Error::invalid("flow map requires dt_ode > 0"));
        }
        Ok(RigidFlowMap { cutoff, trajectory, dt_ode })
    }

    /// Integrates position and Jacobian jointly to time `t`.
    pub fn flow_to(&self, t: f64, y: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let mut x = *y;
        let mut f = Matrix3::identity();
        if t <= 0.0 {
            return (x, f);
        }
        let n = (t / self.dt_ode).ceil().max(1.0) as usize;
        let dt = t / n as f64;
        for step in 0..n {
            let t0 = step as f64 * dt;
            super::flow::rk4_flow_step(&self.trajectory, &self.cutoff, t0, dt, &mut x, &mut f);
        }
        (x, f)
    }

    fn field_at(&self, t: f64) -> PotentialField {
        PotentialField::transport(&self.trajectory.state_at(t), &self.cutoff)
    }
}

impl SpaceTimeMap for RigidFlowMap {
    fn x(&self, t: f64, y: &Vector3<f64>) -> Vector3<f64> {
        self.flow_to(t, y).0
    }

    fn grad(&self, t: f64, y: &Vector3<f64>) -> Matrix3<f64> {
        self.flow_to(t, y).1
    }

    fn xdot(&self, t: f64, y: &Vector3<f64>) -> Vector3<f64> {
        let (x, _) = self.flow_to(t, y);
        self.field_at(t).value(&x)
    }

    fn grad_xdot(&self, t: f64, y: &Vector3<f64>) -> Matrix3<f64> {
        let (x, f) = self.flow_to(t, y);
        let (_, gw) = self.field_at(t).value_and_grad(&x);
        gw * f
    }
}

/// Solves `X(t, y) = x` for `y` by Newton iteration from `guess`.
pub fn invert_transform(
    map: &dyn SpaceTimeMap,
    t: f64,
    x: &Vector3<f64>,
    guess: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let mut y = *guess;
    for _ in 0..50 {
        let res = map.x(t, &y) - x;
        if res.norm() < 1e-12 {
            return Ok(y);
        }
        let jac = map.grad(t, &y);
        let step = jac
            .lu()
            .solve(&res)
            .ok_or_else(|| Error::invalid("singular Jacobian in transform inversion"))?;
        y -= step;
    }
    Err(Error::NewtonDiverged(x[0], x[1], x[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{build_cutoff, metric_from_grad};
    use approx::assert_relative_eq;

    fn twist() -> TwistMap {
        TwistMap { base: 0.3, rate: 0.7, r_lo: 0.5, r_hi: 2.0 }
    }

    #[test]
    fn twist_gradient_matches_fd() {
        let m = twist();
        let y = Vector3::new(0.9, -0.4, 0.5);
        let t = 0.4;
        let g = m.grad(t, &y);
        let h = 1e-6;
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = h;
            let fd = (m.x(t, &(y + e)) - m.x(t, &(y - e))) / (2.0 * h);
            for i in 0..3 {
                assert_relative_eq!(g[(i, j)], fd[i], epsilon = 1e-8, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn twist_time_derivatives_match_fd() {
        let m = twist();
        let y = Vector3::new(0.7, 0.6, -0.3);
        let t = 0.25;
        let h = 1e-5;
        let fd_x = (m.x(t + h, &y) - m.x(t - h, &y)) / (2.0 * h);
        let xd = m.xdot(t, &y);
        assert!((xd - fd_x).norm() < 1e-9);
        let fd_g = (m.grad(t + h, &y) - m.grad(t - h, &y)) / (2.0 * h);
        let gd = m.grad_xdot(t, &y);
        assert!((gd - fd_g).norm() < 1e-8);
    }

    #[test]
    fn twist_is_volume_preserving() {
        let m = twist();
        for y in [
            Vector3::new(1.0, 0.2, -0.3),
            Vector3::new(0.6, 0.6, 0.6),
            Vector3::new(-1.2, 0.5, 0.9),
        ] {
            let det = m.grad(0.8, &y).determinant();
            assert_relative_eq!(det, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn twist_identity_near_boundaries() {
        let m = twist();
        let near_body = Vector3::new(0.3, 0.2, 0.1);
        let near_wall = Vector3::new(0.0, 0.0, 2.1);
        assert_eq!(m.x(1.0, &near_body), near_body);
        assert_eq!(m.x(1.0, &near_wall), near_wall);
    }

    #[test]
    fn quadratic_gradient_matches_fd() {
        let m = QuadraticMap {
            linear: Matrix3::new(0.02, 0.01, 0.0, -0.01, 0.03, 0.02, 0.0, 0.01, -0.02),
            quad: [
                Matrix3::new(0.04, 0.01, 0.0, 0.01, -0.02, 0.01, 0.0, 0.01, 0.03),
                Matrix3::new(-0.01, 0.02, 0.01, 0.02, 0.03, 0.0, 0.01, 0.0, -0.02),
                Matrix3::new(0.02, 0.0, -0.01, 0.0, 0.01, 0.02, -0.01, 0.02, 0.0),
            ],
        };
        let y = Vector3::new(0.4, -0.7, 0.9);
        let g = m.grad(0.0, &y);
        let h = 1e-6;
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = h;
            let fd = (m.x(0.0, &(y + e)) - m.x(0.0, &(y - e))) / (2.0 * h);
            for i in 0..3 {
                assert_relative_eq!(g[(i, j)], fd[i], epsilon = 1e-8);
            }
        }
        // Exact metric derivative against FD of g.
        let dg = m.exact_dg(&y);
        for l in 0..3 {
            let mut e = Vector3::zeros();
            e[l] = h;
            let gp = metric_from_grad(&m.grad(0.0, &(y + e))).unwrap().g;
            let gm = metric_from_grad(&m.grad(0.0, &(y - e))).unwrap().g;
            let fd = (gp - gm) / (2.0 * h);
            assert!((dg[l] - fd).norm() < 1e-7);
        }
    }

    fn rigid_setup() -> RigidFlowMap {
        let cutoff = build_cutoff(0.5, 2.0, Vector3::zeros(), 0.3, 0.25).unwrap();
        let traj = RigidTrajectory::integrate_prescribed(
            Vector3::zeros(),
            Matrix3::identity(),
            |t| Vector3::new(0.1 * (1.0 + t).recip(), 0.05, 0.0),
            |t| Vector3::new(0.0, 0.2, 0.6 * (0.5 * t).cos()),
            1.0,
            1e-3,
        )
        .unwrap();
        RigidFlowMap::new(cutoff, traj, 1e-3).unwrap()
    }

    #[test]
    fn flow_map_is_rigid_on_plateau() {
        // On the plateau the characteristics follow the rigid motion
        // exactly, so X(t, y) = q + Q (y - q0) in closed form.
        let map = rigid_setup();
        let t = 0.8;
        let state = map.trajectory.state_at(t);
        for y in [Vector3::new(0.55, 0.0, 0.0), Vector3::new(0.3, 0.3, 0.3)] {
            let x = map.x(t, &y);
            let closed = state.q + state.rot * y;
            assert!((x - closed).norm() < 1e-6, "plateau deviation {}", (x - closed).norm());
            let f = map.grad(t, &y);
            assert!((f - state.rot).norm() < 1e-6);
        }
    }

    #[test]
    fn flow_map_identity_near_wall() {
        let map = rigid_setup();
        let y = Vector3::new(0.0, 1.85, 0.0);
        assert_eq!(map.x(1.0, &y), y);
        assert_eq!(map.grad(1.0, &y), Matrix3::identity());
    }

    #[test]
    fn flow_map_preserves_volume() {
        let map = rigid_setup();
        for y in [
            Vector3::new(1.0, 0.3, -0.2),
            Vector3::new(0.0, -1.1, 0.6),
            Vector3::new(0.7, 0.7, 0.0),
        ] {
            let det = map.grad(1.0, &y).determinant();
            assert!((det - 1.0).abs() < 1e-8, "det drift {}", det - 1.0);
        }
    }

    #[test]
    fn flow_map_jacobian_matches_fd() {
        let map = rigid_setup();
        let y = Vector3::new(0.9, 0.4, -0.5);
        let t = 0.6;
        let f = map.grad(t, &y);
        let h = 1e-5;
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = h;
            let fd = (map.x(t, &(y + e)) - map.x(t, &(y - e))) / (2.0 * h);
            for i in 0..3 {
                assert_relative_eq!(f[(i, j)], fd[i], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn round_trip_inversion() {
        let map = rigid_setup();
        let t = 0.7;
        for y in [
            Vector3::new(0.8, -0.4, 0.3),
            Vector3::new(0.0, 1.2, 0.5),
            Vector3::new(-0.6, 0.0, -0.9),
        ] {
            let x = map.x(t, &y);
            let back = invert_transform(&map, t, &x, &x).unwrap();
            assert!((back - y).norm() < 1e-9, "round trip error {}", (back - y).norm());
        }
    }

    #[test]
    fn plateau_inverse_closed_form() {
        // Inverting the rigid part gives Y = q0 + Q^T (x - q).
        let map = rigid_setup();
        let t = 0.9;
        let state = map.trajectory.state_at(t);
        let y_true = Vector3::new(0.4, 0.2, -0.3);
        let x = map.x(t, &y_true);
        let closed = state.rot.transpose() * (x - state.q);
        let y = invert_transform(&map, t, &x, &Vector3::zeros()).unwrap();
        assert!((y - closed).norm() < 1e-6);
    }

    #[test]
    fn newton_reports_divergence() {
        // A target outside the reachable set of a degenerate map.
        struct Collapse;
        impl SpaceTimeMap for Collapse {
            fn x(&self, _t: f64, y: &Vector3<f64>) -> Vector3<f64> {
                Vector3::new(y[0].tanh(), y[1].tanh(), y[2].tanh())
            }
            fn grad(&self, _t: f64, y: &Vector3<f64>) -> Matrix3<f64> {
                Matrix3::from_diagonal(&Vector3::new(
                    y[0].cosh().powi(-2),
                    y[1].cosh().powi(-2),
                    y[2].cosh().powi(-2),
                ))
            }
        }
        let bad = Vector3::new(2.0, 0.0, 0.0);
        assert!(invert_transform(&Collapse, 0.0, &bad, &Vector3::zeros()).is_err());
    }

    #[test]
    fn default_time_derivative_fallback() {
        // Trait-default FD derivatives agree with the analytic ones.
        struct NoAnalytic(TwistMap);
        impl SpaceTimeMap for NoAnalytic {
            fn x(&self, t: f64, y: &Vector3<f64>) -> Vector3<f64> {
                self.0.x(t, y)
            }
            fn grad(&self, t: f64, y: &Vector3<f64>) -> Matrix3<f64> {
                self.0.grad(t, y)
            }
        }
        let m = NoAnalytic(twist());
        let y = Vector3::new(0.8, 0.3, -0.4);
        assert!((m.xdot(0.5, &y) - m.0.xdot(0.5, &y)).norm() < 1e-8);
        assert!((m.grad_xdot(0.5, &y) - m.0.grad_xdot(0.5, &y)).norm() < 1e-7);
    }
}
