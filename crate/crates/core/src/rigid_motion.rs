//! Rigid-body kinematics: rotations on SO(3), the body isometry, the
//! Eulerian rigid velocity field and inertia tensors.

use crate::quad1d;
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};

/// Kinematic state of the body at one time instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidState {
    /// Time [s].
    pub t: f64,
    /// Center of mass [m].
    pub q: Vector3<f64>,
    /// Rotation matrix.
    pub rot: Matrix3<f64>,
    /// Translational velocity [m/s].
    pub a: Vector3<f64>,
    /// Angular velocity [rad/s].
    pub omega: Vector3<f64>,
}

impl RigidState {
    pub fn resting(q: Vector3<f64>) -> Self {
        RigidState {
            t: 0.0,
            q,
            rot: Matrix3::identity(),
            a: Vector3::zeros(),
            omega: Vector3::zeros(),
        }
    }

    /// Frobenius distance of `rot' rot` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        (self.rot.transpose() * self.rot - Matrix3::identity()).norm()
    }
}

/// Ball-shaped body with uniform unit density.
#[derive(Debug, Clone, Copy)]
pub struct BodyGeometry {
    /// Ball radius [m].
    pub radius: f64,
    /// Center at t = 0 [m].
    pub center0: Vector3<f64>,
}

impl BodyGeometry {
    pub fn new(radius: f64, center0: Vector3<f64>) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(BodyGeometry { radius, center0 })
    }

    /// Mass with unit density.
    pub fn mass(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }

    /// Closed-form inertia of the solid ball: (8 pi R^5 / 15) I.
    pub fn ball_inertia(&self) -> Matrix3<f64> {
        Matrix3::identity() * (8.0 * std::f64::consts::PI / 15.0 * self.radius.powi(5))
    }
}

/// Matrix P with P x = omega x x.
pub fn skew(omega: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -omega.z, omega.y, //
        omega.z, 0.0, -omega.x, //
        -omega.y, omega.x, 0.0,
    )
}

/// Rotation by the axis-angle vector `phi` (Rodrigues closed form).
pub fn rodrigues(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    if theta < 1e-300 {
        return Matrix3::identity();
    }
    let k = skew(&(phi / theta));
    Matrix3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
}

/// Integrates dQ/dt = skew(omega(t)) Q on [0, t_end] with per-step exact
/// exponentials, the angular velocity frozen at the step midpoint.
///
/// Every returned matrix is orthogonal to rounding.
pub fn integrate_rotation(
    q0: &Matrix3<f64>,
    omega: impl Fn(f64) -> Vector3<f64>,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, Matrix3<f64>)>> {
    if (q0.transpose() * q0 - Matrix3::identity()).norm() > 1e-10 {
        return Err(Error::invalid("initial rotation matrix is not orthogonal"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("rotation integration requires dt > 0"));
    }
    let n = (t_end / dt).round().max(1.0) as usize;
    let dt = t_end / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    let mut q = *q0;
    out.push((0.0, q));
    for step in 0..n {
        let tm = (step as f64 + 0.5) * dt;
        q = rodrigues(&(omega(tm) * dt)) * q;
        out.push(((step + 1) as f64 * dt, q));
    }
    Ok(out)
}

/// Body isometry B(t, y) = q(t) + Q(t) (y - q0).
pub fn body_map(y: &Vector3<f64>, state: &RigidState, q0: &Vector3<f64>) -> Vector3<f64> {
    state.q + state.rot * (y - q0)
}

/// Eulerian rigid velocity a(t) + omega(t) x (x - q(t)).
pub fn rigid_velocity(x: &Vector3<f64>, state: &RigidState) -> Vector3<f64> {
    state.a + state.omega.cross(&(x - state.q))
}

/// Inertia tensor of the body at time t by spherical quadrature,
/// J = int_{S(t)} (|x-q|^2 I - (x-q) (x-q)') dx.
///
/// `resolution` is the number of Gauss points per radial/polar direction.
pub fn inertia_tensor(
    geometry: &BodyGeometry,
    state: &RigidState,
    resolution: usize,
) -> Result<Matrix3<f64>> {
    if !(geometry.radius > 0.0) {
        return Err(Error::invalid("degenerate body geometry"));
    }
    let n = resolution.max(2);
    let (gr, wr) = quad1d::gauss_legendre(n);
    let (r_nodes, r_weights) = quad1d::scaled(&gr, &wr, 0.0, geometry.radius);
    // cos(theta) in [-1, 1]; phi by trapezoid (periodic).
    let (c_nodes, c_weights) = quad1d::gauss_legendre(n);
    let n_phi = 2 * n;
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;

    let mut j = Matrix3::zeros();
    for (r, wr) in r_nodes.iter().zip(&r_weights) {
        for (c, wc) in c_nodes.iter().zip(&c_weights) {
            let s = (1.0 - c * c).sqrt();
            for ip in 0..n_phi {
                let phi = ip as f64 * dphi;
                let rel = Vector3::new(r * s * phi.cos(), r * s * phi.sin(), r * c);
                // Evaluated at the physical point x = q + rel.
                let x = state.q + rel;
                let d = x - state.q;
                let w = wr * wc * dphi * r * r;
                j += (Matrix3::identity() * d.norm_squared() - d * d.transpose()) * w;
            }
        }
    }
    Ok(j)
}

/// Reference-frame inertia Q' J Q.
pub fn transformed_inertia(q: &Matrix3<f64>, j: &Matrix3<f64>) -> Matrix3<f64> {
    q.transpose() * j * q
}

/// Uniformly sampled rigid trajectory.
#[derive(Debug, Clone)]
pub struct RigidTrajectory {
    pub states: Vec<RigidState>,
    pub dt: f64,
}

impl RigidTrajectory {
    /// Integrates the body motion for prescribed Eulerian velocities
    /// a(t), omega(t). Positions by midpoint rule, rotations by per-step
    /// Rodrigues exponentials.
    pub fn integrate_prescribed(
        q0: Vector3<f64>,
        rot0: Matrix3<f64>,
        a: impl Fn(f64) -> Vector3<f64>,
        omega: impl Fn(f64) -> Vector3<f64>,
        t_end: f64,
        dt: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && t_end >= 0.0) {
            return Err(Error::invalid("trajectory integration requires dt > 0"));
        }
        let n = (t_end / dt).round().max(1.0) as usize;
        let dt = if t_end > 0.0 { t_end / n as f64 } else { dt };
        let mut states = Vec::with_capacity(n + 1);
        let mut q = q0;
        let mut rot = rot0;
        states.push(RigidState { t: 0.0, q, rot, a: a(0.0), omega: omega(0.0) });
        for step in 0..n {
            let tm = (step as f64 + 0.5) * dt;
            q += a(tm) * dt;
            rot = rodrigues(&(omega(tm) * dt)) * rot;
            let t1 = (step + 1) as f64 * dt;
            states.push(RigidState { t: t1, q, rot, a: a(t1), omega: omega(t1) });
        }
        Ok(RigidTrajectory { states, dt })
    }

    /// Reconstructs the physical motion from reference-frame samples
    /// (A_n, Omega_n) at uniform dt, using a = Q A and omega = Q Omega.
    pub fn from_reference_samples(
        q0: Vector3<f64>,
        rot0: Matrix3<f64>,
        dt: f64,
        a_ref: &[Vector3<f64>],
        omega_ref: &[Vector3<f64>],
    ) -> Result<Self> {
        if a_ref.len() != omega_ref.len() || a_ref.is_empty() {
            return Err(Error::invalid("mismatched reference velocity samples"));
        }
        let n = a_ref.len() - 1;
        let mut states = Vec::with_capacity(n + 1);
        let mut q = q0;
        let mut rot = rot0;
        states.push(RigidState {
            t: 0.0,
            q,
            rot,
            a: rot0 * a_ref[0],
            omega: rot0 * omega_ref[0],
        });
        for step in 0..n {
            let omega_n = rot * omega_ref[step];
            let rot_half = rodrigues(&(omega_n * (0.5 * dt))) * rot;
            let omega_mid = rot_half * ((omega_ref[step] + omega_ref[step + 1]) * 0.5);
            let a_mid = rot_half * ((a_ref[step] + a_ref[step + 1]) * 0.5);
            q += a_mid * dt;
            rot = rodrigues(&(omega_mid * dt)) * rot;
            let t1 = (step + 1) as f64 * dt;
            states.push(RigidState {
                t: t1,
                q,
                rot,
                a: rot * a_ref[step + 1],
                omega: rot * omega_ref[step + 1],
            });
        }
        Ok(RigidTrajectory { states, dt })
    }

    pub fn t_end(&self) -> f64 {
        self.states.last().map(|s| s.t).unwrap_or(0.0)
    }

    /// State at arbitrary time by interpolation: linear for q, a, omega;
    /// an exponential step from the nearest lower sample for the rotation.
    pub fn state_at(&self, t: f64) -> RigidState {
        let n = self.states.len();
        if n == 1 || t <= self.states[0].t {
            return self.states[0];
        }
        let last = self.states[n - 1];
        if t >= last.t {
            return last;
        }
        let idx = ((t - self.states[0].t) / self.dt).floor() as usize;
        let idx = idx.min(n - 2);
        let s0 = &self.states[idx];
        let s1 = &self.states[idx + 1];
        let theta = (t - s0.t) / (s1.t - s0.t);
        let omega = s0.omega.lerp(&s1.omega, theta);
        let omega_mid = s0.omega.lerp(&s1.omega, 0.5 * theta);
        RigidState {
            t,
            q: s0.q.lerp(&s1.q, theta),
            rot: rodrigues(&(omega_mid * (t - s0.t))) * s0.rot,
            a: s0.a.lerp(&s1.a, theta),
            omega,
        }
    }
}
