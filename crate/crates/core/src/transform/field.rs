//! The divergence-free transport field `w = curl(zeta psi)` with the
//! rigid vector potential `psi = a x (x-q)/2 - |x-q|^2 omega / 2`.
//!
//! On the cutoff plateau `w` equals the rigid velocity `a + omega x (x-q)`
//! and it vanishes where the cutoff does; its divergence is identically
//! zero because it is a curl.

use super::CutoffField;
use crate::rigid_motion::RigidState;
use nalgebra::{Matrix3, Vector3};

/// Transport field for one time instant.
#[derive(Debug, Clone, Copy)]
pub struct PotentialField {
    pub cutoff: CutoffField,
    /// Translational velocity entering the potential.
    pub a: Vector3<f64>,
    /// Angular velocity entering the potential.
    pub omega: Vector3<f64>,
    /// Point the potential is centered at (body center).
    pub q: Vector3<f64>,
}

impl PotentialField {
    /// Field realizing the motion of `state`, with the cutoff plateau
    /// following the body center.
    pub fn transport(state: &RigidState, cutoff: &CutoffField) -> Self {
        PotentialField { cutoff: *cutoff, a: state.a, omega: state.omega, q: state.q }
    }

    /// Static body-frame extension of the rigid velocity `(a, omega)`;
    /// used as `b_{A,Omega}` on the reference domain.
    pub fn extension(a: Vector3<f64>, omega: Vector3<f64>, cutoff: &CutoffField) -> Self {
        PotentialField { cutoff: *cutoff, a, omega, q: cutoff.q0 }
    }

    /// Vector potential psi(x).
    pub fn potential(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let rel = x - self.q;
        0.5 * self.a.cross(&rel) - 0.5 * rel.norm_squared() * self.omega
    }

    /// w(x) = curl(zeta psi) = grad(zeta) x psi + zeta (a + omega x (x-q)).
    pub fn value(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let (z, gz, _) = self.cutoff.jet_at(x, &self.q);
        let rel = x - self.q;
        gz.cross(&self.potential(x)) + z * (self.a + self.omega.cross(&rel))
    }

    /// Value and spatial gradient; `grad[(i, l)] = d w_i / d x_l`.
    pub fn value_and_grad(&self, x: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let (z, gz, hz) = self.cutoff.jet_at(x, &self.q);
        let rel = x - self.q;
        let psi = self.potential(x);
        let rigid = self.a + self.omega.cross(&rel);
        let w = gz.cross(&psi) + z * rigid;

        let mut grad = Matrix3::zeros();
        for l in 0..3 {
            let e_l = Vector3::ith(l, 1.0);
            // d psi / d x_l
            let dpsi = 0.5 * self.a.cross(&e_l) - rel[l] * self.omega;
            let h_l = hz.column(l).into_owned();
            let col = h_l.cross(&psi) + gz.cross(&dpsi) + gz[l] * rigid + z * self.omega.cross(&e_l);
            grad.set_column(l, &col);
        }
        (w, grad)
    }
}
