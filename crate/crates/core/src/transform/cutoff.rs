//! Radial quintic cutoff separating the rigid plateau from the wall.

use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};

/// Scalar cutoff `zeta` with `zeta = 1` on a neighborhood of the body and
/// `zeta = 0` near the outer wall, with a quintic C^2 transition.
///
/// The profile is radial about the current body center, so the plateau
/// follows the body; the zero region near the wall is preserved as long
/// as the body drift stays within the monitored budget.
#[derive(Debug, Clone, Copy)]
pub struct CutoffField {
    /// Body center at t = 0; default evaluation center.
    pub q0: Vector3<f64>,
    /// zeta = 1 for |x - q| <= r_plateau.
    pub r_plateau: f64,
    /// zeta = 0 for |x - q| >= r_zero.
    pub r_zero: f64,
}

/// Builds the cutoff for a shell `r_in < |x - center| < r_out`.
///
/// The plateau extends `delta_in` beyond the body and the zero region
/// `delta_out` inside the wall; the two transition radii must not overlap.
pub fn build_cutoff(
    r_in: f64,
    r_out: f64,
    center: Vector3<f64>,
    delta_in: f64,
    delta_out: f64,
) -> Result<CutoffField> {
    if !(delta_in > 0.0 && delta_out > 0.0) {
        return Err(Error::invalid("cutoff transition margins must be positive"));
    }
    let r_plateau = r_in + delta_in;
    let r_zero = r_out - delta_out;
    if r_plateau >= r_zero {
        return Err(Error::invalid(format!(
            "cutoff transition shells overlap: plateau {r_plateau} >= zero radius {r_zero}"
        )));
    }
    Ok(CutoffField { q0: center, r_plateau, r_zero })
}

impl CutoffField {
    /// Quintic smoothstep profile in the radius, 1 below the plateau and
    /// 0 beyond `r_zero`; first and second radial derivatives vanish at
    /// both junctions.
    fn profile(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.r_plateau {
            return (1.0, 0.0, 0.0);
        }
        if r >= self.r_zero {
            return (0.0, 0.0, 0.0);
        }
        let width = self.r_zero - self.r_plateau;
        let s = (r - self.r_plateau) / width;
        let p = 6.0 * s.powi(5) - 15.0 * s.powi(4) + 10.0 * s.powi(3);
        let dp = (30.0 * s.powi(4) - 60.0 * s.powi(3) + 30.0 * s * s) / width;
        let d2p = (120.0 * s.powi(3) - 180.0 * s * s + 60.0 * s) / (width * width);
        (1.0 - p, -dp, -d2p)
    }

    /// Value at `x` with the plateau centered at `center`.
    pub fn value_at(&self, x: &Vector3<f64>, center: &Vector3<f64>) -> f64 {
        self.profile((x - center).norm()).0
    }

    /// Value, gradient and Hessian at `x` for plateau center `center`.
    pub fn jet_at(&self, x: &Vector3<f64>, center: &Vector3<f64>) -> (f64, Vector3<f64>, Matrix3<f64>) {
        let rel = x - center;
        let r = rel.norm();
        if r < 1e-14 {
            return (1.0, Vector3::zeros(), Matrix3::zeros());
        }
        let (v, dv, d2v) = self.profile(r);
        let dir = rel / r;
        let grad = dir * dv;
        let hess = dir * dir.transpose() * d2v
            + (Matrix3::identity() - dir * dir.transpose()) * (dv / r);
        (v, grad, hess)
    }

    pub fn value(&self, x: &Vector3<f64>) -> f64 {
        self.value_at(x, &self.q0)
    }
}
