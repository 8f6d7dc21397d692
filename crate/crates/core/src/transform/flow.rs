//! Incremental integration of the flow transform along characteristics.
//!
//! Every quadrature point carries a cluster of 13 labels: the point
//! itself plus offsets at distance h and 2h along each reference axis.
//! Each label transports position and Jacobian through the flow of the
//! transport field; the offsets feed the fourth-order stencil for the
//! metric derivatives.

use super::{CutoffField, PointData, PotentialField, TransformData};
use crate::rigid_motion::RigidTrajectory;
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

/// Right-hand side of the characteristic system: position moves with the
/// transport field, the Jacobian with its gradient.
fn flow_rhs(
    traj: &RigidTrajectory,
    cutoff: &CutoffField,
    t: f64,
    x: &Vector3<f64>,
    f: &Matrix3<f64>,
) -> (Vector3<f64>, Matrix3<f64>) {
    let field = PotentialField::transport(&traj.state_at(t), cutoff);
    let (w, gw) = field.value_and_grad(x);
    (w, gw * f)
}

/// One classical Runge-Kutta step for (x, grad X).
pub(crate) fn rk4_flow_step(
    traj: &RigidTrajectory,
    cutoff: &CutoffField,
    t: f64,
    dt: f64,
    x: &mut Vector3<f64>,
    f: &mut Matrix3<f64>,
) {
    let (k1x, k1f) = flow_rhs(traj, cutoff, t, x, f);
    let (k2x, k2f) = flow_rhs(
        traj,
        cutoff,
        t + 0.5 * dt,
        &(*x + 0.5 * dt * k1x),
        &(*f + 0.5 * dt * k1f),
    );
    let (k3x, k3f) = flow_rhs(
        traj,
        cutoff,
        t + 0.5 * dt,
        &(*x + 0.5 * dt * k2x),
        &(*f + 0.5 * dt * k2f),
    );
    let (k4x, k4f) = flow_rhs(traj, cutoff, t + dt, &(*x + dt * k3x), &(*f + dt * k3f));
    *x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    *f += dt / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
}

/// Stencil offsets in units of h along one axis, for indices 0..4.
pub(crate) const OFFSETS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];

/// Transported state of one reference point with its stencil labels.
///
/// `points[0]` is the center; `points[1 + 4 d + k]` is the label started
/// at `y + OFFSETS[k] * h * e_d`.
#[derive(Debug, Clone)]
pub struct LabelCluster {
    pub label: usize,
    /// Reference position of the center label.
    pub y: Vector3<f64>,
    pub h: f64,
    /// (position, Jacobian) per label.
    pub points: [(Vector3<f64>, Matrix3<f64>); 13],
}

impl LabelCluster {
    pub fn new(label: usize, y: Vector3<f64>, h: f64) -> Self {
        let mut points = [(y, Matrix3::identity()); 13];
        for d in 0..3 {
            for (k, off) in OFFSETS.iter().enumerate() {
                let mut p = y;
                p[d] += off * h;
                points[1 + 4 * d + k].0 = p;
            }
        }
        LabelCluster { label, y, h, points }
    }

    /// Advances all labels from `t` by `dt` in `substeps` equal steps.
    pub fn advance(
        &mut self,
        traj: &RigidTrajectory,
        cutoff: &CutoffField,
        t: f64,
        dt: f64,
        substeps: usize,
    ) {
        let n = substeps.max(1);
        let sub = dt / n as f64;
        for (x, f) in self.points.iter_mut() {
            for s in 0..n {
                rk4_flow_step(traj, cutoff, t + s as f64 * sub, sub, x, f);
            }
        }
    }

    pub fn center(&self) -> (Vector3<f64>, Matrix3<f64>) {
        self.points[0]
    }

    /// Stencil samples for axis `d`: states at -2h, -h, +h, +2h.
    pub fn axis(&self, d: usize) -> [&(Vector3<f64>, Matrix3<f64>); 4] {
        [
            &self.points[1 + 4 * d],
            &self.points[2 + 4 * d],
            &self.points[3 + 4 * d],
            &self.points[4 + 4 * d],
        ]
    }
}

/// Integration parameters of the incremental transform.
#[derive(Debug, Clone, Copy)]
pub struct FlowParams {
    /// Spatial stencil spacing for metric derivatives.
    pub stencil_h: f64,
    /// Runge-Kutta substeps per advance call.
    pub ode_substeps: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { stencil_h: 1e-3, ode_substeps: 4 }
    }
}

/// Keeps the transform state of a fixed point set and advances it in
/// time together with the rigid trajectory.
#[derive(Debug, Clone)]
pub struct FlowTransformBuilder {
    pub cutoff: CutoffField,
    pub trajectory: RigidTrajectory,
    pub params: FlowParams,
    /// Current time of all clusters.
    pub t: f64,
    /// Drift budget: once the body center moves farther than this from
    /// its initial position, the cutoff zero region no longer clears the
    /// wall and the transform is invalid.
    pub drift_budget: f64,
    clusters: Vec<LabelCluster>,
}

impl FlowTransformBuilder {
    pub fn new(
        points: &[Vector3<f64>],
        cutoff: CutoffField,
        trajectory: RigidTrajectory,
        r_out: f64,
        params: FlowParams,
    ) -> Result<Self> {
        if !(params.stencil_h > 0.0) {
            return Err(Error::invalid("stencil spacing must be positive"));
        }
        let drift_budget = r_out - cutoff.r_zero;
        if drift_budget <= 0.0 {
            return Err(Error::invalid("cutoff zero radius must be inside the wall"));
        }
        let clusters = points
            .iter()
            .enumerate()
            .map(|(i, y)| LabelCluster::new(i, *y, params.stencil_h))
            .collect();
        Ok(FlowTransformBuilder {
            cutoff,
            trajectory,
            params,
            t: 0.0,
            drift_budget,
            clusters,
        })
    }

    /// Body drift from its initial position at the current time.
    pub fn drift(&self) -> f64 {
        (self.trajectory.state_at(self.t).q - self.cutoff.q0).norm()
    }

    /// Advances all clusters by `dt`. Fails if the body has drifted past
    /// the cutoff budget; the caller maps this to the gap abort path.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::invalid("advance requires dt > 0"));
        }
        let t = self.t;
        let traj = &self.trajectory;
        let cutoff = &self.cutoff;
        let substeps = self.params.ode_substeps;
        self.clusters
            .par_iter_mut()
            .for_each(|c| c.advance(traj, cutoff, t, dt, substeps));
        self.t += dt;
        let drift = self.drift();
        if drift > self.drift_budget {
            return Err(Error::GapViolation(format!(
                "body drift {drift:.4} exceeds cutoff budget {:.4}",
                self.drift_budget
            )));
        }
        Ok(())
    }

    /// Replaces the trajectory driving the flow; clusters and time are
    /// reset to t = 0 so the transform is re-integrated from scratch.
    pub fn reset_with_trajectory(&mut self, trajectory: RigidTrajectory) {
        self.trajectory = trajectory;
        self.t = 0.0;
        for c in self.clusters.iter_mut() {
            *c = LabelCluster::new(c.label, c.y, c.h);
        }
    }

    pub fn clusters(&self) -> &[LabelCluster] {
        &self.clusters
    }

    /// Metric data at the current time for all points.
    pub fn snapshot(&self) -> Result<TransformData> {
        let field = PotentialField::transport(&self.trajectory.state_at(self.t), &self.cutoff);
        let points = self
            .clusters
            .par_iter()
            .map(|c| PointData::from_cluster(c, &field))
            .collect::<Result<Vec<_>>>()?;
        Ok(TransformData { t: self.t, points })
    }
}
