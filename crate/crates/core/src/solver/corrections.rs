//! Right-hand-side contributions of the moving geometry.
//!
//! The factored system is flat; everything the transform adds — the
//! metric weight on the time term, the non-flat part of the viscous
//! form, transport, convection, and the rigid source terms — is
//! evaluated pointwise at quadrature points and assembled into a weak
//! load here. All terms need only values and first derivatives of the
//! discrete fields.

use crate::fem::{assemble_gradient_rhs, assemble_vector_rhs, CoupledSpace, QuadCache};
use crate::operators::{op_m, op_n, weak_gl_point, VelocityJet};
use crate::transform::TransformData;
use nalgebra::{Matrix3, Vector3};

/// Velocity value and gradient at every quadrature point, in the flat
/// index order of the quadrature cache.
pub type FieldEval = Vec<(Vector3<f64>, Matrix3<f64>)>;

/// Everything the correction assembly needs for one implicit step.
pub struct CorrectionInput<'a> {
    /// Transform data at the coefficient time of the step.
    pub frame: &'a TransformData,
    /// Field iterate at the coefficient time (theta-average for
    /// Crank-Nicolson, the new level for backward Euler).
    pub u_c: &'a [(Vector3<f64>, Matrix3<f64>)],
    /// Increment over the step, `u_new - u_prev`, values only.
    pub du: &'a [Vector3<f64>],
    /// Linearization field at the coefficient time.
    pub u_tilde: &'a [(Vector3<f64>, Matrix3<f64>)],
    /// Rigid iterate at the coefficient time.
    pub a_c: Vector3<f64>,
    pub omega_c: Vector3<f64>,
    /// Linearization angular velocity (reference frame).
    pub omega_tilde: Vector3<f64>,
    pub dt: f64,
}

/// Assembles the geometry corrections as a weak load over the
/// velocity/rigid rows, with the sign convention that the load is
/// *added* to the right-hand side of the flat step.
pub fn correction_rhs(
    space: &CoupledSpace,
    cache: &QuadCache,
    inertia: &Matrix3<f64>,
    inp: &CorrectionInput,
) -> Vec<f64> {
    let n = cache.n_points;
    assert_eq!(inp.frame.points.len(), n, "frame size mismatch");
    assert_eq!(inp.u_c.len(), n);
    assert_eq!(inp.du.len(), n);
    assert_eq!(inp.u_tilde.len(), n);

    let mut vec_load = vec![Vector3::zeros(); n];
    let mut flux_load = vec![Matrix3::zeros(); n];
    for i in 0..n {
        let d = &inp.frame.points[i];
        let (u, grad) = inp.u_c[i];
        let jet = VelocityJet { u, grad, hess: [Matrix3::zeros(); 3] };

        // Metric weight on the time derivative.
        let mass = (d.g - Matrix3::identity()) * (inp.du[i] / inp.dt);

        // Transformed viscous form minus its flat part.
        let (wvec, wflux) = weak_gl_point(d, &u, &grad);
        let sym = grad + grad.transpose();

        // Transport and convection, metric weighted.
        let mn = d.g * (op_m(d, &jet) + op_n(d, &inp.u_tilde[i].0, &jet));

        vec_load[i] = -(mass + mn + wvec);
        flux_load[i] = -(wflux - sym);
    }

    let mut rhs = assemble_vector_rhs(space, cache, |i| vec_load[i]);
    let grad_part = assemble_gradient_rhs(space, cache, |i| flux_load[i]);
    for (r, v) in rhs.iter_mut().zip(&grad_part) {
        *r += v;
    }

    // Rigid body sources.
    let g = -inp.omega_tilde.cross(&inp.a_c);
    let h = -inp.omega_tilde.cross(&(inertia * inp.omega_c));
    let r = space.rigid_offset();
    for k in 0..3 {
        rhs[r + k] += g[k];
        rhs[r + 3 + k] += h[k];
    }
    rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{eval_velocity, tet_rule, QuadCache};
    use crate::mesh::build_shell_mesh;
    use crate::rigid_motion::{BodyGeometry, RigidTrajectory};
    use crate::transform::{build_cutoff, FlowParams, FlowTransformBuilder};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn setup() -> (CoupledSpace, QuadCache) {
        let space = CoupledSpace::new(build_shell_mesh(0, 0.5, 2.0, Vector3::zeros()).unwrap());
        let cache = QuadCache::build(&space, &tet_rule(5));
        (space, cache)
    }

    fn random_z(space: &CoupledSpace, seed: u64) -> Vec<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..space.n_total()).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn inertia() -> Matrix3<f64> {
        BodyGeometry::new(0.5, Vector3::zeros()).unwrap().ball_inertia()
    }

    #[test]
    fn flat_frame_without_convection_gives_zero() {
        let (space, cache) = setup();
        let frame = TransformData::identity(&cache.positions());
        let z = random_z(&space, 1);
        let evals = eval_velocity(&space, &cache, &z);
        let du: Vec<Vector3<f64>> = evals.iter().map(|(u, _)| *u).collect();
        let zero = vec![(Vector3::zeros(), Matrix3::zeros()); cache.n_points];
        let rhs = correction_rhs(
            &space,
            &cache,
            &inertia(),
            &CorrectionInput {
                frame: &frame,
                u_c: &evals,
                du: &du,
                u_tilde: &zero,
                a_c: Vector3::new(0.3, 0.0, 0.1),
                omega_c: Vector3::new(0.0, 0.2, 0.0),
                omega_tilde: Vector3::zeros(),
                dt: 0.01,
            },
        );
        let max = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-12, "flat corrections should vanish, max {max}");
    }

    #[test]
    fn flat_frame_reduces_to_plain_convection() {
        let (space, cache) = setup();
        let frame = TransformData::identity(&cache.positions());
        let z = random_z(&space, 2);
        let zt = random_z(&space, 3);
        let evals = eval_velocity(&space, &cache, &z);
        let tilde = eval_velocity(&space, &cache, &zt);
        let du = vec![Vector3::zeros(); cache.n_points];
        let rhs = correction_rhs(
            &space,
            &cache,
            &inertia(),
            &CorrectionInput {
                frame: &frame,
                u_c: &evals,
                du: &du,
                u_tilde: &tilde,
                a_c: Vector3::zeros(),
                omega_c: Vector3::zeros(),
                omega_tilde: Vector3::zeros(),
                dt: 0.01,
            },
        );
        // Hand-assembled flat convection load.
        let expect = assemble_vector_rhs(&space, &cache, |i| {
            -(evals[i].1 * tilde[i].0)
        });
        for (a, b) in rhs.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10, "convection mismatch {} vs {}", a, b);
        }
    }

    #[test]
    fn rigid_sources_land_on_rigid_rows() {
        let (space, cache) = setup();
        let frame = TransformData::identity(&cache.positions());
        let zero_eval = vec![(Vector3::zeros(), Matrix3::zeros()); cache.n_points];
        let du = vec![Vector3::zeros(); cache.n_points];
        let a = Vector3::new(0.4, -0.1, 0.2);
        let om = Vector3::new(0.1, 0.3, -0.2);
        let omt = Vector3::new(0.0, 0.0, 0.7);
        let j = inertia();
        let rhs = correction_rhs(
            &space,
            &cache,
            &j,
            &CorrectionInput {
                frame: &frame,
                u_c: &zero_eval,
                du: &du,
                u_tilde: &zero_eval,
                a_c: a,
                omega_c: om,
                omega_tilde: omt,
                dt: 0.01,
            },
        );
        let r = space.rigid_offset();
        let g = -omt.cross(&a);
        let h = -omt.cross(&(j * om));
        for k in 0..3 {
            assert!((rhs[r + k] - g[k]).abs() < 1e-14);
            assert!((rhs[r + 3 + k] - h[k]).abs() < 1e-14);
        }
        assert!(rhs[..r].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn correction_magnitude_scales_linearly_with_spin() {
        // For small body spin the transform deviates from identity at
        // first order, so the assembled corrections should double when
        // the spin doubles.
        let (space, cache) = setup();
        let z = random_z(&space, 4);
        let evals = eval_velocity(&space, &cache, &z);
        let du = vec![Vector3::zeros(); cache.n_points];
        let zero = vec![(Vector3::zeros(), Matrix3::zeros()); cache.n_points];
        let cutoff = build_cutoff(0.5, 2.0, Vector3::zeros(), 0.3, 0.25).unwrap();

        let norm_at = |amp: f64| -> f64 {
            let traj = RigidTrajectory::integrate_prescribed(
                Vector3::zeros(),
                Matrix3::identity(),
                |_| Vector3::zeros(),
                move |_| Vector3::new(0.0, 0.0, amp),
                0.1,
                1e-3,
            )
            .unwrap();
            let mut builder = FlowTransformBuilder::new(
                &cache.positions(),
                cutoff,
                traj,
                2.0,
                FlowParams::default(),
            )
            .unwrap();
            builder.advance(0.1).unwrap();
            let frame = builder.snapshot().unwrap();
            let rhs = correction_rhs(
                &space,
                &cache,
                &inertia(),
                &CorrectionInput {
                    frame: &frame,
                    u_c: &evals,
                    du: &du,
                    u_tilde: &zero,
                    a_c: Vector3::zeros(),
                    omega_c: Vector3::zeros(),
                    omega_tilde: Vector3::zeros(),
                    dt: 0.01,
                },
            );
            rhs.iter().map(|v| v * v).sum::<f64>().sqrt()
        };

        let n1 = norm_at(0.02);
        let n2 = norm_at(0.04);
        let ratio = n2 / n1;
        assert!(
            (ratio - 2.0).abs() < 0.15,
            "correction magnitude not linear in spin: ratio {ratio}"
        );
    }
}
