//! Pointwise transformed operators on the reference domain.
//!
//! The transformed momentum equation reads
//! `dU/dt - L U + M U + N U + G P = 0` with the transformed Laplacian
//! `L`, the transport correction `M` collecting the time dependence of
//! the change of variables, the convection `N` along the lagged field,
//! and the transformed pressure gradient `G`. Multiplying by the
//! covariant metric turns `G P` back into the flat gradient, which is
//! what the discrete saddle system exploits.
//!
//! Everything here is per quadrature point; assembly and time stepping
//! live elsewhere.

use crate::rigid_motion::skew;
use crate::transform::{PointData, TransformData, TransformSequence};
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};

/// Second-order jet of a velocity component field at one point;
/// `grad[(i, j)] = d U_i / d y_j`, `hess[i][(j, k)] = d2 U_i / dy_j dy_k`.
#[derive(Debug, Clone, Copy)]
pub struct VelocityJet {
    pub u: Vector3<f64>,
    pub grad: Matrix3<f64>,
    pub hess: [Matrix3<f64>; 3],
}

/// First-order jet of the pressure.
#[derive(Debug, Clone, Copy)]
pub struct PressureJet {
    pub p: f64,
    pub grad: Vector3<f64>,
}

/// Transformed Laplacian; needs the divergence coefficients, so it is
/// only available on analytic transform data.
pub fn op_l(d: &PointData, jet: &VelocityJet) -> Result<Vector3<f64>> {
    let div_g_inv = d
        .div_g_inv
        .ok_or_else(|| Error::invalid("strong Laplacian needs analytic transform data"))?;
    let div_g_gamma = d
        .div_g_gamma
        .ok_or_else(|| Error::invalid("strong Laplacian needs analytic transform data"))?;
    let mut out = Vector3::zeros();
    for i in 0..3 {
        let mut v = 0.0;
        // d_j (g^{jk} d_k U_i)
        for j in 0..3 {
            for k in 0..3 {
                v += d.g_inv[(j, k)] * jet.hess[i][(j, k)];
            }
        }
        for k in 0..3 {
            v += div_g_inv[k] * jet.grad[(i, k)];
        }
        // 2 g^{kl} Gamma^i_{jk} d_l U_j
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    v += 2.0 * d.g_inv[(k, l)] * d.gamma[i][(j, k)] * jet.grad[(j, l)];
                }
            }
        }
        // (d_k (g^{kl} Gamma^i_{jl}) + g^{kl} Gamma^m_{jl} Gamma^i_{km}) U_j
        for j in 0..3 {
            let mut c = div_g_gamma[(i, j)];
            for k in 0..3 {
                for l in 0..3 {
                    for m in 0..3 {
                        c += d.g_inv[(k, l)] * d.gamma[m][(j, l)] * d.gamma[i][(k, m)];
                    }
                }
            }
            v += c * jet.u[j];
        }
        out[i] = v;
    }
    Ok(out)
}

/// Transport correction from the time dependence of the transform:
/// `(M U)_i = Ydot_j d_j U_i + (Gamma^i_{jk} Ydot_k + dY_i/dx_k dXdot_k/dy_j) U_j`.
pub fn op_m(d: &PointData, jet: &VelocityJet) -> Vector3<f64> {
    let mut out = jet.grad * d.ydot;
    let jac_dot = d.grad_y * d.grad_xdot;
    for i in 0..3 {
        for j in 0..3 {
            let mut c = jac_dot[(i, j)];
            for k in 0..3 {
                c += d.gamma[i][(j, k)] * d.ydot[k];
            }
            out[i] += c * jet.u[j];
        }
    }
    out
}

/// Transformed convection along the lagged field `ut`:
/// the covariant derivative of U in direction ut.
pub fn op_n(d: &PointData, ut: &Vector3<f64>, jet: &VelocityJet) -> Vector3<f64> {
    let mut out = jet.grad * ut;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i] += d.gamma[i][(j, k)] * ut[j] * jet.u[k];
            }
        }
    }
    out
}

/// Transformed pressure gradient `g^{ij} d_j P`.
pub fn op_g(d: &PointData, pj: &PressureJet) -> Vector3<f64> {
    d.g_inv * pj.grad
}

/// Momentum defect against the flat operators:
/// `F = (L - lap) U - M U - N U - (G - grad) P`.
pub fn rhs_f(
    d: &PointData,
    jet: &VelocityJet,
    pj: &PressureJet,
    ut: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let lap = Vector3::new(
        jet.hess[0].trace(),
        jet.hess[1].trace(),
        jet.hess[2].trace(),
    );
    Ok(op_l(d, jet)? - lap - op_m(d, jet) - op_n(d, ut, jet) - (op_g(d, pj) - pj.grad))
}

/// Body translational source `G(A) = -Omega_t x A` with the lagged
/// reference angular velocity.
pub fn rhs_g(omega_lagged: &Vector3<f64>, a: &Vector3<f64>) -> Vector3<f64> {
    -omega_lagged.cross(a)
}

/// Body angular source `H(Omega) = -Omega_t x (J Omega)`.
pub fn rhs_h(
    omega_lagged: &Vector3<f64>,
    inertia: &Matrix3<f64>,
    omega: &Vector3<f64>,
) -> Vector3<f64> {
    -omega_lagged.cross(&(inertia * omega))
}

/// Weak integrand of the metric-weighted transformed Laplacian paired
/// with a test function: the return `(a, B)` contributes
/// `a . psi + B : grad psi` to `<G L U, psi>`, which by parts equals
/// `-int (G L U) . psi` plus the body surface traction.
///
/// Only first derivatives of the metric enter, which is the point of
/// using this form in the scheme.
pub fn weak_gl_point(d: &PointData, u: &Vector3<f64>, grad_u: &Matrix3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let g = &d.g;
    let gi = &d.g_inv;
    let gamma = &d.gamma;

    let sym = grad_u + grad_u.transpose();
    // 2 D U : D psi = (grad U + grad U^T) : grad psi.
    let mut flux = sym;

    // (g_ik g^{jl} - delta delta) dU_i/dy_j dpsi_k/dy_l.
    for k in 0..3 {
        for l in 0..3 {
            let mut v = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    v += g[(i, k)] * gi[(j, l)] * grad_u[(i, j)];
                }
            }
            flux[(k, l)] += v - grad_u[(k, l)];
        }
    }

    // (Gamma^m_{kl} g_im g^{jl} + Gamma^j_{ik}) dU_i/dy_j psi_k.
    let mut vec = Vector3::zeros();
    for k in 0..3 {
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let mut c = gamma[j][(i, k)];
                for l in 0..3 {
                    for m in 0..3 {
                        c += gamma[m][(k, l)] * g[(i, m)] * gi[(j, l)];
                    }
                }
                v += c * grad_u[(i, j)];
            }
        }
        vec[k] += v;
    }

    // (Gamma^m_{ij} g_im g^{jl} + Gamma^l_{ij} delta_jk) U_i dpsi_k/dy_l.
    for k in 0..3 {
        for l in 0..3 {
            let mut v = 0.0;
            for i in 0..3 {
                let mut c = gamma[l][(i, k)];
                for j in 0..3 {
                    for m in 0..3 {
                        c += gamma[m][(i, j)] * g[(i, m)] * gi[(j, l)];
                    }
                }
                v += c * u[i];
            }
            flux[(k, l)] += v;
        }
    }

    // (Gamma^m_{ij} Gamma^p_{kl} g_mp g^{jl} + Gamma^l_{ij} Gamma^j_{kl}) U_i psi_k.
    for k in 0..3 {
        let mut v = 0.0;
        for i in 0..3 {
            let mut c = 0.0;
            for j in 0..3 {
                for l in 0..3 {
                    c += gamma[l][(i, j)] * gamma[j][(k, l)];
                    for m in 0..3 {
                        for p in 0..3 {
                            c += gamma[m][(i, j)] * gamma[p][(k, l)] * g[(m, p)] * gi[(j, l)];
                        }
                    }
                }
            }
            v += c * u[i];
        }
        vec[k] += v;
    }

    (vec, flux)
}

/// Rigid velocity block for the boundary coupling `[I, -skew(r)]`.
pub fn rigid_blocks(r: &Vector3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    (Matrix3::identity(), -skew(r))
}

/// The effective coefficient tensors each transformed operator is
/// linear in. Extracting them makes "the same operator with
/// time-differentiated coefficients" well defined: differentiate the
/// tensors, keep the contraction with the (frozen) field. That is
/// exactly the extra term the product rule produces when the momentum
/// equation is differentiated in time.
#[derive(Debug, Clone)]
pub struct OpCoeffs {
    /// Hessian contraction of `L`: `g^{jk}`.
    pub l_hess: Matrix3<f64>,
    /// Gradient coefficient of `L` from `d_j g^{jk}`.
    pub l_div: Vector3<f64>,
    /// Gradient coefficient of `L`: `l_grad[i][(j, l)]` multiplies
    /// `d U_j / d y_l` in component `i`.
    pub l_grad: [Matrix3<f64>; 3],
    /// Zero-order coefficient of `L` on `U_j`.
    pub l_val: Matrix3<f64>,
    /// Transport direction of `M`.
    pub m_grad: Vector3<f64>,
    /// Zero-order coefficient of `M`.
    pub m_val: Matrix3<f64>,
    /// Christoffel coefficient of `N`.
    pub n_gamma: [Matrix3<f64>; 3],
    /// Contravariant metric of `G`.
    pub g_inv: Matrix3<f64>,
}

fn l_grad_component(d: &PointData, i: usize) -> Matrix3<f64> {
    let mut t = Matrix3::zeros();
    for j in 0..3 {
        for l in 0..3 {
            let mut v = 0.0;
            for k in 0..3 {
                v += 2.0 * d.g_inv[(k, l)] * d.gamma[i][(j, k)];
            }
            t[(j, l)] = v;
        }
    }
    t
}

fn l_val_tensor(d: &PointData, div_g_gamma: &Matrix3<f64>) -> Matrix3<f64> {
    let mut t = *div_g_gamma;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    for m in 0..3 {
                        t[(i, j)] += d.g_inv[(k, l)] * d.gamma[m][(j, l)] * d.gamma[i][(k, m)];
                    }
                }
            }
        }
    }
    t
}

fn m_val_tensor(d: &PointData) -> Matrix3<f64> {
    let mut t = d.grad_y * d.grad_xdot;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                t[(i, j)] += d.gamma[i][(j, k)] * d.ydot[k];
            }
        }
    }
    t
}

fn require_div(frames: &[TransformData]) -> Result<()> {
    for f in frames {
        if f.points.iter().any(|p| p.div_g_inv.is_none() || p.div_g_gamma.is_none()) {
            return Err(Error::invalid(
                "coefficient tensors need analytic transform data",
            ));
        }
    }
    Ok(())
}

impl OpCoeffs {
    /// The coefficient tensors at one point, undifferentiated; the
    /// `*_from` evaluations then agree with the direct operators.
    pub fn from_point(d: &PointData) -> Result<Self> {
        if d.div_g_inv.is_none() || d.div_g_gamma.is_none() {
            return Err(Error::invalid(
                "coefficient tensors need analytic transform data",
            ));
        }
        Ok(OpCoeffs {
            l_hess: d.g_inv,
            l_div: d.div_g_inv.unwrap(),
            l_grad: [
                l_grad_component(d, 0),
                l_grad_component(d, 1),
                l_grad_component(d, 2),
            ],
            l_val: l_val_tensor(d, &d.div_g_gamma.unwrap()),
            m_grad: d.ydot,
            m_val: m_val_tensor(d),
            n_gamma: d.gamma,
            g_inv: d.g_inv,
        })
    }

    /// Per-point time derivative of the coefficient tensors, by
    /// centered differences over a snapshot window.
    pub fn sequence_derivative(seq: &TransformSequence, order: usize) -> Result<Vec<OpCoeffs>> {
        require_div(&seq.frames)?;
        let l_hess = seq.derivative_matrix(order, |p| p.g_inv)?;
        let l_div = seq.derivative_vector(order, |p| p.div_g_inv.unwrap())?;
        let lg0 = seq.derivative_matrix(order, |p| l_grad_component(p, 0))?;
        let lg1 = seq.derivative_matrix(order, |p| l_grad_component(p, 1))?;
        let lg2 = seq.derivative_matrix(order, |p| l_grad_component(p, 2))?;
        let l_val =
            seq.derivative_matrix(order, |p| l_val_tensor(p, &p.div_g_gamma.unwrap()))?;
        let m_grad = seq.derivative_vector(order, |p| p.ydot)?;
        let m_val = seq.derivative_matrix(order, m_val_tensor)?;
        let ng0 = seq.derivative_matrix(order, |p| p.gamma[0])?;
        let ng1 = seq.derivative_matrix(order, |p| p.gamma[1])?;
        let ng2 = seq.derivative_matrix(order, |p| p.gamma[2])?;
        let n = l_hess.len();
        Ok((0..n)
            .map(|i| OpCoeffs {
                l_hess: l_hess[i],
                l_div: l_div[i],
                l_grad: [lg0[i], lg1[i], lg2[i]],
                l_val: l_val[i],
                m_grad: m_grad[i],
                m_val: m_val[i],
                n_gamma: [ng0[i], ng1[i], ng2[i]],
                g_inv: l_hess[i],
            })
            .collect())
    }
}

/// Transformed Laplacian evaluated through coefficient tensors; with
/// tensors from [`OpCoeffs::from_point`] this equals [`op_l`], with
/// differentiated tensors it is the product-rule term on `L`.
pub fn op_l_from(c: &OpCoeffs, jet: &VelocityJet) -> Vector3<f64> {
    let mut out = Vector3::zeros();
    for i in 0..3 {
        let mut v = 0.0;
        for j in 0..3 {
            for k in 0..3 {
                v += c.l_hess[(j, k)] * jet.hess[i][(j, k)];
            }
        }
        for k in 0..3 {
            v += c.l_div[k] * jet.grad[(i, k)];
        }
        for j in 0..3 {
            for l in 0..3 {
                v += c.l_grad[i][(j, l)] * jet.grad[(j, l)];
            }
        }
        for j in 0..3 {
            v += c.l_val[(i, j)] * jet.u[j];
        }
        out[i] = v;
    }
    out
}

/// Transport correction through coefficient tensors; see [`op_l_from`].
pub fn op_m_from(c: &OpCoeffs, jet: &VelocityJet) -> Vector3<f64> {
    jet.grad * c.m_grad + c.m_val * jet.u
}

/// The Christoffel part of the convection with explicit coefficients.
/// The full operator is `op_n = grad U . ut + op_n_gamma_from(from_point(d), ut, jet)`;
/// the plain gradient term carries no transform coefficient, so it
/// drops out of the coefficient-derivative version.
pub fn op_n_gamma_from(c: &OpCoeffs, ut: &Vector3<f64>, jet: &VelocityJet) -> Vector3<f64> {
    gamma_bilinear(&c.n_gamma, ut, &jet.u)
}

/// Pressure gradient through coefficient tensors; see [`op_l_from`].
pub fn op_g_from(c: &OpCoeffs, pj: &PressureJet) -> Vector3<f64> {
    c.g_inv * pj.grad
}

/// `out_i = gamma[i][(j, k)] a_j b_k`.
pub fn gamma_bilinear(
    gamma: &[Matrix3<f64>; 3],
    a: &Vector3<f64>,
    b: &Vector3<f64>,
) -> Vector3<f64> {
    Vector3::new(
        (a.transpose() * gamma[0] * b)[0],
        (a.transpose() * gamma[1] * b)[0],
        (a.transpose() * gamma[2] * b)[0],
    )
}

/// First-derivative momentum defect: the source the product rule
/// produces on `F` when the momentum equation is differentiated once
/// in time, with the field frozen. `dc` holds the differentiated
/// coefficient tensors, `center` the undifferentiated point (the
/// convection needs both because its lagged field `ut` differentiates
/// too, with derivative `ut_dot`).
pub fn rhs_f1(
    center: &PointData,
    dc: &OpCoeffs,
    jet: &VelocityJet,
    pj: &PressureJet,
    ut: &Vector3<f64>,
    ut_dot: &Vector3<f64>,
) -> Vector3<f64> {
    let n1 = jet.grad * ut_dot
        + op_n_gamma_from(dc, ut, jet)
        + gamma_bilinear(&center.gamma, ut_dot, &jet.u);
    op_l_from(dc, jet) - op_m_from(dc, jet) - n1 - op_g_from(dc, pj)
}

/// First-derivative translational source: the product rule hits the
/// lagged angular velocity, `G_1(A) = -d(Omega_t)/dt x A`.
pub fn rhs_g1(omega_lagged_dot: &Vector3<f64>, a: &Vector3<f64>) -> Vector3<f64> {
    -omega_lagged_dot.cross(a)
}

/// First-derivative angular source `H_1(Omega) = -d(Omega_t)/dt x (J Omega)`.
pub fn rhs_h1(
    omega_lagged_dot: &Vector3<f64>,
    inertia: &Matrix3<f64>,
    omega: &Vector3<f64>,
) -> Vector3<f64> {
    -omega_lagged_dot.cross(&(inertia * omega))
}

/// Pointwise residual of the metric/pressure product-rule identity
/// `g d(g^{-1})/dt grad P + dg/dt g^{-1} grad P`. Differentiating
/// `g g^{-1} = I` shows the two terms cancel exactly, so consistent
/// derivative caches must drive this to zero; finite-difference caches
/// leave an `O(dt^2)` remainder.
pub fn pressure_cancellation_point(
    g: &Matrix3<f64>,
    g_dot: &Matrix3<f64>,
    g_inv: &Matrix3<f64>,
    g_inv_dot: &Matrix3<f64>,
    grad_p: &Vector3<f64>,
) -> f64 {
    (g * (g_inv_dot * grad_p) + g_dot * (g_inv * grad_p)).norm()
}

/// Max-norm of the cancellation residual over a frame, with the
/// analytic `dg/dt` cache and the induced inverse derivative
/// `-g^{-1} (dg/dt) g^{-1}`.
pub fn pressure_cancellation_analytic(frame: &TransformData, grad_p: &[Vector3<f64>]) -> f64 {
    frame
        .points
        .iter()
        .zip(grad_p)
        .map(|(p, gp)| {
            let gid = -p.g_inv * p.gram_dot * p.g_inv;
            pressure_cancellation_point(&p.g, &p.gram_dot, &p.g_inv, &gid, gp)
        })
        .fold(0.0, f64::max)
}

/// Max-norm of the cancellation residual with both derivative caches
/// taken by centered differences over a snapshot window.
pub fn pressure_cancellation_fd(
    seq: &TransformSequence,
    grad_p: &[Vector3<f64>],
) -> Result<f64> {
    let g_dot = seq.derivative_matrix(1, |p| p.g)?;
    let gi_dot = seq.derivative_matrix(1, |p| p.g_inv)?;
    Ok(seq
        .center()
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            pressure_cancellation_point(&p.g, &g_dot[i], &p.g_inv, &gi_dot[i], &grad_p[i])
        })
        .fold(0.0, f64::max))
}
