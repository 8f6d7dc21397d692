//! Metric tensors and Christoffel symbols of the change of variables.
//!
//! With `F = grad X` (rows are components, columns are reference
//! directions), the covariant metric is `g = F^T F`, the contravariant
//! one is `g^{-1} = grad Y (grad Y)^T`, and the Christoffel symbols come
//! from the standard formula in the first derivatives of `g`.

use crate::{Error, Result};
use nalgebra::Matrix3;

/// Covariant metric, contravariant metric, inverse Jacobian and
/// determinant, all from `grad X` at one point.
pub fn metric_from_grad(grad_x: &Matrix3<f64>) -> Result<MetricPoint> {
    let det = grad_x.determinant();
    let grad_y = grad_x
        .try_inverse()
        .ok_or_else(|| Error::invalid("transform Jacobian is singular"))?;
    let g = grad_x.transpose() * grad_x;
    let g_inv = grad_y * grad_y.transpose();
    Ok(MetricPoint { g, g_inv, grad_y, det })
}

/// Pointwise metric data derived from one Jacobian.
#[derive(Debug, Clone, Copy)]
pub struct MetricPoint {
    pub g: Matrix3<f64>,
    pub g_inv: Matrix3<f64>,
    pub grad_y: Matrix3<f64>,
    pub det: f64,
}

/// Christoffel symbols `Gamma^k_{ij}` from the contravariant metric and
/// the partial derivatives `dg[l] = d g / d y_l`.
///
/// Returned as `gamma[k][(i, j)]`; symmetric in `(i, j)` by construction.
pub fn christoffel(g_inv: &Matrix3<f64>, dg: &[Matrix3<f64>; 3]) -> [Matrix3<f64>; 3] {
    let mut gamma = [Matrix3::zeros(); 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for l in 0..3 {
                    s += g_inv[(k, l)] * (dg[j][(i, l)] + dg[i][(j, l)] - dg[l][(i, j)]);
                }
                gamma[k][(i, j)] = 0.5 * s;
            }
        }
    }
    gamma
}

/// Fourth-order central difference from samples at `-2h, -h, +h, +2h`.
pub fn central_difference(
    m2: &Matrix3<f64>,
    m1: &Matrix3<f64>,
    p1: &Matrix3<f64>,
    p2: &Matrix3<f64>,
    h: f64,
) -> Matrix3<f64> {
    (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
}
