//! Pointwise coefficient data of the transformed system: metric pair,
//! Christoffel symbols and transport derivatives at every quadrature
//! point of the reference mesh.

use super::flow::{LabelCluster, OFFSETS};
use super::map::SpaceTimeMap;
use super::metric::{central_difference, christoffel, metric_from_grad};
use super::PotentialField;
use crate::Result;
use nalgebra::{Matrix3, Vector3};

/// All transform coefficients at one reference point.
#[derive(Debug, Clone)]
pub struct PointData {
    pub label: usize,
    /// Reference position.
    pub y: Vector3<f64>,
    /// Physical position X(t, y).
    pub x: Vector3<f64>,
    pub grad_x: Matrix3<f64>,
    /// Inverse Jacobian, i.e. grad Y evaluated at X(t, y).
    pub grad_y: Matrix3<f64>,
    pub det: f64,
    /// Covariant metric g = grad X^T grad X.
    pub g: Matrix3<f64>,
    /// Contravariant metric.
    pub g_inv: Matrix3<f64>,
    /// Christoffel symbols, `gamma[k][(i, j)]`.
    pub gamma: [Matrix3<f64>; 3],
    /// d X / d t along the label.
    pub xdot: Vector3<f64>,
    /// d Y / d t evaluated at X(t, y).
    pub ydot: Vector3<f64>,
    pub grad_xdot: Matrix3<f64>,
    /// d g / d t from the product rule on grad X.
    pub gram_dot: Matrix3<f64>,
    /// `div_g_gamma[(i, j)] = d_k (g^{kl} Gamma^i_{jl})`; only available
    /// on the analytic-map path (needs nested differences).
    pub div_g_gamma: Option<Matrix3<f64>>,
    /// `div_g_inv[k] = d_j g^{jk}`; analytic-map path only.
    pub div_g_inv: Option<Vector3<f64>>,
}

impl PointData {
    /// Flat data of the identity transform.
    pub fn identity(label: usize, y: Vector3<f64>) -> Self {
        PointData {
            label,
            y,
            x: y,
            grad_x: Matrix3::identity(),
            grad_y: Matrix3::identity(),
            det: 1.0,
            g: Matrix3::identity(),
            g_inv: Matrix3::identity(),
            gamma: [Matrix3::zeros(); 3],
            xdot: Vector3::zeros(),
            ydot: Vector3::zeros(),
            grad_xdot: Matrix3::zeros(),
            gram_dot: Matrix3::zeros(),
            div_g_gamma: Some(Matrix3::zeros()),
            div_g_inv: Some(Vector3::zeros()),
        }
    }

    /// Builds the data from a transported stencil cluster and the
    /// transport field at the cluster's current time.
    pub fn from_cluster(cluster: &LabelCluster, field: &PotentialField) -> Result<Self> {
        let (x, grad_x) = cluster.center();
        let metric = metric_from_grad(&grad_x)?;
        let mut dg = [Matrix3::zeros(); 3];
        for d in 0..3 {
            let axis = cluster.axis(d);
            let gs: Vec<Matrix3<f64>> = axis
                .iter()
                .map(|(_, f)| f.transpose() * *f)
                .collect();
            dg[d] = central_difference(&gs[0], &gs[1], &gs[2], &gs[3], cluster.h);
        }
        let gamma = christoffel(&metric.g_inv, &dg);
        let (w, gw) = field.value_and_grad(&x);
        let grad_xdot = gw * grad_x;
        Ok(PointData {
            label: cluster.label,
            y: cluster.y,
            x,
            grad_x,
            grad_y: metric.grad_y,
            det: metric.det,
            g: metric.g,
            g_inv: metric.g_inv,
            gamma,
            xdot: w,
            ydot: -metric.grad_y * w,
            grad_xdot,
            gram_dot: grad_xdot.transpose() * grad_x + grad_x.transpose() * grad_xdot,
            div_g_gamma: None,
            div_g_inv: None,
        })
    }

    /// Builds the data by direct evaluation of an analytic map,
    /// including the nested-difference divergence of `g^{kl} Gamma^i_{jl}`.
    pub fn from_map(
        map: &dyn SpaceTimeMap,
        t: f64,
        label: usize,
        y: &Vector3<f64>,
        h: f64,
    ) -> Result<Self> {
        let x = map.x(t, y);
        let grad_x = map.grad(t, y);
        let metric = metric_from_grad(&grad_x)?;
        let gamma = gamma_at(map, t, y, h)?;
        let xdot = map.xdot(t, y);
        let grad_xdot = map.grad_xdot(t, y);

        // d_k (g^{kl} Gamma^i_{jl}) and d_j g^{jk} by centered
        // differences of the contracted products; each sample needs its
        // own stencil for Gamma, hence the nesting.
        let mut div = Matrix3::zeros();
        let mut div_g_inv = Vector3::zeros();
        for k in 0..3 {
            let mut e = Vector3::zeros();
            e[k] = h;
            let tp = contracted(map, t, &(y + e), k, h)?;
            let tm = contracted(map, t, &(y - e), k, h)?;
            div += (tp - tm) / (2.0 * h);
            let gp = metric_from_grad(&map.grad(t, &(y + e)))?.g_inv;
            let gm = metric_from_grad(&map.grad(t, &(y - e)))?.g_inv;
            // Row k of the difference contributes d_k g^{kj}.
            for j in 0..3 {
                div_g_inv[j] += (gp[(k, j)] - gm[(k, j)]) / (2.0 * h);
            }
        }

        Ok(PointData {
            label,
            y: *y,
            x,
            grad_x,
            grad_y: metric.grad_y,
            det: metric.det,
            g: metric.g,
            g_inv: metric.g_inv,
            gamma,
            xdot,
            ydot: -metric.grad_y * xdot,
            grad_xdot,
            gram_dot: grad_xdot.transpose() * grad_x + grad_x.transpose() * grad_xdot,
            div_g_gamma: Some(div),
            div_g_inv: Some(div_g_inv),
        })
    }
}

/// Christoffel symbols of `map` at `(t, y)` via the fourth-order stencil.
fn gamma_at(
    map: &dyn SpaceTimeMap,
    t: f64,
    y: &Vector3<f64>,
    h: f64,
) -> Result<[Matrix3<f64>; 3]> {
    let metric = metric_from_grad(&map.grad(t, y))?;
    let mut dg = [Matrix3::zeros(); 3];
    for d in 0..3 {
        let mut samples = [Matrix3::zeros(); 4];
        for (k, off) in OFFSETS.iter().enumerate() {
            let mut p = *y;
            p[d] += off * h;
            let f = map.grad(t, &p);
            samples[k] = f.transpose() * f;
        }
        dg[d] = central_difference(&samples[0], &samples[1], &samples[2], &samples[3], h);
    }
    Ok(christoffel(&metric.g_inv, &dg))
}

/// The matrix `T[(i, j)] = g^{kl} Gamma^i_{jl}` for one fixed `k`.
fn contracted(
    map: &dyn SpaceTimeMap,
    t: f64,
    y: &Vector3<f64>,
    k: usize,
    h: f64,
) -> Result<Matrix3<f64>> {
    let metric = metric_from_grad(&map.grad(t, y))?;
    let gamma = gamma_at(map, t, y, h)?;
    let mut out = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for l in 0..3 {
                s += metric.g_inv[(k, l)] * gamma[i][(j, l)];
            }
            out[(i, j)] = s;
        }
    }
    Ok(out)
}

/// Transform coefficients for a whole point set at one time.
#[derive(Debug, Clone)]
pub struct TransformData {
    pub t: f64,
    pub points: Vec<PointData>,
}

impl TransformData {
    /// Flat data for the identity transform.
    pub fn identity(points: &[Vector3<f64>]) -> Self {
        TransformData {
            t: 0.0,
            points: points
                .iter()
                .enumerate()
                .map(|(i, y)| PointData::identity(i, *y))
                .collect(),
        }
    }

    /// Evaluates an analytic map at every point.
    pub fn from_map(
        map: &dyn SpaceTimeMap,
        t: f64,
        points: &[Vector3<f64>],
        h: f64,
    ) -> Result<Self> {
        let data = points
            .iter()
            .enumerate()
            .map(|(i, y)| PointData::from_map(map, t, i, y, h))
            .collect::<Result<Vec<_>>>()?;
        Ok(TransformData { t, points: data })
    }
}
