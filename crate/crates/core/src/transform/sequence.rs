//! Time derivatives of the transform coefficients, taken by centered
//! differences over a window of uniformly spaced snapshots.

use super::{PointData, TransformData};
use crate::{Error, Result};
use nalgebra::{Matrix3, Vector3};

/// A symmetric window of transform snapshots around one time instant.
#[derive(Debug, Clone)]
pub struct TransformSequence {
    pub frames: Vec<TransformData>,
    pub dt: f64,
}

/// Centered difference weights (including the 1/dt^order factor left
/// out) for derivative `order` on a window of half width `half`.
pub(crate) fn central_weights(order: usize, half: usize) -> Option<Vec<f64>> {
    match (order, half) {
        (0, h) => {
            let mut w = vec![0.0; 2 * h + 1];
            w[h] = 1.0;
            Some(w)
        }
        (1, 1) => Some(vec![-0.5, 0.0, 0.5]),
        (2, 1) => Some(vec![1.0, -2.0, 1.0]),
        (1, 2) => Some(vec![1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0]),
        (2, 2) => Some(vec![
            -1.0 / 12.0,
            16.0 / 12.0,
            -30.0 / 12.0,
            16.0 / 12.0,
            -1.0 / 12.0,
        ]),
        (3, 2) => Some(vec![-0.5, 1.0, 0.0, -1.0, 0.5]),
        _ => None,
    }
}

impl TransformSequence {
    /// Wraps a window; the frame count must be odd and the times
    /// uniformly spaced.
    pub fn new(frames: Vec<TransformData>, dt: f64) -> Result<Self> {
        if frames.len() % 2 == 0 || frames.is_empty() {
            return Err(Error::invalid("snapshot window must have odd length"));
        }
        if !(dt > 0.0) {
            return Err(Error::invalid("snapshot spacing must be positive"));
        }
        let n_points = frames[0].points.len();
        for pair in frames.windows(2) {
            if (pair[1].t - pair[0].t - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(Error::invalid("snapshots are not uniformly spaced"));
            }
            if pair[1].points.len() != n_points {
                return Err(Error::invalid("snapshots cover different point sets"));
            }
        }
        Ok(TransformSequence { frames, dt })
    }

    pub fn half_width(&self) -> usize {
        self.frames.len() / 2
    }

    /// The snapshot the derivatives refer to.
    pub fn center(&self) -> &TransformData {
        &self.frames[self.half_width()]
    }

    fn weights(&self, order: usize) -> Result<Vec<f64>> {
        central_weights(order, self.half_width()).ok_or_else(|| {
            Error::invalid(format!(
                "derivative order {order} not supported on a window of {} frames",
                self.frames.len()
            ))
        })
    }

    /// Per-point derivative of a matrix coefficient, e.g. the metric.
    pub fn derivative_matrix(
        &self,
        order: usize,
        f: impl Fn(&PointData) -> Matrix3<f64>,
    ) -> Result<Vec<Matrix3<f64>>> {
        let w = self.weights(order)?;
        let scale = self.dt.powi(order as i32).recip();
        let n = self.center().points.len();
        let mut out = vec![Matrix3::zeros(); n];
        for (frame, wk) in self.frames.iter().zip(&w) {
            if *wk == 0.0 {
                continue;
            }
            for (acc, p) in out.iter_mut().zip(&frame.points) {
                *acc += f(p) * (*wk * scale);
            }
        }
        Ok(out)
    }

    /// Derivative of externally computed per-frame samples (one vector
    /// per point per frame), e.g. operator evaluations that mix frame
    /// coefficients with a time-dependent field.
    pub fn derivative_samples(
        &self,
        order: usize,
        samples: &[Vec<Vector3<f64>>],
    ) -> Result<Vec<Vector3<f64>>> {
        if samples.len() != self.frames.len() {
            return Err(Error::invalid("one sample set per frame required"));
        }
        let w = self.weights(order)?;
        let scale = self.dt.powi(order as i32).recip();
        let n = self.center().points.len();
        let mut out = vec![Vector3::zeros(); n];
        for (frame_samples, wk) in samples.iter().zip(&w) {
            if *wk == 0.0 {
                continue;
            }
            if frame_samples.len() != n {
                return Err(Error::invalid("sample set size mismatch"));
            }
            for (acc, v) in out.iter_mut().zip(frame_samples) {
                *acc += v * (*wk * scale);
            }
        }
        Ok(out)
    }

    /// Per-point derivative of a vector coefficient.
    pub fn derivative_vector(
        &self,
        order: usize,
        f: impl Fn(&PointData) -> Vector3<f64>,
    ) -> Result<Vec<Vector3<f64>>> {
        let w = self.weights(order)?;
        let scale = self.dt.powi(order as i32).recip();
        let n = self.center().points.len();
        let mut out = vec![Vector3::zeros(); n];
        for (frame, wk) in self.frames.iter().zip(&w) {
            if *wk == 0.0 {
                continue;
            }
            for (acc, p) in out.iter_mut().zip(&frame.points) {
                *acc += f(p) * (*wk * scale);
            }
        }
        Ok(out)
    }
}
