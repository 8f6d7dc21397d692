//! Time marching for the coupled fluid/rigid-body system on the fixed
//! reference domain.
//!
//! The backbone is a constant-coefficient implicit Stokes step with
//! rigid unknowns, factored once per mesh and step size. Everything
//! the moving geometry contributes — metric-weighted mass, the
//! transformed viscous form, transport and convection, the body
//! source terms — lands on the right-hand side and is converged by a
//! fixed-point sweep over each time window, mirroring the linearize /
//! contract / re-linearize structure of the underlying analysis.

pub mod corrections;
pub mod derivative;
pub mod march;
pub mod stokes;

pub use corrections::{correction_rhs, CorrectionInput, FieldEval};
pub use derivative::{solve_time_derivative, DerivativeResult};
pub use march::{solve_linearized, solve_nonlinear, FixedPointLog, FsiSolver, SolveResult, TildeData};
pub use stokes::{divergence_nullspace, inf_sup_constant, StokesMode, StokesSystem};

use crate::{Error, Result};

/// Run parameters shared by all solve entry points.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Time step.
    pub dt: f64,
    /// Final time.
    pub t_end: f64,
    /// Fixed-point tolerance on the weighted-mass distance between
    /// successive window iterates.
    pub fp_tol: f64,
    /// Iteration cap per window before the window is declared
    /// non-contracting.
    pub max_fp_iter: usize,
    /// Outer (Picard) tolerance for the nonlinear solve.
    pub picard_tol: f64,
    pub max_picard_iter: usize,
    /// Steps per fixed-point window.
    pub window_steps: usize,
    /// Minimal admissible body-wall distance; crossing it aborts.
    pub gap_delta: f64,
    /// Integrability exponents (s, r) with 3/s + 2/r = 1, s > 3.
    pub exponent_s: f64,
    pub exponent_r: f64,
    /// Time discretization of the viscous/correction terms.
    pub theta: f64,
    /// Runge-Kutta substeps per step when advancing the transform.
    pub ode_substeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-2,
            t_end: 1.0,
            fp_tol: 1e-10,
            max_fp_iter: 60,
            picard_tol: 1e-9,
            max_picard_iter: 30,
            window_steps: 10,
            gap_delta: 0.1,
            exponent_s: 4.0,
            exponent_r: 8.0,
            theta: 1.0,
            ode_substeps: 2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_end > 0.0) {
            return Err(Error::invalid("dt and t_end must be positive"));
        }
        if !(self.fp_tol > 0.0 && self.picard_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if self.window_steps == 0 || self.max_fp_iter == 0 {
            return Err(Error::invalid("iteration limits must be positive"));
        }
        if !(self.theta >= 0.5 && self.theta <= 1.0) {
            return Err(Error::invalid("theta must lie in [1/2, 1]"));
        }
        check_exponents(self.exponent_s, self.exponent_r)?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Validates the integrability exponent pair: 3/s + 2/r = 1 with
/// s strictly above 3 (the endpoint is excluded, not extrapolated).
pub fn check_exponents(s: f64, r: f64) -> Result<()> {
    if !(s > 3.0) {
        return Err(Error::invalid(format!("exponent s = {s} must satisfy s > 3")));
    }
    if !(r > 0.0) {
        return Err(Error::invalid("exponent r must be positive"));
    }
    let lhs = 3.0 / s + 2.0 / r;
    if (lhs - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "exponents (s, r) = ({s}, {r}) violate 3/s + 2/r = 1 (got {lhs})"
        )));
    }
    Ok(())
}
