//! Simulation of a rigid ball immersed in an incompressible viscous fluid
//! inside a spherical container.
//!
//! The moving-boundary problem is rewritten on the fixed reference domain
//! `Omega_F = Omega \ S0` through a volume-preserving change of variables
//! that is rigid near the body and the identity near the outer wall. The
//! transformed equations are discretized with inf-sup stable mixed finite
//! elements coupled to the six rigid degrees of freedom, and marched in
//! time with an implicit Euler / fixed-point scheme in which all metric
//! corrections enter through the right-hand side.

pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod io;
pub mod la;
pub mod mesh;
pub mod operators;
pub mod quad1d;
pub mod rigid_motion;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
