//! Finite element discretization: quadrature, bases, the coupled
//! velocity/pressure/rigid space and the assembly routines.

pub mod assembly;
pub mod basis;
pub mod quadrature;
pub mod space;

pub use assembly::{
    add_body_inertia, assemble_divergence, assemble_gradient_rhs, assemble_mass,
    assemble_mean_constraint, assemble_pressure_gradient, assemble_stiffness,
    assemble_sym_stiffness, assemble_vector_rhs,
};
pub use basis::{p1_basis, p2_basis, p2_nodes, LOCAL_EDGES};
pub use quadrature::{tet_rule, TetRule};
pub use space::{
    eval_pressure, eval_velocity, CoupledSpace, ElemQuad, NodeClass, NodeCoupling, QuadCache,
    QuadPoint,
};
