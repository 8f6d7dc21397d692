//! The volume-preserving change of variables between the reference and
//! the physical domain, and all metric data derived from it.
//!
//! The map `X(t, .)` is realized as the flow of a divergence-free
//! transport field `w = curl(zeta psi)` built from a radial cutoff and
//! the vector potential of the rigid velocity. It is rigid on the inner
//! cutoff plateau, the identity on the outer one, and preserves volume
//! exactly because `w` is a curl.

mod cutoff;
mod data;
mod field;
mod flow;
mod map;
mod metric;
mod sequence;

pub use cutoff::{build_cutoff, CutoffField};
pub use data::{PointData, TransformData};
pub use field::PotentialField;
pub use flow::{FlowParams, FlowTransformBuilder, LabelCluster};
pub use map::{invert_transform, IdentityMap, QuadraticMap, RigidFlowMap, SpaceTimeMap, TwistMap};
pub use metric::{central_difference, christoffel, metric_from_grad, MetricPoint};
pub use sequence::TransformSequence;
