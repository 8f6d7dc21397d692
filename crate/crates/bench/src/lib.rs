//! Shared fixtures for the pipeline benchmarks.

use fsi_core::mesh::{build_shell_mesh, ShellMesh};
use nalgebra::Vector3;

/// Standard benchmark geometry: unit-ball body of radius 0.5 centred in
/// a shell of outer radius 2.
pub fn bench_mesh(level: usize) -> ShellMesh {
    build_shell_mesh(level, 0.5, 2.0, Vector3::zeros()).expect("bench mesh")
}
