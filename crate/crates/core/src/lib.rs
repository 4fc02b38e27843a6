//! Floating-potential conductivity solver and blow-up-rate harness for an
//! inclusion close to the boundary of its matrix.

pub mod asymptotics;
pub mod auxiliary;
pub mod coefficients;
pub mod conductivity;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod verify;

pub use coefficients::{make_preset, CoefficientField, CoefficientPreset};
pub use elliptic::{assemble, boundary_flux, energy_product, solve_dirichlet, LinearSystem, ScalarField, SolveStats};
pub use error::{GapError, Result};
pub use geometry::{GapDomain, Point, WeightMode};
pub use mesh::{BoundaryTag, Mesh, MeshOptions};
