//! Learning piecewise-linear maps of triangle meshes by predicting
//! per-triangle jacobians and integrating them with a Poisson solve.

pub mod cache_io;
pub mod container;
pub mod dataset;
pub mod error;
pub mod features;
pub mod fields;
pub mod mesh;
pub mod nn;
pub mod obj;
pub mod operators;
pub mod oracle;
pub mod parallel;
pub mod pipeline;
pub mod poisson;
pub mod shapes;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result, ValidationError};
pub use mesh::{Mesh, Vec3};
pub use operators::{FrameSet, GradientOperator, OperatorCache};
pub use poisson::{compute_jacobians, poisson_adjoint, poisson_solve, JacobianField, VertexMap};
