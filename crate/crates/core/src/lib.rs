//! Adaptive Galerkin boundary element methods for the 2D Laplacian.
//!
//! Lowest-order discretizations of the weakly-singular and hyper-singular
//! integral equations on polygonal curves, together with several a
//! posteriori error estimators and a Dörfler-marking adaptive loop.

pub mod adaptive;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod galerkin;
pub mod geometry;
pub mod kernel;
pub mod mesh;
pub mod mesh_width;
pub mod operators;
pub mod oracle;
pub mod quadrature;
pub mod space;

pub use error::{AbemError, Result};
