//! Numerical construction of free boundary minimal surfaces in the unit ball
//! obtained by gluing a doubled disk to `n` boundary half-catenoid bridges and,
//! for genus one, a central catenoidal neck.

pub mod ball_geometry;
pub mod curvature_validator;
pub mod cutoff;
pub mod error;
pub mod global_solver;
pub mod graph_operator;
pub mod green_functions;
pub mod grid;
pub mod jet;
pub mod linear_analysis;
pub mod matching_solver;
pub mod surface_builder;

pub use error::{FbmsError, Result};
