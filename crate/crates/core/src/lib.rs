//! Finite element discretization of the damped time-harmonic Galbrun
//! equation on the square `(-4, 4)²`, with the diagnostics used to study it:
//! X-norm errors, consistency errors, discrete inf-sup constants, discrete
//! Helmholtz splittings and Mach-number admissibility bounds.

pub mod analysis;
pub mod assembly;
pub mod coefficients;
pub mod error;
pub mod fem;
pub mod jet;
pub mod linalg;
pub mod mesh;
pub mod solver;

pub use error::{AnalysisError, FemError, LinalgError, MeshError, SolveError};
pub use mesh::{barycentric_refine, generate_square_mesh, Mesh, Point2};
