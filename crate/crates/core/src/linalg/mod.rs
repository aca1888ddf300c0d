//! Sparse matrices, linear solves and eigenvalue extraction.

pub mod eigen;
pub mod solve;
pub mod sparse;
mod umfpack;

pub use eigen::{smallest_eigenvalue, smallest_generalized_eigenvalue, EigenResult, EigenScalar, ShiftInvertPencil};
pub use solve::{gmres_ilu, relative_residual, sparse_solve, FactorScalar, SolveMethod, SolveReport, SparseLu};
pub use sparse::{dot, norm2, ComplexSparseMatrix, CsrMatrix, PatternBuilder, RealSparseMatrix, Scalar};
