use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh size must satisfy 0 < h <= 4, got {0}")]
    InvalidMeshSize(f64),
    #[error("point ({x}, {y}) lies outside the domain")]
    PointOutsideDomain { x: f64, y: f64 },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("no quadrature rule of degree {0} (supported up to {max})", max = crate::fem::quadrature::MAX_DEGREE)]
    UnsupportedQuadratureDegree(usize),
    #[error("Lagrange degree {0} not supported (1..=5)")]
    UnsupportedBasisDegree(usize),
    #[error("incompatible space: {0}")]
    IncompatibleSpace(String),
    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("triangle index {0} out of range")]
    TriangleOutOfRange(usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular to working precision (relative residual {residual:.3e})")]
    Singular { residual: f64 },
    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),
    #[error("factorization failed: {0}")]
    Factorization(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("{0}")]
    Domain(String),
    #[error("inf-sup constant is numerically zero ({0:.3e}); the pair is not divergence stable")]
    UnstablePair(f64),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
