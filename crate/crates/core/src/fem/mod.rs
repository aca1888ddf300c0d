//! Reference-element machinery and Lagrange spaces.

pub mod basis;
pub mod eval;
pub mod quadrature;
pub mod space;

pub use basis::{lagrange_basis, BasisEval, ReferenceBasis};
pub use eval::{eval_fe, ElementMap, FeEval};
pub use quadrature::{edge_quadrature, triangle_quadrature, EdgeRule, QuadRule};
pub use space::{build_space, BcMode, FESpace, Family};
