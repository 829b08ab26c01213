//! Exact computations on finite-dimensional right Leibniz algebras over the
//! rationals, centred on solvable algebras whose nilradical is abelian of
//! codimension one less than its dimension.

pub mod algebra;
pub mod derivations;
pub mod error;
pub mod families;
pub mod invariants;
pub mod linalg;
pub mod normalizer;
pub mod scalar;

pub use algebra::Algebra;
pub use error::{AlgebraError, Result};
pub use scalar::Scalar;
