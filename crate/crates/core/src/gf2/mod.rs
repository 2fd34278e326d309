//! Bit-packed linear algebra over GF(2).
//!
//! Text encoding: a vector is a string of '0'/'1' with coordinate 0 leftmost;
//! a matrix is one such string per row.

mod basis;
mod bitvec;
mod matrix;
mod subspace;

pub use basis::{apply_basis_map, dual_basis, random_basis, random_isometry, BasisMap};
pub use bitvec::BitVec;
pub use matrix::{rref, Echelon, Gf2Matrix};
pub use subspace::{random_subspace, SubspaceBasis, DEFAULT_MAX_ENUM_DIM};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is not invertible")]
    NotInvertible,
    #[error("enumeration of a {dim}-dimensional space exceeds the budget of {max}")]
    BudgetExceeded { dim: usize, max: usize },
    #[error("operation requires a nonzero subspace")]
    ZeroDimension,
    #[error("cannot take a {dim}-dimensional subspace of F2^{n}")]
    InvalidDimension { n: usize, dim: usize },
    #[error("parse error: {0}")]
    Parse(String),
}
