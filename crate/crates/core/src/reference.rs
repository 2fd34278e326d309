//! The worked [[6,3]] example code and its published matrices.
//!
//! These constants are golden values: tests and the `demo` command rebuild
//! the code from the generator matrix and check everything else against them.

use crate::codes::{CodeError, CodeSpec};
use crate::gf2::{Gf2Matrix, SubspaceBasis};

/// `G_C`, 6×3; its columns span `C`.
pub const GENERATOR_MATRIX: [&str; 6] = ["100", "010", "001", "011", "110", "101"];

/// `H_C`, 3×6.
pub const PARITY_MATRIX: [&str; 3] = ["011100", "110010", "101001"];

/// `G_{C⊥} = H_Cᵀ`, 6×3.
pub const DUAL_GENERATOR_MATRIX: [&str; 6] = ["011", "110", "101", "100", "010", "001"];

/// `H_{C⊥} = G_Cᵀ`, 3×6.
pub const DUAL_PARITY_MATRIX: [&str; 3] = ["100011", "010110", "001101"];

/// The eight codewords in the order they are listed for `|C⟩`.
pub const CODEWORDS: [&str; 8] = [
    "000000", "100011", "010110", "001101", "110101", "101110", "011011", "111000",
];

/// Published distance of both `C` and `C⊥`.
pub const DISTANCE: usize = 3;

pub fn generator_matrix() -> Gf2Matrix {
    Gf2Matrix::parse_rows(&GENERATOR_MATRIX).expect("valid constant")
}

pub fn parity_matrix() -> Gf2Matrix {
    Gf2Matrix::parse_rows(&PARITY_MATRIX).expect("valid constant")
}

pub fn dual_generator_matrix() -> Gf2Matrix {
    Gf2Matrix::parse_rows(&DUAL_GENERATOR_MATRIX).expect("valid constant")
}

pub fn dual_parity_matrix() -> Gf2Matrix {
    Gf2Matrix::parse_rows(&DUAL_PARITY_MATRIX).expect("valid constant")
}

/// `C` as the column space of `G_C`.
pub fn code() -> SubspaceBasis {
    SubspaceBasis::row_space(&generator_matrix().transpose())
}

/// Certified spec for tolerance `q` (only `q ≤ 1` certifies).
pub fn code_spec(q: usize) -> Result<CodeSpec, CodeError> {
    CodeSpec::certified(code(), q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::BitVec;

    #[test]
    fn published_matrices_are_consistent() {
        let g = generator_matrix();
        let h = parity_matrix();
        assert!(h.mul(&g).unwrap().is_zero());
        assert_eq!(dual_generator_matrix(), h.transpose());
        assert_eq!(dual_parity_matrix(), g.transpose());
        assert_eq!(code().dual(), SubspaceBasis::row_space(&h));
        let listed: Vec<BitVec> = CODEWORDS.iter().map(|s| s.parse().unwrap()).collect();
        let mut els = code().elements().unwrap();
        els.sort();
        let mut sorted = listed.clone();
        sorted.sort();
        assert_eq!(els, sorted);
    }

    #[test]
    fn distances_match_published() {
        let spec = code_spec(1).unwrap();
        assert_eq!(spec.d_primal(), DISTANCE);
        assert_eq!(spec.d_dual(), DISTANCE);
        assert!(code_spec(2).is_err());
    }
}
