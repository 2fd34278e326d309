use rand::seq::SliceRandom;
use rand::Rng;

use super::{BitVec, Gf2Error, Gf2Matrix, SubspaceBasis};
use crate::seed::Seed;

/// An ordered basis `u_1, …, u_n` of F₂ⁿ together with its dual basis.
///
/// As a map on bit strings it sends `x` to `Σ x_i u_i`; on kets it is the
/// permutation unitary `U_B`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BasisMap {
    n: usize,
    columns: Vec<BitVec>,
    /// Row `i` is the dual vector `u^i`, i.e. the inverse of the column matrix.
    inverse: Gf2Matrix,
}

impl BasisMap {
    /// Basis with `columns[i] = u_i`; fails if the vectors are dependent.
    pub fn from_columns(columns: Vec<BitVec>) -> Result<Self, Gf2Error> {
        let n = columns.len();
        let m = Gf2Matrix::from_columns(n, &columns)?;
        let inverse = m.inverse()?;
        Ok(BasisMap {
            n,
            columns,
            inverse,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_columns((0..n).map(|i| BitVec::unit(n, i)).collect()).expect("identity is invertible")
    }

    /// Coordinate permutation sending coordinate `i` to `perm[i]`.
    pub fn permutation(perm: &[usize]) -> Result<Self, Gf2Error> {
        let n = perm.len();
        if perm.iter().any(|&p| p >= n) {
            return Err(Gf2Error::NotInvertible);
        }
        Self::from_columns(perm.iter().map(|&p| BitVec::unit(n, p)).collect())
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn columns(&self) -> &[BitVec] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &BitVec {
        &self.columns[i]
    }

    /// The n×n matrix with `u_i` as column `i`.
    pub fn matrix(&self) -> Gf2Matrix {
        Gf2Matrix::from_columns(self.n, &self.columns).expect("columns have length n")
    }

    /// Dual basis as rows: row `i` is `u^i` with `u^i · u_j = δ_ij`.
    ///
    /// The relation is re-checked over all n² pairs before returning.
    pub fn dual_basis(&self) -> Result<Gf2Matrix, Gf2Error> {
        for (i, ui) in self.inverse.rows().iter().enumerate() {
            for (j, uj) in self.columns.iter().enumerate() {
                if ui.dot(uj)? != (i == j) {
                    return Err(Gf2Error::NotInvertible);
                }
            }
        }
        Ok(self.inverse.clone())
    }

    /// `Σ x_i u_i`.
    pub fn apply(&self, x: &BitVec) -> Result<BitVec, Gf2Error> {
        if x.len() != self.n {
            return Err(Gf2Error::LengthMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let mut out = BitVec::zeros(self.n);
        for i in x.iter_ones() {
            out.xor_assign_unchecked(&self.columns[i]);
        }
        Ok(out)
    }

    /// Coefficients of `y` in this basis: `x_i = u^i · y`.
    pub fn apply_inverse(&self, y: &BitVec) -> Result<BitVec, Gf2Error> {
        self.inverse.mul_vec(y)
    }

    /// Whether every column is a standard basis vector.
    pub fn is_permutation(&self) -> bool {
        self.columns.iter().all(|c| c.weight() == 1)
    }

    /// Image `{f(v) : v ∈ s}` of a subspace.
    pub fn map_subspace(&self, s: &SubspaceBasis) -> Result<SubspaceBasis, Gf2Error> {
        let gens = s
            .basis()
            .rows()
            .iter()
            .map(|r| self.apply(r))
            .collect::<Result<Vec<_>, _>>()?;
        SubspaceBasis::from_generators(self.n, gens)
    }

    /// Basis-index permutation table for dense states: entry `b` is the
    /// index of `f(x)` where `x` is the bit string of index `b`.
    pub fn index_table(&self) -> Vec<usize> {
        assert!(self.n < usize::BITS as usize);
        // f is linear, so the table is built by XOR-ing column images along a
        // Gray walk.
        let cols: Vec<usize> = self.columns.iter().map(BitVec::to_index).collect();
        let size = 1usize << self.n;
        let mut table = vec![0usize; size];
        for (b, slot) in table.iter_mut().enumerate() {
            // Index bit (n-1-i) is coordinate i.
            let mut acc = 0usize;
            let mut rest = b;
            while rest != 0 {
                let t = rest.trailing_zeros() as usize;
                acc ^= cols[self.n - 1 - t];
                rest &= rest - 1;
            }
            *slot = acc;
        }
        table
    }
}

/// Dual basis of `b` (see [`BasisMap::dual_basis`]).
pub fn dual_basis(b: &BasisMap) -> Result<Gf2Matrix, Gf2Error> {
    b.dual_basis()
}

/// `U_B` on bit strings.
pub fn apply_basis_map(b: &BasisMap, x: &BitVec) -> Result<BitVec, Gf2Error> {
    b.apply(x)
}

/// Uniformly random invertible linear isometry of (F₂ⁿ, Hamming), i.e. a
/// uniformly random coordinate permutation.
pub fn random_isometry(n: usize, seed: Seed) -> BasisMap {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed.rng());
    BasisMap::permutation(&perm).expect("a shuffle is a permutation")
}

/// Uniformly random ordered basis of F₂ⁿ (rejection on singular draws).
pub fn random_basis(n: usize, seed: Seed) -> BasisMap {
    let mut rng = seed.rng();
    loop {
        let cols: Vec<BitVec> = (0..n)
            .map(|_| BitVec::from_bools(&(0..n).map(|_| rng.random::<bool>()).collect::<Vec<_>>()))
            .collect();
        if let Ok(b) = BasisMap::from_columns(cols) {
            return b;
        }
    }
}
