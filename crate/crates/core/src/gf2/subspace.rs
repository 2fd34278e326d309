use rand::Rng;

use super::{BitVec, Gf2Error, Gf2Matrix};
use crate::exec::Exec;
use crate::seed::Seed;

/// Largest dimension whose 2^dim elements may be enumerated by default.
pub const DEFAULT_MAX_ENUM_DIM: usize = 26;

/// A linear subspace of F₂ⁿ held in canonical form.
///
/// The basis is the reduced row-echelon form of any generating set, so two
/// values compare equal exactly when they describe the same subspace.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SubspaceBasis {
    ambient_dim: usize,
    basis: Gf2Matrix,
    pivots: Vec<usize>,
}

impl SubspaceBasis {
    /// Span of `generators` (which may be dependent).
    pub fn from_generators(ambient_dim: usize, generators: Vec<BitVec>) -> Result<Self, Gf2Error> {
        let m = Gf2Matrix::from_rows(ambient_dim, generators)?;
        let e = m.echelon();
        Ok(SubspaceBasis {
            ambient_dim,
            basis: e.matrix,
            pivots: e.pivots,
        })
    }

    /// Row space of `m`.
    pub fn row_space(m: &Gf2Matrix) -> Self {
        let e = m.echelon();
        SubspaceBasis {
            ambient_dim: m.num_cols(),
            basis: e.matrix,
            pivots: e.pivots,
        }
    }

    pub fn zero(ambient_dim: usize) -> Self {
        SubspaceBasis {
            ambient_dim,
            basis: Gf2Matrix::zeros(0, ambient_dim),
            pivots: Vec::new(),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        SubspaceBasis {
            ambient_dim,
            basis: Gf2Matrix::identity(ambient_dim),
            pivots: (0..ambient_dim).collect(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.pivots.len()
    }

    /// Canonical (RREF) basis, one row per basis vector.
    pub fn basis(&self) -> &Gf2Matrix {
        &self.basis
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Whether `v` lies in the subspace, by elimination against the RREF rows.
    pub fn member(&self, v: &BitVec) -> Result<bool, Gf2Error> {
        if v.len() != self.ambient_dim {
            return Err(Gf2Error::LengthMismatch {
                expected: self.ambient_dim,
                found: v.len(),
            });
        }
        let mut r = v.clone();
        for (row, &p) in self.basis.rows().iter().zip(&self.pivots) {
            if r.get(p) {
                r.xor_assign_unchecked(row);
            }
        }
        Ok(r.is_zero())
    }

    /// Orthogonal complement under the GF(2) dot product.
    pub fn dual(&self) -> SubspaceBasis {
        let n = self.ambient_dim;
        let mut is_pivot = vec![false; n];
        for &p in &self.pivots {
            is_pivot[p] = true;
        }
        // One null-space vector per free column f: e_f plus, for every pivot
        // row i with row_i[f] = 1, the unit at that row's pivot.
        let gens: Vec<BitVec> = (0..n)
            .filter(|&f| !is_pivot[f])
            .map(|f| {
                let mut v = BitVec::unit(n, f);
                for (row, &p) in self.basis.rows().iter().zip(&self.pivots) {
                    if row.get(f) {
                        v.set(p, true);
                    }
                }
                v
            })
            .collect();
        SubspaceBasis::from_generators(n, gens).expect("generated vectors have ambient length")
    }

    /// Element with coefficient vector `coeffs` (bit `i` selects basis row `i`).
    pub fn element(&self, coeffs: u64) -> BitVec {
        let mut v = BitVec::zeros(self.ambient_dim);
        for (i, row) in self.basis.rows().iter().enumerate() {
            if (coeffs >> i) & 1 == 1 {
                v.xor_assign_unchecked(row);
            }
        }
        v
    }

    fn check_enum_budget(&self, max_dim: usize) -> Result<(), Gf2Error> {
        if self.dim() > max_dim || self.dim() >= 64 {
            return Err(Gf2Error::BudgetExceeded {
                dim: self.dim(),
                max: max_dim.min(63),
            });
        }
        Ok(())
    }

    /// All 2^dim elements, in Gray-code order starting from zero.
    pub fn elements(&self) -> Result<Vec<BitVec>, Gf2Error> {
        self.check_enum_budget(DEFAULT_MAX_ENUM_DIM)?;
        let mut out = Vec::with_capacity(1 << self.dim());
        let mut v = BitVec::zeros(self.ambient_dim);
        out.push(v.clone());
        for i in 1u64..(1u64 << self.dim()) {
            v.xor_assign_unchecked(self.basis.row(i.trailing_zeros() as usize));
            out.push(v.clone());
        }
        Ok(out)
    }

    /// Minimum weight over nonzero elements by exhaustive enumeration.
    pub fn min_distance(&self) -> Result<usize, Gf2Error> {
        self.min_distance_with(Exec::default(), DEFAULT_MAX_ENUM_DIM)
    }

    /// [`Self::min_distance`] with an explicit execution policy and budget.
    pub fn min_distance_with(&self, exec: Exec, max_dim: usize) -> Result<usize, Gf2Error> {
        if self.dim() == 0 {
            return Err(Gf2Error::ZeroDimension);
        }
        self.check_enum_budget(max_dim)?;
        let dim = self.dim();
        let total: u64 = 1 << dim;
        let chunk_bits = dim.saturating_sub(8).min(dim);
        let chunk_len: u64 = 1 << chunk_bits;
        let chunks = (total / chunk_len) as usize;
        let rows: Vec<&[u64]> = self.basis.rows().iter().map(|r| r.words()).collect();
        let best = exec
            .min_over(0..chunks, |c| {
                let lo = c as u64 * chunk_len;
                let hi = lo + chunk_len;
                // Walk Gray codes gray(lo)..gray(hi-1); consecutive codes differ
                // in basis row trailing_zeros(i).
                let gray = lo ^ (lo >> 1);
                let mut v = self.element(gray);
                let mut best = if lo == 0 { u32::MAX } else { v.weight() as u32 };
                for i in (lo + 1)..hi {
                    v.xor_words(rows[i.trailing_zeros() as usize]);
                    best = best.min(v.weight() as u32);
                }
                best
            })
            .expect("at least one chunk");
        Ok(best as usize)
    }

    /// Smallest subspace containing both.
    pub fn sum(&self, other: &SubspaceBasis) -> Result<SubspaceBasis, Gf2Error> {
        if self.ambient_dim != other.ambient_dim {
            return Err(Gf2Error::LengthMismatch {
                expected: self.ambient_dim,
                found: other.ambient_dim,
            });
        }
        let gens = self
            .basis
            .rows()
            .iter()
            .chain(other.basis.rows())
            .cloned()
            .collect();
        SubspaceBasis::from_generators(self.ambient_dim, gens)
    }

    pub fn intersection(&self, other: &SubspaceBasis) -> Result<SubspaceBasis, Gf2Error> {
        Ok(self.dual().sum(&other.dual())?.dual())
    }

    /// Whether `self ⊆ other`.
    pub fn is_subspace_of(&self, other: &SubspaceBasis) -> Result<bool, Gf2Error> {
        for r in self.basis.rows() {
            if !other.member(r)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Uniformly random `dim`-dimensional subspace of F₂ⁿ.
///
/// Samples `dim` uniform vectors and rejects rank-deficient draws. Every
/// subspace has the same number of ordered bases, so the accepted span is
/// uniform over subspaces.
pub fn random_subspace(n: usize, dim: usize, seed: Seed) -> Result<SubspaceBasis, Gf2Error> {
    if dim > n {
        return Err(Gf2Error::InvalidDimension { n, dim });
    }
    let mut rng = seed.rng();
    loop {
        let gens: Vec<BitVec> = (0..dim)
            .map(|_| BitVec::from_bools(&(0..n).map(|_| rng.random::<bool>()).collect::<Vec<_>>()))
            .collect();
        let s = SubspaceBasis::from_generators(n, gens)?;
        if s.dim() == dim {
            return Ok(s);
        }
    }
}
