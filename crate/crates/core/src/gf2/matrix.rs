use std::fmt;

use super::{BitVec, Gf2Error};

/// Dense row-major matrix over GF(2); each row is a packed [`BitVec`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gf2Matrix {
    cols: usize,
    rows: Vec<BitVec>,
}

/// Result of Gauss-Jordan elimination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Echelon {
    /// Reduced row-echelon form with zero rows dropped.
    pub matrix: Gf2Matrix,
    /// Pivot column of each remaining row, strictly increasing.
    pub pivots: Vec<usize>,
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Gf2Matrix {
            cols,
            rows: vec![BitVec::zeros(cols); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        Gf2Matrix {
            cols: n,
            rows: (0..n).map(|i| BitVec::unit(n, i)).collect(),
        }
    }

    /// All rows must have length `cols`.
    pub fn from_rows(cols: usize, rows: Vec<BitVec>) -> Result<Self, Gf2Error> {
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Gf2Error::LengthMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        Ok(Gf2Matrix { cols, rows })
    }

    /// Matrix whose `j`-th column is `columns[j]`; all columns share one length.
    pub fn from_columns(num_rows: usize, columns: &[BitVec]) -> Result<Self, Gf2Error> {
        let mut m = Gf2Matrix::zeros(num_rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.len() != num_rows {
                return Err(Gf2Error::LengthMismatch {
                    expected: num_rows,
                    found: c.len(),
                });
            }
            for i in c.iter_ones() {
                m.rows[i].set(j, true);
            }
        }
        Ok(m)
    }

    /// Parses rows given as '0'/'1' strings of equal length.
    pub fn parse_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self, Gf2Error> {
        let parsed = rows
            .iter()
            .map(|s| s.as_ref().parse::<BitVec>())
            .collect::<Result<Vec<_>, _>>()?;
        let cols = parsed.first().map_or(0, BitVec::len);
        Self::from_rows(cols, parsed)
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &BitVec {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[BitVec] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<BitVec> {
        self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].get(j)
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.rows[i].set(j, value);
    }

    pub fn column(&self, j: usize) -> BitVec {
        BitVec::from_ones(
            self.rows.len(),
            self.rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r.get(j))
                .map(|(i, _)| i),
        )
    }

    pub fn transpose(&self) -> Gf2Matrix {
        let mut t = Gf2Matrix::zeros(self.cols, self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            for j in r.iter_ones() {
                t.rows[j].set(i, true);
            }
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(BitVec::is_zero)
    }

    /// `self · v`: entry `i` is the inner product of row `i` with `v`.
    pub fn mul_vec(&self, v: &BitVec) -> Result<BitVec, Gf2Error> {
        if v.len() != self.cols {
            return Err(Gf2Error::LengthMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok(BitVec::from_ones(
            self.rows.len(),
            self.rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r.dot_unchecked(v))
                .map(|(i, _)| i),
        ))
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Gf2Matrix) -> Result<Gf2Matrix, Gf2Error> {
        if self.cols != other.rows.len() {
            return Err(Gf2Error::ShapeMismatch {
                left: (self.rows.len(), self.cols),
                right: (other.rows.len(), other.cols),
            });
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut acc = BitVec::zeros(other.cols);
                for k in r.iter_ones() {
                    acc.xor_assign_unchecked(&other.rows[k]);
                }
                acc
            })
            .collect();
        Ok(Gf2Matrix {
            cols: other.cols,
            rows,
        })
    }

    /// Gauss-Jordan elimination.
    pub fn echelon(&self) -> Echelon {
        let mut rows = self.rows.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == rows.len() {
                break;
            }
            let Some(p) = (r..rows.len()).find(|&i| rows[i].get(c)) else {
                continue;
            };
            rows.swap(r, p);
            let pivot_row = rows[r].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != r && row.get(c) {
                    row.xor_assign_unchecked(&pivot_row);
                }
            }
            pivots.push(c);
            r += 1;
        }
        rows.truncate(r);
        Echelon {
            matrix: Gf2Matrix {
                cols: self.cols,
                rows,
            },
            pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.echelon().rank()
    }

    /// Inverse of a square matrix.
    pub fn inverse(&self) -> Result<Gf2Matrix, Gf2Error> {
        let n = self.rows.len();
        if n != self.cols {
            return Err(Gf2Error::ShapeMismatch {
                left: (n, self.cols),
                right: (n, self.cols),
            });
        }
        // Row-reduce [A | I].
        let aug_rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.concat(&BitVec::unit(n, i)))
            .collect();
        let aug = Gf2Matrix {
            cols: 2 * n,
            rows: aug_rows,
        };
        let ech = aug.echelon();
        if ech.rank() < n || ech.pivots.iter().take(n).enumerate().any(|(i, &p)| p != i) {
            return Err(Gf2Error::NotInvertible);
        }
        let rows = ech
            .matrix
            .rows
            .iter()
            .map(|r| r.slice(n, 2 * n))
            .collect();
        Ok(Gf2Matrix { cols: n, rows })
    }
}

/// Reduced row-echelon form (zero rows dropped) and rank.
pub fn rref(m: &Gf2Matrix) -> (Gf2Matrix, usize) {
    let e = m.echelon();
    let rank = e.rank();
    (e.matrix, rank)
}

impl fmt::Display for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf2Matrix[{}x{}]", self.rows.len(), self.cols)?;
        f.debug_list().entries(self.rows.iter().map(|r| r.to_string())).finish()
    }
}
