//! Exact state-vector layer.
//!
//! Amplitude index `b` of an n-qubit [`DenseState`] is the basis string whose
//! big-endian binary expansion is `b` (see [`BitVec::from_index`]): qubit 0 is
//! the most significant bit and the leftmost character. Index order is
//! therefore lexicographic order of basis strings.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::fmt::g17;
use crate::gf2::{BasisMap, BitVec, Gf2Error, SubspaceBasis};
use crate::seed::Seed;

/// Largest pure state handled densely.
pub const MAX_PURE_QUBITS: usize = 20;
/// Largest density matrix handled densely.
pub const MAX_MIXED_QUBITS: usize = 14;
/// Tolerance for normalization, orthonormality and other invariant checks.
pub const INVARIANT_TOL: f64 = 1e-9;

/// Amplitude loops are split into chunks of this many entries.
const CHUNK: usize = 1 << 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
    #[error("{qubits} qubits exceeds the dense budget of {max}")]
    BudgetExceeded { qubits: usize, max: usize },
    #[error("qubit count mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("expected {expected} amplitudes, found {found}")]
    AmplitudeCount { expected: usize, found: usize },
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("basis states are not orthonormal (Gram deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("error weight {weight} exceeds the tolerance q = {q}")]
    NotTolerated { weight: usize, q: usize },
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("malformed state dump: {0}")]
    Parse(String),
}

fn check_pure_budget(n: usize) -> Result<(), StateError> {
    if n > MAX_PURE_QUBITS {
        return Err(StateError::BudgetExceeded {
            qubits: n,
            max: MAX_PURE_QUBITS,
        });
    }
    Ok(())
}

/// `2^{-k/2}`.
#[inline]
pub(crate) fn inv_sqrt_pow2(k: usize) -> f64 {
    1.0 / ((1u64 << k) as f64).sqrt()
}

/// Parity of `a & b`, as ±1.
#[inline]
fn sign_of(a: usize, b: usize) -> f64 {
    if (a & b).count_ones() & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// An n-qubit state as 2ⁿ complex amplitudes.
///
/// Constructors other than [`DenseState::workspace`] check normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    n: usize,
    amps: Vec<Complex64>,
}

impl DenseState {
    /// `|b⟩` for a basis string `b`.
    pub fn basis(v: &BitVec) -> Result<Self, StateError> {
        check_pure_budget(v.len())?;
        Ok(Self::basis_index(v.len(), v.to_index()))
    }

    pub fn basis_index(n: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[index] = Complex64::new(1.0, 0.0);
        DenseState { n, amps }
    }

    /// Normalized state from raw amplitudes.
    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self, StateError> {
        let st = Self::workspace(n, amps)?;
        let norm = st.norm_sqr();
        if (norm - 1.0).abs() > INVARIANT_TOL {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(st)
    }

    /// Unnormalized vector, e.g. the image of a state under a projector.
    pub fn workspace(n: usize, amps: Vec<Complex64>) -> Result<Self, StateError> {
        check_pure_budget(n)?;
        if amps.len() != 1 << n {
            return Err(StateError::AmplitudeCount {
                expected: 1 << n,
                found: amps.len(),
            });
        }
        Ok(DenseState { n, amps })
    }

    /// Random state with i.i.d. complex Gaussian amplitudes, normalized.
    pub fn random(n: usize, seed: Seed) -> Result<Self, StateError> {
        check_pure_budget(n)?;
        let mut rng = seed.rng();
        let amps: Vec<Complex64> = (0..1usize << n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Ok(DenseState { n, amps }.normalized().expect("Gaussian vector is nonzero"))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn amplitude(&self, v: &BitVec) -> Complex64 {
        self.amps[v.to_index()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= INVARIANT_TOL
    }

    /// Rescaled to unit norm; `None` for the zero vector.
    pub fn normalized(&self) -> Option<DenseState> {
        let norm = self.norm_sqr().sqrt();
        if norm <= f64::MIN_POSITIVE {
            return None;
        }
        Some(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> DenseState {
        DenseState {
            n: self.n,
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_deviation(&self, other: &DenseState) -> f64 {
        if self.n != other.n {
            return f64::INFINITY;
        }
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `self ⊗ other`, with `self` on the leading (high-index) qubits.
    pub fn tensor(&self, other: &DenseState) -> Result<DenseState, StateError> {
        check_pure_budget(self.n + other.n)?;
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        Ok(DenseState {
            n: self.n + other.n,
            amps,
        })
    }

    /// Text dump: one line `<bitstring> <re> <im>` per nonzero amplitude, in
    /// lexicographic order of bit strings, 17 significant digits.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, a) in self.amps.iter().enumerate() {
            if a.re != 0.0 || a.im != 0.0 {
                writeln!(out, "{} {} {}", BitVec::from_index(i, self.n), g17(a.re), g17(a.im))
                    .expect("writing to a String");
            }
        }
        out
    }

    /// Lines of [`DenseState::dump`].
    pub fn dump_lines(&self) -> Vec<String> {
        self.dump().lines().map(str::to_string).collect()
    }

    /// Parses dump lines into an n-qubit state (normalization not required).
    pub fn parse_dump<S: AsRef<str>>(n: usize, lines: &[S]) -> Result<DenseState, StateError> {
        check_pure_budget(n)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        for line in lines {
            let line = line.as_ref().trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [bits, re, im] = parts.as_slice() else {
                return Err(StateError::Parse(format!("expected 3 fields in {line:?}")));
            };
            let v: BitVec = bits.parse()?;
            if v.len() != n {
                return Err(StateError::Parse(format!("basis string {bits} is not {n} bits")));
            }
            let re: f64 = re.parse().map_err(|_| StateError::Parse(format!("bad real part {re:?}")))?;
            let im: f64 = im.parse().map_err(|_| StateError::Parse(format!("bad imaginary part {im:?}")))?;
            amps[v.to_index()] = Complex64::new(re, im);
        }
        Ok(DenseState { n, amps })
    }
}

/// Uniform superposition over the elements of `s`.
pub fn subspace_state(s: &SubspaceBasis) -> Result<DenseState, StateError> {
    let n = s.ambient_dim();
    check_pure_budget(n)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    let a = Complex64::new(inv_sqrt_pow2(s.dim()), 0.0);
    for v in s.elements()? {
        amps[v.to_index()] = a;
    }
    Ok(DenseState { n, amps })
}

/// Global phase tracked by a [`CosetLabel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_parity(odd: bool) -> Sign {
        if odd {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn times(self, other: Sign) -> Sign {
        Sign::from_parity((self == Sign::Minus) != (other == Sign::Minus))
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        s.value() as i8
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            _ => Err(format!("sign must be 1 or -1, got {v}")),
        }
    }
}

/// Symbolic state `sign · X^e Z^{e′} |C⟩` for a code `C` supplied at use.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CosetLabel {
    pub e: BitVec,
    pub e_prime: BitVec,
    pub sign: Sign,
}

impl CosetLabel {
    /// The uncorrupted codeword `|C⟩`.
    pub fn fresh(n: usize) -> Self {
        CosetLabel {
            e: BitVec::zeros(n),
            e_prime: BitVec::zeros(n),
            sign: Sign::Plus,
        }
    }

    /// Arbitrary-weight label.
    pub fn raw(e: BitVec, e_prime: BitVec) -> Result<Self, StateError> {
        if e.len() != e_prime.len() {
            return Err(StateError::SizeMismatch {
                left: e.len(),
                right: e_prime.len(),
            });
        }
        Ok(CosetLabel {
            e,
            e_prime,
            sign: Sign::Plus,
        })
    }

    /// Label whose errors both have weight at most `q`.
    pub fn tolerated(e: BitVec, e_prime: BitVec, q: usize) -> Result<Self, StateError> {
        for w in [e.weight(), e_prime.weight()] {
            if w > q {
                return Err(StateError::NotTolerated { weight: w, q });
            }
        }
        Self::raw(e, e_prime)
    }

    pub fn n(&self) -> usize {
        self.e.len()
    }

    pub fn is_tolerated(&self, q: usize) -> bool {
        self.e.weight() <= q && self.e_prime.weight() <= q
    }

    /// Label of `X^a Z^{a′}` applied to this state.
    ///
    /// `Z^{a′} X^e = (−1)^{a′·e} X^e Z^{a′}`, so the errors add and the sign
    /// picks up `a′·e`.
    pub fn then_pauli(&self, a: &BitVec, a_prime: &BitVec) -> Result<Self, StateError> {
        let odd = a_prime.dot(&self.e)?;
        Ok(CosetLabel {
            e: self.e.xor(a)?,
            e_prime: self.e_prime.xor(a_prime)?,
            sign: self.sign.times(Sign::from_parity(odd)),
        })
    }
}

/// Dense amplitudes of `sign · X^e Z^{e′}|C⟩`: `sign·(−1)^{v·e′}/√|C|` on `v+e`.
pub fn coset_to_dense(code: &SubspaceBasis, label: &CosetLabel) -> Result<DenseState, StateError> {
    let n = code.ambient_dim();
    if label.n() != n {
        return Err(StateError::SizeMismatch { left: n, right: label.n() });
    }
    check_pure_budget(n)?;
    let e = label.e.to_index();
    let ez = label.e_prime.to_index();
    let mag = inv_sqrt_pow2(code.dim()) * label.sign.value();
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    for v in code.elements()? {
        let vi = v.to_index();
        amps[vi ^ e] = Complex64::new(mag * sign_of(vi, ez), 0.0);
    }
    Ok(DenseState { n, amps })
}

/// `X^e Z^{e′}` as an operator: `amp′[b ⊕ e] = (−1)^{b·e′} amp[b]`.
pub fn apply_pauli(st: &DenseState, e: &BitVec, e_prime: &BitVec) -> Result<DenseState, StateError> {
    apply_pauli_with(Exec::default(), st, e, e_prime)
}

pub fn apply_pauli_with(
    exec: Exec,
    st: &DenseState,
    e: &BitVec,
    e_prime: &BitVec,
) -> Result<DenseState, StateError> {
    for len in [e.len(), e_prime.len()] {
        if len != st.n {
            return Err(StateError::SizeMismatch { left: st.n, right: len });
        }
    }
    let (x, z) = (e.to_index(), e_prime.to_index());
    let mut out = vec![Complex64::new(0.0, 0.0); st.dim()];
    exec.for_each_chunk_mut(&mut out, CHUNK, |ci, chunk| {
        let base = ci * CHUNK;
        for (k, slot) in chunk.iter_mut().enumerate() {
            let src = (base + k) ^ x;
            *slot = st.amps[src] * sign_of(src, z);
        }
    });
    Ok(DenseState { n: st.n, amps: out })
}

/// `H^{⊗n}`, normalized.
pub fn hadamard_all(st: &DenseState) -> DenseState {
    hadamard_all_with(Exec::default(), st)
}

pub fn hadamard_all_with(exec: Exec, st: &DenseState) -> DenseState {
    let mut amps = st.amps.clone();
    walsh_hadamard_in_place(exec, &mut amps);
    let scale = inv_sqrt_pow2(st.n);
    exec.for_each_chunk_mut(&mut amps, CHUNK, |_, c| c.iter_mut().for_each(|a| *a *= scale));
    DenseState { n: st.n, amps }
}

fn butterfly(lo: &mut [Complex64], hi: &mut [Complex64]) {
    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = x + y;
        *b = x - y;
    }
}

/// Unnormalized fast Walsh–Hadamard transform.
fn walsh_hadamard_in_place(exec: Exec, data: &mut [Complex64]) {
    let len = data.len();
    let mut h = 1;
    while h < len {
        let block = 2 * h;
        if block <= CHUNK || len / block >= 16 {
            exec.for_each_chunk_mut(data, block, |_, blk| {
                let (lo, hi) = blk.split_at_mut(h);
                butterfly(lo, hi);
            });
        } else {
            for blk in data.chunks_mut(block) {
                let (lo, hi) = blk.split_at_mut(h);
                exec.for_each_zip_chunk_mut(lo, hi, CHUNK, butterfly);
            }
        }
        h = block;
    }
}

/// `U_B`: moves amplitude of `|x⟩` to `|Σ x_i u_i⟩`.
pub fn apply_basis_map_state(b: &BasisMap, st: &DenseState) -> Result<DenseState, StateError> {
    if b.ambient_dim() != st.n {
        return Err(StateError::SizeMismatch {
            left: st.n,
            right: b.ambient_dim(),
        });
    }
    let table = b.index_table();
    let mut out = vec![Complex64::new(0.0, 0.0); st.dim()];
    for (src, &dst) in table.iter().enumerate() {
        out[dst] = st.amps[src];
    }
    Ok(DenseState { n: st.n, amps: out })
}

/// Conjugate-coding product state `|x⟩_θ = ⊗ H^{θ_i}|x_i⟩`.
pub fn conjugate_coding_state(x: &BitVec, theta: &BitVec) -> Result<DenseState, StateError> {
    let n = x.len();
    if theta.len() != n {
        return Err(StateError::SizeMismatch { left: n, right: theta.len() });
    }
    check_pure_budget(n)?;
    let (xi, ti) = (x.to_index(), theta.to_index());
    let mag = inv_sqrt_pow2(theta.weight());
    let amps = (0..1usize << n)
        .map(|y| {
            // Computational-basis qubits must match x; Hadamard qubits carry
            // the phase (−1)^{x_i y_i}.
            if (y ^ xi) & !ti != 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(mag * sign_of(xi & ti, y), 0.0)
            }
        })
        .collect();
    Ok(DenseState { n, amps })
}

/// `⟨a|b⟩`.
pub fn inner(a: &DenseState, b: &DenseState) -> Result<Complex64, StateError> {
    if a.n != b.n {
        return Err(StateError::SizeMismatch { left: a.n, right: b.n });
    }
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// A density matrix stored densely, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    n: usize,
    matrix: Vec<Complex64>,
}

fn check_mixed_budget(n: usize) -> Result<(), StateError> {
    if n > MAX_MIXED_QUBITS {
        return Err(StateError::BudgetExceeded {
            qubits: n,
            max: MAX_MIXED_QUBITS,
        });
    }
    Ok(())
}

impl MixedState {
    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &DenseState) -> Result<Self, StateError> {
        Self::from_ensemble(&[(1.0, psi.clone())])
    }

    /// `I / 2ⁿ`.
    pub fn maximally_mixed(n: usize) -> Result<Self, StateError> {
        check_mixed_budget(n)?;
        let d = 1usize << n;
        let mut matrix = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            matrix[i * d + i] = Complex64::new(1.0 / d as f64, 0.0);
        }
        Ok(MixedState { n, matrix })
    }

    /// `Σ p_i |ψ_i⟩⟨ψ_i|`, validated.
    pub fn from_ensemble(parts: &[(f64, DenseState)]) -> Result<Self, StateError> {
        let n = parts
            .first()
            .map(|(_, s)| s.n)
            .ok_or_else(|| StateError::InvalidDensity("empty ensemble".into()))?;
        check_mixed_budget(n)?;
        let d = 1usize << n;
        let mut matrix = vec![Complex64::new(0.0, 0.0); d * d];
        for (p, s) in parts {
            if s.n != n {
                return Err(StateError::SizeMismatch { left: n, right: s.n });
            }
            for i in 0..d {
                let ai = s.amps[i] * *p;
                if ai == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    matrix[i * d + j] += ai * s.amps[j].conj();
                }
            }
        }
        let m = MixedState { n, matrix };
        m.validate()?;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[i * self.dim() + j]
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.entry(i, i)).sum()
    }

    /// Checks Hermiticity, unit trace and positive semidefiniteness to 1e−9.
    pub fn validate(&self) -> Result<(), StateError> {
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                if (self.entry(i, j) - self.entry(j, i).conj()).norm() > INVARIANT_TOL {
                    return Err(StateError::InvalidDensity(format!("not Hermitian at ({i},{j})")));
                }
            }
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > INVARIANT_TOL {
            return Err(StateError::InvalidDensity(format!("trace {tr}")));
        }
        let min = hermitian_eigenvalues(d, &self.matrix)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -INVARIANT_TOL {
            return Err(StateError::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `⟨ψ|ρ|ψ⟩` (real part; the imaginary part vanishes for Hermitian ρ).
    pub fn expectation(&self, psi: &DenseState) -> Result<f64, StateError> {
        if psi.n != self.n {
            return Err(StateError::SizeMismatch { left: self.n, right: psi.n });
        }
        let d = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..d {
            let ci = psi.amps[i].conj();
            if ci == Complex64::new(0.0, 0.0) {
                continue;
            }
            let row = &self.matrix[i * d..(i + 1) * d];
            let rho_psi: Complex64 = row.iter().zip(&psi.amps).map(|(r, a)| r * a).sum();
            acc += ci * rho_psi;
        }
        Ok(acc.re)
    }

    /// Column `j` of ρ as an unnormalized vector.
    pub fn column(&self, j: usize) -> DenseState {
        let d = self.dim();
        DenseState {
            n: self.n,
            amps: (0..d).map(|i| self.matrix[i * d + j]).collect(),
        }
    }
}

/// Eigenvalues of a Hermitian `dim × dim` row-major matrix, ascending.
pub fn hermitian_eigenvalues(dim: usize, entries: &[Complex64]) -> Vec<f64> {
    let m = DMatrix::from_row_slice(dim, dim, entries);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// A pure or mixed state, for [`fidelity_with_span`].
#[derive(Clone, Copy, Debug)]
pub enum StateRef<'a> {
    Pure(&'a DenseState),
    Mixed(&'a MixedState),
}

impl<'a> From<&'a DenseState> for StateRef<'a> {
    fn from(s: &'a DenseState) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a MixedState> for StateRef<'a> {
    fn from(s: &'a MixedState) -> Self {
        StateRef::Mixed(s)
    }
}

impl StateRef<'_> {
    fn n(&self) -> usize {
        match self {
            StateRef::Pure(s) => s.n,
            StateRef::Mixed(m) => m.n,
        }
    }

    /// `|⟨b|ψ⟩|²` or `⟨b|ρ|b⟩`.
    fn weight_on(&self, b: &DenseState) -> Result<f64, StateError> {
        match self {
            StateRef::Pure(s) => Ok(inner(b, s)?.norm_sqr()),
            StateRef::Mixed(m) => m.expectation(b),
        }
    }
}

/// Largest Gram-matrix deviation from the identity.
pub fn orthonormality_defect(basis: &[DenseState]) -> Result<f64, StateError> {
    let mut worst: f64 = 0.0;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().skip(i) {
            let g = inner(a, b)?;
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - Complex64::new(target, 0.0)).norm());
        }
    }
    Ok(worst)
}

/// Fidelity with the span of an orthonormal family:
/// `√(Σ_i |⟨b_i|ψ⟩|²)` for pure input, `√(Σ_i ⟨b_i|ρ|b_i⟩)` for mixed.
pub fn fidelity_with_span<'a>(
    state: impl Into<StateRef<'a>>,
    basis: &[DenseState],
) -> Result<f64, StateError> {
    let state = state.into();
    let defect = orthonormality_defect(basis)?;
    if defect > INVARIANT_TOL {
        return Err(StateError::NotOrthonormal(defect));
    }
    let mut total = 0.0;
    for b in basis {
        if b.n != state.n() {
            return Err(StateError::SizeMismatch { left: state.n(), right: b.n });
        }
        total += state.weight_on(b)?;
    }
    Ok(total.max(0.0).sqrt())
}

/// Fidelity of a 2n-qubit pure state with `span(A) ⊗ span(B)`.
///
/// Orthonormality is checked per factor, which is equivalent to checking the
/// product family and far cheaper.
pub fn fidelity_with_product_span(
    joint: &DenseState,
    left: &[DenseState],
    right: &[DenseState],
) -> Result<f64, StateError> {
    for fam in [left, right] {
        let defect = orthonormality_defect(fam)?;
        if defect > INVARIANT_TOL {
            return Err(StateError::NotOrthonormal(defect));
        }
    }
    let (Some(l0), Some(r0)) = (left.first(), right.first()) else {
        return Ok(0.0);
    };
    if l0.n + r0.n != joint.n {
        return Err(StateError::SizeMismatch {
            left: joint.n,
            right: l0.n + r0.n,
        });
    }
    let rd = r0.dim();
    let mut total = 0.0;
    for a in left {
        // Contract the left register: φ_a = (⟨a| ⊗ I)|ψ⟩.
        let mut phi = vec![Complex64::new(0.0, 0.0); rd];
        for (i, ai) in a.amps.iter().enumerate() {
            if *ai == Complex64::new(0.0, 0.0) {
                continue;
            }
            let c = ai.conj();
            for (slot, x) in phi.iter_mut().zip(&joint.amps[i * rd..(i + 1) * rd]) {
                *slot += c * x;
            }
        }
        for b in right {
            let ov: Complex64 = b.amps.iter().zip(&phi).map(|(x, y)| x.conj() * y).sum();
            total += ov.norm_sqr();
        }
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{enumerate_errors, search_applicable_code, DEFAULT_MAX_ATTEMPTS};
    use crate::gf2::testing::bv;
    use crate::gf2::{random_basis, random_subspace};
    use crate::reference;
    use rand::Rng;

    fn random_bits(n: usize, rng: &mut impl Rng) -> BitVec {
        BitVec::from_index(rng.random_range(0..1usize << n), n)
    }

    #[test]
    fn subspace_state_examples() {
        let s = SubspaceBasis::from_generators(2, vec![bv("11")]).unwrap();
        let st = subspace_state(&s).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((st.amplitude(&bv("00")).re - h).abs() < 1e-15);
        assert!((st.amplitude(&bv("11")).re - h).abs() < 1e-15);
        assert_eq!(st.amplitude(&bv("01")).norm(), 0.0);

        let c = subspace_state(&reference::code()).unwrap();
        let support: Vec<String> = c.dump_lines().iter().map(|l| l[..6].to_string()).collect();
        let mut listed: Vec<String> = reference::CODEWORDS.iter().map(|s| s.to_string()).collect();
        listed.sort();
        assert_eq!(support, listed);
        for w in reference::CODEWORDS {
            assert!((c.amplitude(&bv(w)).re - 1.0 / 8f64.sqrt()).abs() < 1e-12);
        }

        let z = subspace_state(&SubspaceBasis::zero(3)).unwrap();
        assert_eq!(z, DenseState::basis(&bv("000")).unwrap());
    }

    #[test]
    fn coset_examples() {
        let code = reference::code();
        let fresh = coset_to_dense(&code, &CosetLabel::fresh(6)).unwrap();
        assert_eq!(fresh, subspace_state(&code).unwrap());

        let shifted = coset_to_dense(&code, &CosetLabel::raw(bv("100000"), bv("000000")).unwrap()).unwrap();
        for w in reference::CODEWORDS {
            let v = &bv(w) + &bv("100000");
            assert!((shifted.amplitude(&v).re - 1.0 / 8f64.sqrt()).abs() < 1e-12);
        }
        let phased = coset_to_dense(&code, &CosetLabel::raw(bv("000000"), bv("000001")).unwrap()).unwrap();
        for w in reference::CODEWORDS {
            let expected = if w.ends_with('1') { -1.0 } else { 1.0 } / 8f64.sqrt();
            assert!((phased.amplitude(&bv(w)).re - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn pauli_examples() {
        let code = reference::code();
        let c = subspace_state(&code).unwrap();
        let z = BitVec::zeros(6);
        assert_eq!(apply_pauli(&c, &z, &z).unwrap(), c);
        let mut rng = Seed(11).rng();
        for _ in 0..20 {
            let (e, ez) = (random_bits(6, &mut rng), random_bits(6, &mut rng));
            let via_op = apply_pauli(&c, &e, &ez).unwrap();
            let via_label = coset_to_dense(&code, &CosetLabel::raw(e.clone(), ez.clone()).unwrap()).unwrap();
            assert!(via_op.max_deviation(&via_label) < 1e-12);

            // (X^e Z^{e'})² = (−1)^{e·e'} I.
            let twice = apply_pauli(&via_op, &e, &ez).unwrap();
            let phase = if e.dot(&ez).unwrap() { -1.0 } else { 1.0 };
            assert!(twice.max_deviation(&c.scaled(Complex64::new(phase, 0.0))) < 1e-15);

            let seq = apply_pauli_with(Exec::Sequential, &c, &e, &ez).unwrap();
            assert_eq!(seq, via_op);
        }
        assert!(apply_pauli(&c, &bv("101"), &z).is_err());
    }

    #[test]
    fn label_composition_matches_dense() {
        let code = reference::code();
        let mut rng = Seed(5).rng();
        for _ in 0..30 {
            let l = CosetLabel::raw(random_bits(6, &mut rng), random_bits(6, &mut rng)).unwrap();
            let (a, az) = (random_bits(6, &mut rng), random_bits(6, &mut rng));
            let dense = apply_pauli(&coset_to_dense(&code, &l).unwrap(), &a, &az).unwrap();
            let symbolic = coset_to_dense(&code, &l.then_pauli(&a, &az).unwrap()).unwrap();
            assert!(dense.max_deviation(&symbolic) < 1e-12);
        }
    }

    #[test]
    fn hadamard_examples() {
        let zero = DenseState::basis_index(5, 0);
        let plus = hadamard_all(&zero);
        for a in plus.amplitudes() {
            assert!((a.re - (1.0f64 / 32.0).sqrt()).abs() < 1e-15);
        }
        let code = reference::code();
        let hc = hadamard_all(&subspace_state(&code).unwrap());
        assert!(hc.max_deviation(&subspace_state(&code.dual()).unwrap()) < 1e-12);

        let r = DenseState::random(9, Seed(3)).unwrap();
        let back = hadamard_all(&hadamard_all(&r));
        assert!(back.max_deviation(&r) < 1e-12);
        assert!((hadamard_all(&r).norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hadamard_paths_agree_on_large_state() {
        // 2^14 amplitudes crosses the chunked code path.
        let r = DenseState::random(14, Seed(8)).unwrap();
        let a = hadamard_all_with(Exec::Sequential, &r);
        let b = hadamard_all_with(Exec::Parallel, &r);
        assert_eq!(a, b);
        assert!(hadamard_all(&a).max_deviation(&r) < 1e-12);
    }

    #[test]
    fn hadamard_swaps_coset_roles() {
        let spec = search_applicable_code(8, 1, Seed(2), DEFAULT_MAX_ATTEMPTS).unwrap();
        let mut rng = Seed(4).rng();
        for _ in 0..20 {
            let (e, ez) = (random_bits(8, &mut rng), random_bits(8, &mut rng));
            let st = coset_to_dense(spec.code(), &CosetLabel::raw(e.clone(), ez.clone()).unwrap()).unwrap();
            let mut swapped = CosetLabel::raw(ez.clone(), e.clone()).unwrap();
            swapped.sign = Sign::from_parity(e.dot(&ez).unwrap());
            let expect = coset_to_dense(spec.dual_code(), &swapped).unwrap();
            assert!(hadamard_all(&st).max_deviation(&expect) < 1e-12);
        }
    }

    #[test]
    fn inner_product_examples() {
        let r = DenseState::random(6, Seed(1)).unwrap();
        assert!((inner(&r, &r).unwrap().re - 1.0).abs() < 1e-12);
        assert!(inner(&r, &DenseState::basis_index(5, 0)).is_err());

        // Two half-dimensional codes meeting in a hyperplane of each.
        let c = reference::code();
        let els = c.elements().unwrap();
        let hyper = SubspaceBasis::from_generators(6, vec![els[1].clone(), els[2].clone()]).unwrap();
        let extra = (0..64)
            .map(|i| BitVec::from_index(i, 6))
            .find(|v| !c.member(v).unwrap())
            .unwrap();
        let mut gens = hyper.basis().rows().to_vec();
        gens.push(extra);
        let d = SubspaceBasis::from_generators(6, gens).unwrap();
        assert_eq!(c.intersection(&d).unwrap().dim(), 2);
        let ov = inner(&subspace_state(&c).unwrap(), &subspace_state(&d).unwrap()).unwrap();
        assert!((ov.norm() - 0.5).abs() < 1e-12);
    }

    fn tolerated_family(code: &SubspaceBasis, q: usize) -> Vec<DenseState> {
        let errs = enumerate_errors(code.ambient_dim(), q).unwrap();
        let mut out = Vec::new();
        for e in errs.iter() {
            for ez in errs.iter() {
                out.push(coset_to_dense(code, &CosetLabel::raw(e.clone(), ez.clone()).unwrap()).unwrap());
            }
        }
        out
    }

    #[test]
    fn tolerated_cosets_are_orthonormal() {
        let fam = tolerated_family(&reference::code(), 1);
        assert_eq!(fam.len(), 49);
        assert!(orthonormality_defect(&fam).unwrap() < 1e-10);
    }

    #[test]
    fn fidelity_examples() {
        let fam = tolerated_family(&reference::code(), 1);
        assert!((fidelity_with_span(&fam[10], &fam).unwrap() - 1.0).abs() < 1e-12);
        let outside = coset_to_dense(&reference::code(), &CosetLabel::raw(bv("000111"), bv("000000")).unwrap()).unwrap();
        assert!(fidelity_with_span(&outside, &fam).unwrap() < 1e-12);
        let mixed = MixedState::maximally_mixed(6).unwrap();
        let f = fidelity_with_span(&mixed, &fam).unwrap();
        assert!((f - (49.0f64 / 64.0).sqrt()).abs() < 1e-12);

        let bad = vec![fam[0].clone(), fam[0].clone()];
        assert!(matches!(fidelity_with_span(&fam[0], &bad), Err(StateError::NotOrthonormal(_))));
    }

    #[test]
    fn product_span_fidelity_matches_explicit_products() {
        let code = reference::code();
        let fam: Vec<DenseState> = tolerated_family(&code, 1).into_iter().step_by(7).collect();
        let joint = DenseState::random(12, Seed(6)).unwrap();
        let fast = fidelity_with_product_span(&joint, &fam, &fam).unwrap();
        let products: Vec<DenseState> = fam
            .iter()
            .flat_map(|a| fam.iter().map(move |b| a.tensor(b).unwrap()))
            .collect();
        let slow = fidelity_with_span(&joint, &products).unwrap();
        assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn fidelity_triangle_inequality_on_random_pure_states() {
        // For pure ρ = |a⟩⟨a|, σ = |b⟩⟨b|: F(ρ,σ) = |⟨a|b⟩|. Pick ψ, φ close to
        // a, b and ε as the larger infidelity.
        let mut rng = Seed(99).rng();
        for t in 0..1000u64 {
            let n = 1 + (t as usize % 4);
            let a = DenseState::random(n, Seed(t).derive(1)).unwrap();
            let b = DenseState::random(n, Seed(t).derive(2)).unwrap();
            let mut mix = |s: &DenseState, k: u64| {
                let noise = DenseState::random(n, Seed(t).derive(k)).unwrap();
                let w: f64 = rng.random_range(0.0..0.5);
                let amps: Vec<Complex64> = s
                    .amplitudes()
                    .iter()
                    .zip(noise.amplitudes())
                    .map(|(x, y)| x * (1.0 - w) + y * w)
                    .collect();
                DenseState::workspace(n, amps).unwrap().normalized().unwrap()
            };
            let psi = mix(&a, 3);
            let phi = mix(&b, 4);
            let eps = (1.0 - inner(&psi, &a).unwrap().norm_sqr()).max(1.0 - inner(&phi, &b).unwrap().norm_sqr());
            let f = inner(&a, &b).unwrap().norm();
            assert!(f <= inner(&psi, &phi).unwrap().norm() + 2.0 * eps.max(0.0).powf(0.25) + 1e-12);
        }
    }

    #[test]
    fn mixed_state_validation() {
        let r = DenseState::random(3, Seed(2)).unwrap();
        let m = MixedState::from_pure(&r).unwrap();
        assert!((m.expectation(&r).unwrap() - 1.0).abs() < 1e-12);
        assert!(MixedState::maximally_mixed(4).unwrap().validate().is_ok());
        let bad = MixedState::from_ensemble(&[(2.0, r.clone())]);
        assert!(matches!(bad, Err(StateError::InvalidDensity(_))));
        assert!(MixedState::maximally_mixed(15).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let st = DenseState::random(5, Seed(12)).unwrap();
        let lines = st.dump_lines();
        assert_eq!(lines.len(), 32);
        let back = DenseState::parse_dump(5, &lines).unwrap();
        assert_eq!(back, st);
        assert_eq!(back.dump(), st.dump());
        let c = subspace_state(&reference::code()).unwrap();
        assert_eq!(c.dump_lines()[0], "000000 0.35355339059327373 0");
        assert!(DenseState::parse_dump(3, &["01 1 0"]).is_err());
    }

    #[test]
    fn conjugate_coding_is_a_coset_state() {
        // U_B|x⟩_θ = |A_{t,t′}⟩ with A = span{u_i : θ_i = 1},
        // t = Σ_{θ_i=0} x_i u_i, t′ = Σ_{θ_i=1} x_i u^i.
        let mut rng = Seed(21).rng();
        for n in [2usize, 4, 6] {
            for trial in 0..10u64 {
                let b = random_basis(n, Seed(trial).derive(n as u64));
                let mut pos: Vec<usize> = (0..n).collect();
                rand::seq::SliceRandom::shuffle(pos.as_mut_slice(), &mut rng);
                let theta = BitVec::from_ones(n, pos[..n / 2].iter().copied());
                let x = random_bits(n, &mut rng);
                let dual = b.dual_basis().unwrap();
                let mut t = BitVec::zeros(n);
                let mut tp = BitVec::zeros(n);
                for i in x.iter_ones() {
                    if theta.get(i) {
                        tp += dual.row(i);
                    } else {
                        t += b.column(i);
                    }
                }
                let a = SubspaceBasis::from_generators(
                    n,
                    theta.iter_ones().map(|i| b.column(i).clone()).collect(),
                )
                .unwrap();
                let lhs = apply_basis_map_state(&b, &conjugate_coding_state(&x, &theta).unwrap()).unwrap();
                let rhs = coset_to_dense(&a, &CosetLabel::raw(t, tp).unwrap()).unwrap();
                assert!(lhs.max_deviation(&rhs) < 1e-12, "n={n} trial={trial}");
            }
        }
        let _ = random_subspace(2, 1, Seed(0));
    }
}
