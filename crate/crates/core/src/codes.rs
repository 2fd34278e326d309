//! Applicable CSS codes: search, certification, syndrome tables, tolerated
//! error sets and the closed-form bounds.
//!
//! A code `C ⊆ F₂ⁿ` is *applicable* for tolerance `q` when `dim C = n/2` and
//! both `d(C)` and `d(C⊥)` are at least `2q+1`. Taking `C₁ = C₂ = C` in the CSS
//! construction then gives a code with a single codeword `|C⟩` that corrects
//! `q` bit flips and `q` phase flips.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::gf2::{random_subspace, BitVec, Gf2Error, Gf2Matrix, SubspaceBasis, DEFAULT_MAX_ENUM_DIM};
use crate::seed::Seed;

/// Default cap on rejection-sampling attempts in [`search_applicable_code`].
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

/// Default cap on the number of vectors [`enumerate_errors`] may produce.
pub const DEFAULT_MAX_ERRORS: u128 = 1 << 22;

/// Distance reported for a zero subspace, which has no nonzero codeword.
pub const NO_NONZERO_CODEWORD: usize = usize::MAX;

/// Format tag written into CodeSpec files.
pub const CODESPEC_FORMAT: &str = "qmoney-codespec/1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodeError {
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("no applicable code found for n={n}, q={q} after {attempts} attempts")]
    NotFound { n: usize, q: usize, attempts: usize },
    #[error("enumeration of {count} vectors exceeds the budget of {max}")]
    BudgetExceeded { count: u128, max: u128 },
    #[error("integer overflow while counting error patterns for n={n}, q={q}")]
    Overflow { n: usize, q: usize },
    #[error("syndrome {syndrome} is shared by errors {first} and {second}")]
    SyndromeCollision {
        syndrome: BitVec,
        first: BitVec,
        second: BitVec,
    },
    #[error("code is not applicable: {0}")]
    NotApplicable(String),
    #[error("malformed code file: {0}")]
    Format(String),
}

fn distance_or_none(s: &SubspaceBasis, exec: Exec) -> Result<usize, Gf2Error> {
    if s.dim() == 0 {
        Ok(NO_NONZERO_CODEWORD)
    } else {
        s.min_distance_with(exec, DEFAULT_MAX_ENUM_DIM)
    }
}

fn fmt_distance(d: usize) -> String {
    if d == NO_NONZERO_CODEWORD {
        "inf".into()
    } else {
        d.to_string()
    }
}

/// A code together with its dual, parity checks, distances and tolerance.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CodeSpec {
    n: usize,
    q: usize,
    code: SubspaceBasis,
    dual_code: SubspaceBasis,
    d_primal: usize,
    d_dual: usize,
    parity_primal: Gf2Matrix,
    parity_dual: Gf2Matrix,
}

impl CodeSpec {
    /// Computes dual, parity checks and distances for `code` without
    /// requiring membership in W; run [`certify`] to check it.
    pub fn assemble(code: SubspaceBasis, q: usize) -> Result<Self, CodeError> {
        let n = code.ambient_dim();
        let dual_code = code.dual();
        let d_primal = distance_or_none(&code, Exec::default())?;
        let d_dual = distance_or_none(&dual_code, Exec::default())?;
        Ok(CodeSpec {
            n,
            q,
            parity_primal: dual_code.basis().clone(),
            parity_dual: code.basis().clone(),
            code,
            dual_code,
            d_primal,
            d_dual,
        })
    }

    /// [`CodeSpec::assemble`] followed by [`certify`]; fails unless the code is in W.
    pub fn certified(code: SubspaceBasis, q: usize) -> Result<Self, CodeError> {
        let spec = Self::assemble(code, q)?;
        let report = certify(&spec);
        if !report.passed() {
            return Err(CodeError::NotApplicable(report.failures().join("; ")));
        }
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn code(&self) -> &SubspaceBasis {
        &self.code
    }

    pub fn dual_code(&self) -> &SubspaceBasis {
        &self.dual_code
    }

    pub fn d_primal(&self) -> usize {
        self.d_primal
    }

    pub fn d_dual(&self) -> usize {
        self.d_dual
    }

    /// `H_C`: rows span `C⊥`, so `H_C · v = 0` exactly for `v ∈ C`.
    pub fn parity_primal(&self) -> &Gf2Matrix {
        &self.parity_primal
    }

    /// `H_{C⊥}`: rows span `C`.
    pub fn parity_dual(&self) -> &Gf2Matrix {
        &self.parity_dual
    }

    /// The same code with a different tolerance (not re-certified).
    pub fn with_q(&self, q: usize) -> CodeSpec {
        CodeSpec { q, ..self.clone() }
    }

    pub fn to_file(&self) -> CodeSpecFile {
        CodeSpecFile {
            format: CODESPEC_FORMAT.to_string(),
            n: self.n,
            q: self.q,
            basis: self.code.basis().rows().to_vec(),
            dual_basis: self.dual_code.basis().rows().to_vec(),
            parity_primal: self.parity_primal.rows().to_vec(),
            parity_dual: self.parity_dual.rows().to_vec(),
            d_primal: self.d_primal,
            d_dual: self.d_dual,
        }
    }

    /// Rebuilds from a file, recomputing everything and rejecting any stored
    /// field that disagrees with the recomputation.
    pub fn from_file(file: &CodeSpecFile) -> Result<Self, CodeError> {
        if file.format != CODESPEC_FORMAT {
            return Err(CodeError::Format(format!("unsupported format tag {:?}", file.format)));
        }
        let code = SubspaceBasis::from_generators(file.n, file.basis.clone())?;
        let spec = CodeSpec::assemble(code, file.q)?;
        let stored = spec.to_file();
        if stored != *file {
            return Err(CodeError::Format(
                "stored dual, parity or distance fields disagree with the basis".into(),
            ));
        }
        Ok(spec)
    }
}

/// On-disk JSON form of a [`CodeSpec`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpecFile {
    pub format: String,
    pub n: usize,
    pub q: usize,
    pub basis: Vec<BitVec>,
    pub dual_basis: Vec<BitVec>,
    pub parity_primal: Vec<BitVec>,
    pub parity_dual: Vec<BitVec>,
    pub d_primal: usize,
    pub d_dual: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CertificateCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of [`certify`]: one entry per invariant plus recomputed distances.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CertificateReport {
    pub n: usize,
    pub q: usize,
    pub d_primal: usize,
    pub d_dual: usize,
    pub checks: Vec<CertificateCheck>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect()
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {} ({})", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Recomputes dimensions, dual, parity relations and both distances from the
/// code basis alone, and checks membership in W.
pub fn certify(spec: &CodeSpec) -> CertificateReport {
    let n = spec.n;
    let q = spec.q;
    let mut checks = Vec::new();
    let mut check = |name: &'static str, passed: bool, detail: String| {
        checks.push(CertificateCheck { name, passed, detail })
    };

    check("n even", n.is_multiple_of(2) && n > 0, format!("n={n}"));
    let code = SubspaceBasis::row_space(spec.code.basis());
    check(
        "dim(C) = n/2",
        2 * code.dim() == n,
        format!("dim={}", code.dim()),
    );
    let dual = code.dual();
    check("stored dual equals dual(C)", dual == spec.dual_code, String::new());
    let annihilates = |h: &Gf2Matrix, s: &SubspaceBasis| {
        s.basis()
            .rows()
            .iter()
            .all(|v| h.mul_vec(v).map(|r| r.is_zero()).unwrap_or(false))
    };
    check(
        "H_C annihilates C",
        annihilates(&spec.parity_primal, &code) && spec.parity_primal.rank() == n - code.dim(),
        format!("rank={}", spec.parity_primal.rank()),
    );
    check(
        "H_C⊥ annihilates C⊥",
        annihilates(&spec.parity_dual, &dual) && spec.parity_dual.rank() == n - dual.dim(),
        format!("rank={}", spec.parity_dual.rank()),
    );
    let need = 2 * q + 1;
    let dp = distance_or_none(&code, Exec::default());
    let dd = distance_or_none(&dual, Exec::default());
    let (dp, dd) = match (dp, dd) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            check(
                "distances enumerable",
                false,
                format!("{:?} / {:?}", a.err(), b.err()),
            );
            return CertificateReport {
                n,
                q,
                d_primal: 0,
                d_dual: 0,
                checks,
            };
        }
    };
    check(
        "d(C) >= 2q+1",
        dp != NO_NONZERO_CODEWORD && dp >= need,
        format!("d={} need {need}", fmt_distance(dp)),
    );
    check(
        "d(C⊥) >= 2q+1",
        dd != NO_NONZERO_CODEWORD && dd >= need,
        format!("d={} need {need}", fmt_distance(dd)),
    );
    check(
        "stored distances match",
        dp == spec.d_primal && dd == spec.d_dual,
        format!("stored {}/{}", fmt_distance(spec.d_primal), fmt_distance(spec.d_dual)),
    );
    CertificateReport {
        n,
        q,
        d_primal: dp,
        d_dual: dd,
        checks,
    }
}

fn check_search_params(n: usize, q: usize) -> Result<(), CodeError> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(CodeError::InvalidParameters(format!("n must be even and positive, got {n}")));
    }
    if n / 2 > DEFAULT_MAX_ENUM_DIM {
        return Err(CodeError::InvalidParameters(format!(
            "n/2 = {} exceeds the distance enumeration budget {DEFAULT_MAX_ENUM_DIM}",
            n / 2
        )));
    }
    if 2 * q + 1 > n {
        return Err(CodeError::InvalidParameters(format!("q={q} is too large for n={n}")));
    }
    Ok(())
}

/// Draws uniform n/2-dimensional subspaces until one lies in W.
///
/// Attempt `i` uses seed `seed.derive(i)`; the accepted code is the one with
/// the smallest successful attempt index, whatever the execution policy.
pub fn search_applicable_code(
    n: usize,
    q: usize,
    seed: Seed,
    max_attempts: usize,
) -> Result<CodeSpec, CodeError> {
    search_applicable_code_with(Exec::default(), n, q, seed, max_attempts)
}

pub fn search_applicable_code_with(
    exec: Exec,
    n: usize,
    q: usize,
    seed: Seed,
    max_attempts: usize,
) -> Result<CodeSpec, CodeError> {
    check_search_params(n, q)?;
    let need = 2 * q + 1;
    let found = exec.find_first(0..max_attempts, |i| {
        let c = random_subspace(n, n / 2, seed.derive(i as u64)).ok()?;
        let ok = c.min_distance_with(Exec::Sequential, DEFAULT_MAX_ENUM_DIM).ok()? >= need
            && c.dual().min_distance_with(Exec::Sequential, DEFAULT_MAX_ENUM_DIM).ok()? >= need;
        ok.then_some(c)
    });
    match found {
        Some((_, code)) => CodeSpec::certified(code, q),
        None => Err(CodeError::NotFound {
            n,
            q,
            attempts: max_attempts,
        }),
    }
}

/// `binom(n, k)` with overflow reported as `None`.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `Σ_{j≤q} binom(n, j)`: the number of vectors of weight at most `q`.
pub fn error_set_size(n: usize, q: usize) -> Result<u128, CodeError> {
    (0..=q.min(n)).try_fold(0u128, |acc, j| {
        binomial(n, j)
            .and_then(|b| acc.checked_add(b))
            .ok_or(CodeError::Overflow { n, q })
    })
}

/// `|E_q| = (Σ_{j≤q} binom(n, j))²`, exact.
pub fn count_error_pairs(n: usize, q: usize) -> Result<u128, CodeError> {
    let s = error_set_size(n, q)?;
    s.checked_mul(s).ok_or(CodeError::Overflow { n, q })
}

/// Every vector of weight at most `q`, lexicographically sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorSet {
    n: usize,
    q: usize,
    vectors: Vec<BitVec>,
}

impl ErrorSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn vectors(&self) -> &[BitVec] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BitVec> {
        self.vectors.iter()
    }

    /// Position of `e` in the sorted order.
    pub fn index_of(&self, e: &BitVec) -> Option<usize> {
        self.vectors.binary_search(e).ok()
    }
}

pub fn enumerate_errors(n: usize, q: usize) -> Result<ErrorSet, CodeError> {
    enumerate_errors_within(n, q, DEFAULT_MAX_ERRORS)
}

pub fn enumerate_errors_within(n: usize, q: usize, max: u128) -> Result<ErrorSet, CodeError> {
    let count = error_set_size(n, q)?;
    if count > max {
        return Err(CodeError::BudgetExceeded { count, max });
    }
    let mut vectors = Vec::with_capacity(count as usize);
    let mut positions = Vec::with_capacity(q);
    fn rec(n: usize, q: usize, start: usize, positions: &mut Vec<usize>, out: &mut Vec<BitVec>) {
        out.push(BitVec::from_ones(n, positions.iter().copied()));
        if positions.len() == q {
            return;
        }
        for p in start..n {
            positions.push(p);
            rec(n, q, p + 1, positions, out);
            positions.pop();
        }
    }
    rec(n, q, 0, &mut positions, &mut vectors);
    vectors.sort();
    Ok(ErrorSet { n, q, vectors })
}

/// Map from syndrome `H·e` to the unique error `e` of weight at most `q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyndromeTable {
    parity: Gf2Matrix,
    q: usize,
    entries: BTreeMap<BitVec, BitVec>,
}

impl SyndromeTable {
    pub fn parity(&self) -> &Gf2Matrix {
        &self.parity
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<BitVec, BitVec> {
        &self.entries
    }

    pub fn syndrome(&self, x: &BitVec) -> Result<BitVec, Gf2Error> {
        self.parity.mul_vec(x)
    }

    /// The tolerated error with syndrome `s`, if any.
    pub fn decode(&self, s: &BitVec) -> Option<&BitVec> {
        self.entries.get(s)
    }

    pub fn contains(&self, s: &BitVec) -> bool {
        self.entries.contains_key(s)
    }
}

/// Tabulates `H·e ↦ e` over all `e` of weight at most `q`; a repeated
/// syndrome means the code's distance is below `2q+1`.
pub fn build_syndrome_table(parity: &Gf2Matrix, q: usize) -> Result<SyndromeTable, CodeError> {
    let errors = enumerate_errors(parity.num_cols(), q)?;
    let mut entries = BTreeMap::new();
    for e in errors.vectors {
        let s = parity.mul_vec(&e)?;
        if let Some(first) = entries.get(&s) {
            return Err(CodeError::SyndromeCollision {
                syndrome: s,
                first: BitVec::clone(first),
                second: e,
            });
        }
        entries.insert(s, e);
    }
    Ok(SyndromeTable {
        parity: parity.clone(),
        q,
        entries,
    })
}

/// Stabilizer generators in check-matrix form: X-type rows from `H_{C⊥}` and
/// Z-type rows from `H_C`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilizerSet {
    pub x_type_rows: Gf2Matrix,
    pub z_type_rows: Gf2Matrix,
}

impl StabilizerSet {
    pub fn generator_count(&self) -> usize {
        self.x_type_rows.num_rows() + self.z_type_rows.num_rows()
    }

    /// The block-diagonal `m × 2n` check matrix `[H_{C⊥} 0; 0 H_C]`.
    pub fn check_matrix(&self) -> Gf2Matrix {
        let n = self.x_type_rows.num_cols();
        let zero = BitVec::zeros(n);
        let rows = self
            .x_type_rows
            .rows()
            .iter()
            .map(|r| r.concat(&zero))
            .chain(self.z_type_rows.rows().iter().map(|r| zero.concat(r)))
            .collect();
        Gf2Matrix::from_rows(2 * n, rows).expect("rows have length 2n")
    }
}

pub fn stabilizer_generators(spec: &CodeSpec) -> StabilizerSet {
    StabilizerSet {
        x_type_rows: spec.parity_dual.clone(),
        z_type_rows: spec.parity_primal.clone(),
    }
}

/// Binary Shannon entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// `1 − 2·H(2q/n)`: the Gilbert–Varshamov rate bound for CSS codes. A
/// negative margin means a code with a single codeword is guaranteed to exist.
pub fn gv_margin(n: usize, q: usize) -> Result<f64, CodeError> {
    if n == 0 || 2 * q > n {
        return Err(CodeError::InvalidParameters(format!("need 0 <= 2q <= n, got n={n}, q={q}")));
    }
    Ok(1.0 - 2.0 * binary_entropy(2.0 * q as f64 / n as f64))
}

/// `log₂(|E_q|² · ε)` for an explicit `log₂ ε`.
pub fn soundness_log2_with(n: usize, q: usize, log2_epsilon: f64) -> Result<f64, CodeError> {
    let s = error_set_size(n, q)? as f64;
    Ok(4.0 * s.log2() + log2_epsilon)
}

/// `log₂(|E_q|² · 2^{−n/2})`.
pub fn soundness_log2(n: usize, q: usize) -> Result<f64, CodeError> {
    soundness_log2_with(n, q, -(n as f64) / 2.0)
}

/// `|E_q|² · 2^{−n/2}`, evaluated in the log domain.
pub fn soundness_tradeoff(n: usize, q: usize) -> Result<f64, CodeError> {
    if !n.is_multiple_of(2) {
        return Err(CodeError::InvalidParameters(format!("n must be even, got {n}")));
    }
    Ok(soundness_log2(n, q)?.exp2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::testing::bv;
    use crate::reference;

    #[test]
    fn error_enumeration_examples() {
        let e0 = enumerate_errors(6, 0).unwrap();
        assert_eq!(e0.vectors(), &[bv("000000")]);
        let e1 = enumerate_errors(6, 1).unwrap();
        let s: Vec<String> = e1.iter().map(|v| v.to_string()).collect();
        assert_eq!(
            s,
            ["000000", "000001", "000010", "000100", "001000", "010000", "100000"]
        );
        assert_eq!(enumerate_errors(4, 2).unwrap().len(), 11);
        assert!(matches!(
            enumerate_errors_within(30, 10, 1000),
            Err(CodeError::BudgetExceeded { .. })
        ));
        assert_eq!(e1.index_of(&bv("000100")), Some(3));
    }

    #[test]
    fn error_pair_counts() {
        assert_eq!(count_error_pairs(6, 1).unwrap(), 49);
        for n in 1..20 {
            assert_eq!(count_error_pairs(n, 0).unwrap(), 1);
        }
        // Brute force: count vectors of weight <= 3 among all 2^14.
        let brute = (0u32..1 << 14).filter(|x| x.count_ones() <= 3).count() as u128;
        assert_eq!(brute, 470);
        assert_eq!(count_error_pairs(14, 3).unwrap(), 470 * 470);
        assert_eq!(count_error_pairs(400, 200), Err(CodeError::Overflow { n: 400, q: 200 }));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), Some(20));
        assert_eq!(binomial(40, 4), Some(91_390));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(0, 0), Some(1));
    }

    #[test]
    fn certify_reference_code() {
        let spec = CodeSpec::assemble(reference::code(), 1).unwrap();
        let r = certify(&spec);
        assert!(r.passed(), "{r}");
        assert_eq!((r.d_primal, r.d_dual), (3, 3));
        let r2 = certify(&spec.with_q(2));
        assert!(!r2.passed());
        assert!(r2.failures().iter().any(|f| f.contains("need 5")));
    }

    #[test]
    fn certify_rejects_full_space() {
        let spec = CodeSpec::assemble(SubspaceBasis::full(6), 1).unwrap();
        let r = certify(&spec);
        assert!(!r.passed());
        assert_eq!(r.d_primal, 1);
        assert!(CodeSpec::certified(SubspaceBasis::full(6), 1).is_err());
    }

    #[test]
    fn search_q0_accepts_first_draw() {
        let spec = search_applicable_code(6, 0, Seed(5), 1).unwrap();
        assert_eq!(spec.code().dim(), 3);
        assert!(certify(&spec).passed());
    }

    #[test]
    fn search_q1_finds_distance_three() {
        let spec = search_applicable_code(6, 1, Seed(7), DEFAULT_MAX_ATTEMPTS).unwrap();
        assert!(spec.d_primal() >= 3 && spec.d_dual() >= 3);
        // The reference code witnesses existence; [6,3] binary codes cannot exceed d=3.
        assert_eq!((spec.d_primal(), spec.d_dual()), (3, 3));
        let again = search_applicable_code_with(Exec::Sequential, 6, 1, Seed(7), DEFAULT_MAX_ATTEMPTS).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn search_q2_at_n6_is_infeasible() {
        // Exhaustive: no 3-dimensional subspace of F2^6 has d >= 5.
        let mut seen = std::collections::BTreeSet::new();
        for a in 1..64usize {
            for b in (a + 1)..64 {
                for c in (b + 1)..64 {
                    let s = SubspaceBasis::from_generators(
                        6,
                        vec![BitVec::from_index(a, 6), BitVec::from_index(b, 6), BitVec::from_index(c, 6)],
                    )
                    .unwrap();
                    if s.dim() == 3 {
                        seen.insert(s.basis().to_string());
                        assert!(s.min_distance().unwrap() < 5);
                    }
                }
            }
        }
        assert_eq!(seen.len(), 1395);
        let err = search_applicable_code(6, 2, Seed(1), 100_000).unwrap_err();
        assert_eq!(err, CodeError::NotFound { n: 6, q: 2, attempts: 100_000 });
    }

    #[test]
    fn search_rejects_bad_parameters() {
        assert!(matches!(search_applicable_code(7, 1, Seed(1), 10), Err(CodeError::InvalidParameters(_))));
        assert!(matches!(search_applicable_code(4, 2, Seed(1), 10), Err(CodeError::InvalidParameters(_))));
        assert!(matches!(search_applicable_code(60, 1, Seed(1), 10), Err(CodeError::InvalidParameters(_))));
    }

    #[test]
    fn syndrome_table_for_reference_parity() {
        let h = reference::parity_matrix();
        let t = build_syndrome_table(&h, 1).unwrap();
        assert_eq!(t.len(), 7);
        let mut expected: Vec<BitVec> = (0..6).map(|j| h.column(j)).collect();
        expected.push(bv("000"));
        expected.sort();
        let keys: Vec<BitVec> = t.entries().keys().cloned().collect();
        assert_eq!(keys, expected);
        assert!(!t.contains(&bv("111")));
        for (s, e) in t.entries() {
            assert_eq!(&h.mul_vec(e).unwrap(), s);
        }
        let t0 = build_syndrome_table(&h, 0).unwrap();
        assert_eq!(t0.len(), 1);
        assert_eq!(t0.decode(&bv("000")), Some(&bv("000000")));
    }

    #[test]
    fn syndrome_collision_is_reported() {
        // q=2 exceeds what a distance-3 code can correct.
        let err = build_syndrome_table(&reference::parity_matrix(), 2).unwrap_err();
        assert!(matches!(err, CodeError::SyndromeCollision { .. }));
    }

    #[test]
    fn stabilizer_counts() {
        let spec = reference::code_spec(1).unwrap();
        let st = stabilizer_generators(&spec);
        assert_eq!(st.x_type_rows.num_rows(), 3);
        assert_eq!(st.z_type_rows.num_rows(), 3);
        let cm = st.check_matrix();
        assert_eq!((cm.num_rows(), cm.num_cols()), (6, 12));
        assert_eq!(cm.rank(), 6);

        let tiny = CodeSpec::certified(SubspaceBasis::from_generators(2, vec![bv("11")]).unwrap(), 0).unwrap();
        assert_eq!(stabilizer_generators(&tiny).generator_count(), 2);
        for n in [6usize, 8, 10] {
            let s = search_applicable_code(n, 1, Seed(n as u64), DEFAULT_MAX_ATTEMPTS).unwrap();
            assert_eq!(stabilizer_generators(&s).generator_count(), n);
        }
    }

    #[test]
    fn gv_margin_values() {
        assert_eq!(gv_margin(10, 0).unwrap(), 1.0);
        let h13 = (1.0f64 / 3.0) * 3f64.log2() + (2.0 / 3.0) * 1.5f64.log2();
        assert!((gv_margin(6, 1).unwrap() - (1.0 - 2.0 * h13)).abs() < 1e-12);
        assert!((gv_margin(6, 1).unwrap() + 0.836_591_668_108_979_3).abs() < 1e-12);
        assert_eq!(gv_margin(8, 2).unwrap(), -1.0);
        assert_eq!(gv_margin(2, 1).unwrap(), 1.0);
        assert!(gv_margin(2, 2).is_err());
    }

    #[test]
    fn soundness_values() {
        for n in [4usize, 10, 40] {
            assert!((soundness_tradeoff(n, 0).unwrap() - 2f64.powf(-(n as f64) / 2.0)).abs() < 1e-15);
        }
        assert!((soundness_tradeoff(6, 1).unwrap() - 300.125).abs() < 1e-9);
        for n in (4..=30).step_by(2) {
            let mut prev = 0.0;
            for q in 0..5 {
                let v = soundness_tradeoff(n, q).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
        assert!(soundness_tradeoff(7, 1).is_err());
    }

    #[test]
    fn code_file_round_trip() {
        let spec = reference::code_spec(1).unwrap();
        let file = spec.to_file();
        let json = serde_json::to_string_pretty(&file).unwrap();
        let back: CodeSpecFile = serde_json::from_str(&json).unwrap();
        assert_eq!(CodeSpec::from_file(&back).unwrap(), spec);
        let mut tampered = back.clone();
        tampered.d_primal = 4;
        assert!(CodeSpec::from_file(&tampered).is_err());
    }
}
