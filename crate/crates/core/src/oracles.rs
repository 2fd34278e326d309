//! Classical membership oracles, their phase action on states, the packed
//! combined oracle, and query accounting.
//!
//! Attack code never sees a [`CodeSpec`]: it holds an [`OracleSession`], whose
//! only capabilities are ledger-charged oracle calls.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codes::{build_syndrome_table, enumerate_errors, CodeError, CodeSpec, ErrorSet, SyndromeTable};
use crate::exec::Exec;
use crate::gf2::{BasisMap, BitVec, Gf2Error, Gf2Matrix, SubspaceBasis};
use crate::statesim::{DenseState, StateError};

/// Branches with probability at or below this are reported as absent.
pub const BRANCH_FLOOR: f64 = 1e-20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("expected a {expected}-bit input, found {found} bits")]
    LengthMismatch { expected: usize, found: usize },
    #[error("unknown oracle {0:?}")]
    UnknownOracle(String),
    #[error("cannot merge ledgers with conversion factors {0} and {1}")]
    FactorMismatch(u64, u64),
    #[error("predicate kind {0} does not support this operation")]
    WrongKind(PredicateKind),
}

/// Which of `C` and `C⊥` a predicate or tag refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Primal,
    Dual,
}

impl Side {
    pub fn code(self, spec: &CodeSpec) -> &SubspaceBasis {
        match self {
            Side::Primal => spec.code(),
            Side::Dual => spec.dual_code(),
        }
    }

    /// Parity matrix whose kernel is the side's code.
    pub fn parity(self, spec: &CodeSpec) -> &Gf2Matrix {
        match self {
            Side::Primal => spec.parity_primal(),
            Side::Dual => spec.parity_dual(),
        }
    }
}

/// A boolean function on n-bit strings.
pub trait MembershipOracle: Send + Sync {
    fn num_bits(&self) -> usize;

    /// Membership test; `x.len()` must equal [`MembershipOracle::num_bits`].
    fn test(&self, x: &BitVec) -> bool;

    fn contains(&self, x: &BitVec) -> Result<bool, OracleError> {
        if x.len() != self.num_bits() {
            return Err(OracleError::LengthMismatch {
                expected: self.num_bits(),
                found: x.len(),
            });
        }
        Ok(self.test(x))
    }

    /// `mask[b]` is membership of the basis string with index `b`.
    fn support_mask(&self, exec: Exec) -> Vec<bool> {
        let n = self.num_bits();
        exec.map_range(0..1usize << n, |i| self.test(&BitVec::from_index(i, n)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredicateKind {
    SubsetPrimal,
    SubsetDual,
    SyndromePrimal,
    SyndromeDual,
}

impl PredicateKind {
    pub fn side(self) -> Side {
        match self {
            PredicateKind::SubsetPrimal | PredicateKind::SyndromePrimal => Side::Primal,
            PredicateKind::SubsetDual | PredicateKind::SyndromeDual => Side::Dual,
        }
    }

    pub fn is_subset(self) -> bool {
        matches!(self, PredicateKind::SubsetPrimal | PredicateKind::SubsetDual)
    }
}

impl fmt::Display for PredicateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredicateKind::SubsetPrimal => "subset-primal",
            PredicateKind::SubsetDual => "subset-dual",
            PredicateKind::SyndromePrimal => "syndrome-primal",
            PredicateKind::SyndromeDual => "syndrome-dual",
        })
    }
}

/// Membership in `C_{E_X} = ∪_{wt(e)≤q} (C+e)` or its dual analogue.
///
/// Subset kinds decide through the syndrome decoder; syndrome kinds test the
/// syndrome against a key set built separately from sums of at most q parity
/// columns. The two must agree everywhere.
#[derive(Clone, Debug)]
pub struct MembershipPredicate {
    kind: PredicateKind,
    n: usize,
    table: Arc<SyndromeTable>,
    good_syndromes: Arc<BTreeSet<BitVec>>,
}

impl MembershipPredicate {
    pub fn new(spec: &CodeSpec, kind: PredicateKind) -> Result<Self, OracleError> {
        let parity = kind.side().parity(spec);
        let table = build_syndrome_table(parity, spec.q())?;
        let good = good_syndrome_set(parity, spec.q());
        Ok(MembershipPredicate {
            kind,
            n: spec.n(),
            table: Arc::new(table),
            good_syndromes: Arc::new(good),
        })
    }

    pub fn kind(&self) -> PredicateKind {
        self.kind
    }

    /// Decoder-based membership; only for subset kinds.
    pub fn member_subset(&self, x: &BitVec) -> Result<bool, OracleError> {
        if !self.kind.is_subset() {
            return Err(OracleError::WrongKind(self.kind));
        }
        self.contains(x)
    }

    /// Key-set membership of the syndrome; only for syndrome kinds.
    pub fn member_syndrome(&self, x: &BitVec) -> Result<bool, OracleError> {
        if self.kind.is_subset() {
            return Err(OracleError::WrongKind(self.kind));
        }
        self.contains(x)
    }

    /// Number of good syndromes (the size of `E_X` or `E_Z`).
    pub fn syndrome_count(&self) -> usize {
        if self.kind.is_subset() {
            self.table.len()
        } else {
            self.good_syndromes.len()
        }
    }
}

impl MembershipOracle for MembershipPredicate {
    fn num_bits(&self) -> usize {
        self.n
    }

    fn test(&self, x: &BitVec) -> bool {
        let s = self
            .table
            .parity()
            .mul_vec(x)
            .expect("length checked by caller");
        if self.kind.is_subset() {
            self.table.decode(&s).is_some()
        } else {
            self.good_syndromes.contains(&s)
        }
    }
}

/// Every sum of at most `q` distinct columns of `parity`.
fn good_syndrome_set(parity: &Gf2Matrix, q: usize) -> BTreeSet<BitVec> {
    let columns: Vec<BitVec> = (0..parity.num_cols()).map(|j| parity.column(j)).collect();
    let mut layer: BTreeSet<(usize, BitVec)> = BTreeSet::new();
    let zero = BitVec::zeros(parity.num_rows());
    layer.insert((0, zero.clone()));
    let mut all: BTreeSet<BitVec> = BTreeSet::from([zero]);
    // Layer w holds (next usable column, sum of w columns with smaller indices).
    for _ in 0..q {
        let mut next = BTreeSet::new();
        for (start, s) in &layer {
            for (j, c) in columns.iter().enumerate().skip(*start) {
                let t = s + c;
                all.insert(t.clone());
                next.insert((j + 1, t));
            }
        }
        layer = next;
    }
    all
}

/// Membership in a single coset `side_code + e`.
#[derive(Clone, Debug)]
pub struct CosetOracle {
    code: SubspaceBasis,
    e: BitVec,
}

impl CosetOracle {
    pub fn new(spec: &CodeSpec, side: Side, e: BitVec) -> Result<Self, OracleError> {
        Self::for_subspace(side.code(spec).clone(), e)
    }

    pub fn for_subspace(code: SubspaceBasis, e: BitVec) -> Result<Self, OracleError> {
        if e.len() != code.ambient_dim() {
            return Err(OracleError::LengthMismatch {
                expected: code.ambient_dim(),
                found: e.len(),
            });
        }
        Ok(CosetOracle { code, e })
    }
}

impl MembershipOracle for CosetOracle {
    fn num_bits(&self) -> usize {
        self.code.ambient_dim()
    }

    fn test(&self, x: &BitVec) -> bool {
        self.code.member(&(x + &self.e)).expect("length checked by caller")
    }
}

/// `U_f U_A U_f†`: membership in `f(A)` for a basis map `f`.
#[derive(Clone)]
pub struct MappedOracle<O> {
    inner: O,
    map: BasisMap,
}

impl<O: MembershipOracle> MappedOracle<O> {
    pub fn new(inner: O, map: BasisMap) -> Result<Self, OracleError> {
        if inner.num_bits() != map.ambient_dim() {
            return Err(OracleError::LengthMismatch {
                expected: inner.num_bits(),
                found: map.ambient_dim(),
            });
        }
        Ok(MappedOracle { inner, map })
    }
}

impl<O: MembershipOracle> MembershipOracle for MappedOracle<O> {
    fn num_bits(&self) -> usize {
        self.inner.num_bits()
    }

    fn test(&self, x: &BitVec) -> bool {
        let pre = self.map.apply_inverse(x).expect("length checked by caller");
        self.inner.test(&pre)
    }
}

/// Oracle defined by a closure, for building opaque test doubles.
pub struct FnOracle<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&BitVec) -> bool + Send + Sync> FnOracle<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnOracle { n, f }
    }
}

impl<F: Fn(&BitVec) -> bool + Send + Sync> MembershipOracle for FnOracle<F> {
    fn num_bits(&self) -> usize {
        self.n
    }

    fn test(&self, x: &BitVec) -> bool {
        (self.f)(x)
    }
}

/// Oracle backed by a precomputed support mask.
#[derive(Clone, Debug)]
pub struct MaskOracle {
    n: usize,
    mask: Arc<Vec<bool>>,
}

impl MaskOracle {
    pub fn from_oracle(oracle: &dyn MembershipOracle, exec: Exec) -> Self {
        MaskOracle {
            n: oracle.num_bits(),
            mask: Arc::new(oracle.support_mask(exec)),
        }
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
}

impl MembershipOracle for MaskOracle {
    fn num_bits(&self) -> usize {
        self.n
    }

    fn test(&self, x: &BitVec) -> bool {
        self.mask[x.to_index()]
    }

    fn support_mask(&self, _exec: Exec) -> Vec<bool> {
        self.mask.as_ref().clone()
    }
}

/// The single oracle over tag-extended strings `tag ‖ x`.
///
/// The tag is a big-endian k-bit integer. Its lowest bit selects the side
/// (0 primal, 1 dual); the remaining bits index `enumerate_errors` order.
/// Tags at or beyond `2|E_X|` are constant-false.
#[derive(Clone, Debug)]
pub struct CombinedOracle {
    n: usize,
    k: usize,
    code: SubspaceBasis,
    dual: SubspaceBasis,
    errors: ErrorSet,
}

impl CombinedOracle {
    pub fn new(spec: &CodeSpec) -> Result<Self, OracleError> {
        let errors = enumerate_errors(spec.n(), spec.q())?;
        Ok(CombinedOracle {
            n: spec.n(),
            k: tag_width(errors.len()),
            code: spec.code().clone(),
            dual: spec.dual_code().clone(),
            errors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tag_width(&self) -> usize {
        self.k
    }

    /// Number of tags carrying a real predicate, `2|E_X|`.
    pub fn real_tags(&self) -> usize {
        2 * self.errors.len()
    }

    pub fn errors(&self) -> &ErrorSet {
        &self.errors
    }

    pub fn tag_entry(&self, tag: usize) -> Option<(Side, &BitVec)> {
        if tag >= self.real_tags() {
            return None;
        }
        let side = if tag & 1 == 0 { Side::Primal } else { Side::Dual };
        Some((side, &self.errors.vectors()[tag >> 1]))
    }

    pub fn tag_for(&self, side: Side, error_index: usize) -> BitVec {
        let tag = (error_index << 1) | usize::from(side == Side::Dual);
        BitVec::from_index(tag, self.k)
    }

    /// Concatenates a tag and an n-bit string.
    pub fn tagged(&self, side: Side, error_index: usize, x: &BitVec) -> BitVec {
        self.tag_for(side, error_index).concat(x)
    }

    pub fn member_combined(&self, tagged_x: &BitVec) -> Result<bool, OracleError> {
        self.contains(tagged_x)
    }
}

/// `1 + ⌈log₂ count⌉`.
pub fn tag_width(count: usize) -> usize {
    1 + count.next_power_of_two().trailing_zeros() as usize
}

impl MembershipOracle for CombinedOracle {
    fn num_bits(&self) -> usize {
        self.k + self.n
    }

    fn test(&self, tagged_x: &BitVec) -> bool {
        let tag = tagged_x.slice(0, self.k).to_index();
        let x = tagged_x.slice(self.k, self.k + self.n);
        match self.tag_entry(tag) {
            None => false,
            Some((Side::Primal, e)) => self.code.member(&(&x + e)).expect("n-bit slice"),
            Some((Side::Dual, e)) => self.dual.member(&(&x + e)).expect("n-bit slice"),
        }
    }
}

/// `U_A`: negates the amplitude of every basis string in the oracle's set.
pub fn apply_phase_oracle(oracle: &dyn MembershipOracle, st: &DenseState) -> Result<DenseState, OracleError> {
    apply_phase_mask(&oracle.support_mask(Exec::default()), st)
}

pub fn apply_phase_mask(mask: &[bool], st: &DenseState) -> Result<DenseState, OracleError> {
    check_mask(mask, st)?;
    let amps = st
        .amplitudes()
        .iter()
        .zip(mask)
        .map(|(a, &m)| if m { -a } else { *a })
        .collect();
    Ok(DenseState::workspace(st.n(), amps)?)
}

fn check_mask(mask: &[bool], st: &DenseState) -> Result<(), OracleError> {
    if mask.len() != st.dim() {
        return Err(OracleError::LengthMismatch {
            expected: st.n(),
            found: mask.len().trailing_zeros() as usize,
        });
    }
    Ok(())
}

/// Outcome of the two-outcome membership measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    /// Probability that the measured string lies in the set.
    pub prob_in: f64,
    /// Renormalized in-set branch; `None` when it has probability zero.
    pub state_in: Option<DenseState>,
    /// Renormalized out-of-set branch; `None` when it has probability zero.
    pub state_out: Option<DenseState>,
}

impl Projection {
    fn from_branches(n: usize, inside: Vec<Complex64>, outside: Vec<Complex64>) -> Result<Self, OracleError> {
        let p_in: f64 = inside.iter().map(Complex64::norm_sqr).sum();
        let p_out: f64 = outside.iter().map(Complex64::norm_sqr).sum();
        let total = p_in + p_out;
        let branch = |amps: Vec<Complex64>, p: f64| -> Result<Option<DenseState>, OracleError> {
            if p <= BRANCH_FLOOR * total.max(1.0) {
                return Ok(None);
            }
            Ok(DenseState::workspace(n, amps)?.normalized())
        };
        Ok(Projection {
            prob_in: if total > 0.0 { p_in / total } else { 0.0 },
            state_in: branch(inside, p_in)?,
            state_out: branch(outside, p_out)?,
        })
    }
}

/// Membership measurement by direct amplitude masking.
pub fn project_direct(mask: &[bool], st: &DenseState) -> Result<Projection, OracleError> {
    check_mask(mask, st)?;
    let zero = Complex64::new(0.0, 0.0);
    let (inside, outside) = st
        .amplitudes()
        .iter()
        .zip(mask)
        .map(|(a, &m)| if m { (*a, zero) } else { (zero, *a) })
        .unzip();
    Projection::from_branches(st.n(), inside, outside)
}

/// Membership measurement through the phase oracle: a control qubit in |+⟩
/// drives a controlled `U_A`, is rotated by H and measured. Outcome 1 (the
/// |−⟩ outcome before the rotation) means the string is in the set.
pub fn project_via_control(oracle: &dyn MembershipOracle, st: &DenseState) -> Result<Projection, OracleError> {
    project_via_control_mask(&oracle.support_mask(Exec::default()), st)
}

pub fn project_via_control_mask(mask: &[bool], st: &DenseState) -> Result<Projection, OracleError> {
    check_mask(mask, st)?;
    let d = st.dim();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // Joint register, control qubit leading: amplitude index c·2ⁿ + b.
    let mut joint: Vec<Complex64> = Vec::with_capacity(2 * d);
    joint.extend(st.amplitudes().iter().map(|a| a * h));
    joint.extend(st.amplitudes().iter().map(|a| a * h));
    for (a, &m) in joint[d..].iter_mut().zip(mask) {
        if m {
            *a = -*a;
        }
    }
    let (c0, c1) = joint.split_at_mut(d);
    for (x, y) in c0.iter_mut().zip(c1.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = (a + b) * h;
        *y = (a - b) * h;
    }
    let outside = joint[..d].to_vec();
    let inside = joint[d..].to_vec();
    Projection::from_branches(st.n(), inside, outside)
}

/// Oracles a ledger can be charged for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    /// Membership in `C_{E_X}`.
    Primal,
    /// Membership in `C⊥_{E_Z}`.
    Dual,
    /// One query to the combined oracle.
    Combined,
    /// One single-coset membership query; priced like a combined query.
    Coset,
    /// Serial-number validity check.
    Serial,
}

impl OracleKind {
    pub const ALL: [OracleKind; 5] = [
        OracleKind::Primal,
        OracleKind::Dual,
        OracleKind::Combined,
        OracleKind::Coset,
        OracleKind::Serial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OracleKind::Primal => "primal",
            OracleKind::Dual => "dual",
            OracleKind::Combined => "combined",
            OracleKind::Coset => "coset",
            OracleKind::Serial => "serial",
        }
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleKind {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OracleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| OracleError::UnknownOracle(s.to_string()))
    }
}

/// Per-oracle query counts and the subset-to-combined conversion factor.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    counters: BTreeMap<OracleKind, u64>,
    conversion_factor: u64,
}

impl QueryLedger {
    /// Empty ledger; `conversion_factor` is `|E_X|`.
    pub fn new(conversion_factor: u64) -> Self {
        QueryLedger {
            counters: BTreeMap::new(),
            conversion_factor,
        }
    }

    pub fn for_spec(spec: &CodeSpec) -> Result<Self, OracleError> {
        Ok(Self::new(enumerate_errors(spec.n(), spec.q())?.len() as u64))
    }

    pub fn conversion_factor(&self) -> u64 {
        self.conversion_factor
    }

    pub fn count(&self, kind: OracleKind) -> u64 {
        self.counters.get(&kind).copied().unwrap_or(0)
    }

    pub fn counters(&self) -> &BTreeMap<OracleKind, u64> {
        &self.counters
    }

    pub fn charge(&self, kind: OracleKind, count: u64) -> QueryLedger {
        let mut next = self.clone();
        if count > 0 {
            *next.counters.entry(kind).or_insert(0) += count;
        }
        next
    }

    pub fn charge_named(&self, name: &str, count: u64) -> Result<QueryLedger, OracleError> {
        Ok(self.charge(name.parse()?, count))
    }

    /// `|E_X|·(primal + dual) + combined + coset`.
    pub fn combined_equivalent(&self) -> u64 {
        self.conversion_factor * (self.count(OracleKind::Primal) + self.count(OracleKind::Dual))
            + self.count(OracleKind::Combined)
            + self.count(OracleKind::Coset)
    }

    /// Total of all counters.
    pub fn total(&self) -> u64 {
        self.counters.values().sum()
    }

    pub fn merge(&self, other: &QueryLedger) -> Result<QueryLedger, OracleError> {
        let factor = match (self.conversion_factor, other.conversion_factor) {
            (0, f) | (f, 0) => f,
            (a, b) if a == b => a,
            (a, b) => return Err(OracleError::FactorMismatch(a, b)),
        };
        let mut out = self.clone();
        out.conversion_factor = factor;
        for (k, v) in &other.counters {
            *out.counters.entry(*k).or_insert(0) += v;
        }
        Ok(out)
    }
}

/// The public oracles of one banknote, without the code behind them.
pub struct OracleSuite {
    n: usize,
    primal: Arc<dyn MembershipOracle>,
    dual: Arc<dyn MembershipOracle>,
    combined: Option<Arc<CombinedOracle>>,
    conversion_factor: u64,
}

impl OracleSuite {
    /// Masks for both subset predicates are precomputed.
    pub fn from_spec(spec: &CodeSpec, exec: Exec) -> Result<Self, OracleError> {
        let primal = MembershipPredicate::new(spec, PredicateKind::SubsetPrimal)?;
        let dual = MembershipPredicate::new(spec, PredicateKind::SubsetDual)?;
        let factor = primal.syndrome_count() as u64;
        Ok(OracleSuite {
            n: spec.n(),
            primal: Arc::new(MaskOracle::from_oracle(&primal, exec)),
            dual: Arc::new(MaskOracle::from_oracle(&dual, exec)),
            combined: Some(Arc::new(CombinedOracle::new(spec)?)),
            conversion_factor: factor,
        })
    }

    /// Suite built from arbitrary opaque predicates; it has no combined oracle.
    pub fn from_oracles(
        primal: Arc<dyn MembershipOracle>,
        dual: Arc<dyn MembershipOracle>,
        conversion_factor: u64,
    ) -> Result<Self, OracleError> {
        if primal.num_bits() != dual.num_bits() {
            return Err(OracleError::LengthMismatch {
                expected: primal.num_bits(),
                found: dual.num_bits(),
            });
        }
        Ok(OracleSuite {
            n: primal.num_bits(),
            primal,
            dual,
            combined: None,
            conversion_factor,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn session(self: &Arc<Self>) -> OracleSession {
        OracleSession {
            suite: Arc::clone(self),
            ledger: QueryLedger::new(self.conversion_factor),
        }
    }

    pub(crate) fn primal_mask(&self) -> Vec<bool> {
        self.primal.support_mask(Exec::default())
    }

    pub(crate) fn dual_mask(&self) -> Vec<bool> {
        self.dual.support_mask(Exec::default())
    }

    fn oracle(&self, side: Side) -> &dyn MembershipOracle {
        match side {
            Side::Primal => self.primal.as_ref(),
            Side::Dual => self.dual.as_ref(),
        }
    }
}

/// A caller's charged access to an [`OracleSuite`].
///
/// Each call is recorded in the session's own ledger; sessions are merged
/// with [`QueryLedger::merge`] once their owners finish.
pub struct OracleSession {
    suite: Arc<OracleSuite>,
    ledger: QueryLedger,
}

impl OracleSession {
    pub fn n(&self) -> usize {
        self.suite.n
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn finish(self) -> QueryLedger {
        self.ledger
    }

    fn charge(&mut self, side: Side) {
        let kind = match side {
            Side::Primal => OracleKind::Primal,
            Side::Dual => OracleKind::Dual,
        };
        self.ledger = self.ledger.charge(kind, 1);
    }

    /// Classical query to the primal or dual subset oracle.
    pub fn query(&mut self, side: Side, x: &BitVec) -> Result<bool, OracleError> {
        let r = self.suite.oracle(side).contains(x)?;
        self.charge(side);
        Ok(r)
    }

    /// Classical query to the combined oracle.
    pub fn query_combined(&mut self, tagged_x: &BitVec) -> Result<bool, OracleError> {
        let combined = self
            .suite
            .combined
            .as_ref()
            .ok_or_else(|| OracleError::UnknownOracle(OracleKind::Combined.name().into()))?;
        let r = combined.contains(tagged_x)?;
        self.ledger = self.ledger.charge(OracleKind::Combined, 1);
        Ok(r)
    }

    /// Tag width of the combined oracle, if the suite has one.
    pub fn combined_tag_width(&self) -> Option<usize> {
        self.suite.combined.as_ref().map(|c| c.tag_width())
    }

    /// One coherent query through the phase oracle.
    pub fn phase(&mut self, side: Side, st: &DenseState) -> Result<DenseState, OracleError> {
        let r = apply_phase_oracle(self.suite.oracle(side), st)?;
        self.charge(side);
        Ok(r)
    }

    /// Membership measurement through the controlled phase oracle.
    pub fn project(&mut self, side: Side, st: &DenseState) -> Result<Projection, OracleError> {
        let r = project_via_control(self.suite.oracle(side), st)?;
        self.charge(side);
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{search_applicable_code, DEFAULT_MAX_ATTEMPTS};
    use crate::gf2::random_isometry;
    use crate::gf2::testing::bv;
    use crate::reference;
    use crate::seed::Seed;
    use crate::statesim::{hadamard_all, subspace_state};
    use proptest::prelude::*;

    fn reference_spec() -> CodeSpec {
        reference::code_spec(1).unwrap()
    }

    fn pred(spec: &CodeSpec, kind: PredicateKind) -> MembershipPredicate {
        MembershipPredicate::new(spec, kind).unwrap()
    }

    /// Brute-force oracle: explicit union of cosets.
    fn brute_union(code: &SubspaceBasis, q: usize) -> BTreeSet<BitVec> {
        let n = code.ambient_dim();
        let mut out = BTreeSet::new();
        for e in enumerate_errors(n, q).unwrap().iter() {
            for v in code.elements().unwrap() {
                out.insert(&v + e);
            }
        }
        out
    }

    #[test]
    fn subset_examples() {
        let spec = reference_spec();
        let p = pred(&spec, PredicateKind::SubsetPrimal);
        assert!(p.member_subset(&bv("000000")).unwrap());
        assert!(p.member_subset(&bv("110000")).unwrap());
        assert!(!p.member_subset(&bv("000111")).unwrap());
        assert!(p.member_subset(&bv("00011")).is_err());
        assert!(p.member_syndrome(&bv("000000")).is_err());
    }

    #[test]
    fn syndrome_examples_and_agreement() {
        let spec = reference_spec();
        let brute = brute_union(spec.code(), 1);
        let brute_dual = brute_union(spec.dual_code(), 1);
        for (sub, syn, set) in [
            (PredicateKind::SubsetPrimal, PredicateKind::SyndromePrimal, &brute),
            (PredicateKind::SubsetDual, PredicateKind::SyndromeDual, &brute_dual),
        ] {
            let a = pred(&spec, sub);
            let b = pred(&spec, syn);
            assert_eq!(b.syndrome_count(), 7);
            for i in 0..64 {
                let x = BitVec::from_index(i, 6);
                let m = a.member_subset(&x).unwrap();
                assert_eq!(m, b.member_syndrome(&x).unwrap());
                assert_eq!(m, set.contains(&x));
            }
        }
        let s = pred(&spec, PredicateKind::SyndromePrimal);
        for w in reference::CODEWORDS {
            assert!(s.member_syndrome(&bv(w)).unwrap());
        }
        assert!(!s.member_syndrome(&bv("000111")).unwrap());
        assert_eq!(brute.len(), 56);
    }

    #[test]
    fn agreement_on_random_codes() {
        for (n, q) in [(8, 1), (10, 1), (12, 1), (12, 2)] {
            let Ok(spec) = search_applicable_code(n, q, Seed(n as u64), DEFAULT_MAX_ATTEMPTS) else {
                continue;
            };
            for (sub, syn) in [
                (PredicateKind::SubsetPrimal, PredicateKind::SyndromePrimal),
                (PredicateKind::SubsetDual, PredicateKind::SyndromeDual),
            ] {
                let a = pred(&spec, sub).support_mask(Exec::default());
                let b = pred(&spec, syn).support_mask(Exec::Sequential);
                assert_eq!(a, b);
                let es = enumerate_errors(n, q).unwrap().len();
                assert_eq!(a.iter().filter(|&&m| m).count(), es << (n / 2));
            }
        }
    }

    #[test]
    fn phase_oracle_examples() {
        let spec = reference_spec();
        let c = subspace_state(spec.code()).unwrap();
        let p = pred(&spec, PredicateKind::SubsetPrimal);
        let flipped = apply_phase_oracle(&p, &c).unwrap();
        assert_eq!(flipped, c.scaled(Complex64::new(-1.0, 0.0)));
        assert_eq!(apply_phase_oracle(&p, &flipped).unwrap(), c);

        let never = FnOracle::new(6, |_| false);
        let r = DenseState::random(6, Seed(3)).unwrap();
        assert_eq!(apply_phase_oracle(&never, &r).unwrap(), r);
        let once = apply_phase_oracle(&p, &r).unwrap();
        assert_eq!(once.norm_sqr(), r.norm_sqr());
    }

    #[test]
    fn projection_examples() {
        let spec = reference_spec();
        let p = pred(&spec, PredicateKind::SubsetPrimal);
        let c = subspace_state(spec.code()).unwrap();
        let all_in = project_via_control(&p, &c).unwrap();
        assert!((all_in.prob_in - 1.0).abs() < 1e-12);
        assert!(all_in.state_out.is_none());
        assert!(all_in.state_in.unwrap().max_deviation(&c) < 1e-12);

        let outside = DenseState::basis(&bv("000111")).unwrap();
        let none_in = project_via_control(&p, &outside).unwrap();
        assert_eq!(none_in.prob_in, 0.0);
        assert!(none_in.state_in.is_none());

        let uniform = hadamard_all(&DenseState::basis_index(6, 0));
        let half = project_via_control(&p, &uniform).unwrap();
        assert!((half.prob_in - 56.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn control_protocol_equals_direct_mask() {
        let spec = reference_spec();
        for kind in [PredicateKind::SubsetPrimal, PredicateKind::SubsetDual] {
            let mask = pred(&spec, kind).support_mask(Exec::default());
            for t in 0..20 {
                let r = DenseState::random(6, Seed(t)).unwrap();
                let a = project_via_control_mask(&mask, &r).unwrap();
                let b = project_direct(&mask, &r).unwrap();
                assert!((a.prob_in - b.prob_in).abs() < 1e-12);
                let dev = |x: &Option<DenseState>, y: &Option<DenseState>| match (x, y) {
                    (Some(x), Some(y)) => x.max_deviation(y),
                    (None, None) => 0.0,
                    _ => f64::INFINITY,
                };
                assert!(dev(&a.state_in, &b.state_in) < 1e-12);
                assert!(dev(&a.state_out, &b.state_out) < 1e-12);
            }
        }
    }

    #[test]
    fn combined_oracle_layout() {
        let spec = reference_spec();
        let c = CombinedOracle::new(&spec).unwrap();
        assert_eq!(c.tag_width(), 4);
        assert_eq!(c.real_tags(), 14);
        assert_eq!(c.tag_for(Side::Primal, 0), bv("0000"));
        assert_eq!(c.tag_for(Side::Dual, 0), bv("0001"));
        assert_eq!(c.tag_for(Side::Primal, 1), bv("0010"));
        assert!(c.member_combined(&c.tagged(Side::Primal, 0, &bv("100011"))).unwrap());
        for pad in 14..16 {
            for i in 0..64 {
                let x = BitVec::from_index(pad, 4).concat(&BitVec::from_index(i, 6));
                assert!(!c.member_combined(&x).unwrap());
            }
        }
        assert!(c.member_combined(&bv("000000")).is_err());
    }

    #[test]
    fn combined_unfolds_to_subset_predicates() {
        let spec = reference_spec();
        let c = CombinedOracle::new(&spec).unwrap();
        let primal = pred(&spec, PredicateKind::SubsetPrimal);
        let dual = pred(&spec, PredicateKind::SubsetDual);
        let mut total = 0;
        for i in 0..64 {
            let x = BitVec::from_index(i, 6);
            let mut any_p = false;
            let mut any_d = false;
            for j in 0..c.errors().len() {
                let p = c.member_combined(&c.tagged(Side::Primal, j, &x)).unwrap();
                let d = c.member_combined(&c.tagged(Side::Dual, j, &x)).unwrap();
                total += usize::from(p) + usize::from(d);
                any_p |= p;
                any_d |= d;
            }
            assert_eq!(any_p, primal.test(&x));
            assert_eq!(any_d, dual.test(&x));
        }
        assert_eq!(total, 7 * 8 * 2);
    }

    #[test]
    fn tag_width_rule() {
        assert_eq!(tag_width(1), 1);
        assert_eq!(tag_width(2), 2);
        assert_eq!(tag_width(7), 4);
        assert_eq!(tag_width(8), 4);
        assert_eq!(tag_width(9), 5);
    }

    #[test]
    fn ledger_examples() {
        let l = QueryLedger::new(7);
        assert_eq!(l.charge(OracleKind::Primal, 1).combined_equivalent(), 7);
        assert_eq!(l.charge(OracleKind::Primal, 0), l);
        let both = l.charge_named("primal", 1).unwrap().charge_named("dual", 1).unwrap();
        assert_eq!(both.combined_equivalent(), 14);
        assert!(matches!(l.charge_named("bogus", 1), Err(OracleError::UnknownOracle(_))));
        let merged = both.merge(&l.charge(OracleKind::Coset, 3)).unwrap();
        assert_eq!(merged.combined_equivalent(), 17);
        assert!(both.merge(&QueryLedger::new(8).charge(OracleKind::Dual, 1)).is_err());
        let json = serde_json::to_string(&merged).unwrap();
        assert_eq!(serde_json::from_str::<QueryLedger>(&json).unwrap(), merged);
    }

    #[test]
    fn session_charges_each_call() {
        let suite = Arc::new(OracleSuite::from_spec(&reference_spec(), Exec::default()).unwrap());
        let mut s = suite.session();
        assert!(s.query(Side::Primal, &bv("110000")).unwrap());
        let dual = pred(&reference_spec(), PredicateKind::SubsetDual);
        assert_eq!(s.query(Side::Dual, &bv("000111")).unwrap(), dual.test(&bv("000111")));
        let st = DenseState::random(6, Seed(1)).unwrap();
        let _ = s.phase(Side::Primal, &st).unwrap();
        let _ = s.project(Side::Dual, &st).unwrap();
        let k = s.combined_tag_width().unwrap();
        let _ = s.query_combined(&BitVec::zeros(k + 6)).unwrap();
        let l = s.finish();
        assert_eq!(l.count(OracleKind::Primal), 2);
        assert_eq!(l.count(OracleKind::Dual), 2);
        assert_eq!(l.combined_equivalent(), 7 * 4 + 1);
    }

    #[test]
    fn mapped_oracle_covers_image() {
        let spec = reference_spec();
        let f = random_isometry(6, Seed(9));
        let image = f.map_subspace(spec.code()).unwrap();
        let mapped = MappedOracle::new(CosetOracle::new(&spec, Side::Primal, BitVec::zeros(6)).unwrap(), f).unwrap();
        for i in 0..64 {
            let x = BitVec::from_index(i, 6);
            assert_eq!(mapped.test(&x), image.member(&x).unwrap());
        }
    }

    proptest! {
        #[test]
        fn good_syndromes_are_column_sums(n in 2usize..9, seed in any::<u64>(), q in 0usize..3) {
            let rows = n / 2;
            let mut rng = Seed(seed).rng();
            let gen: Vec<BitVec> = (0..rows)
                .map(|_| BitVec::from_index(rand::Rng::random_range(&mut rng, 0..1usize << n), n))
                .collect();
            let h = Gf2Matrix::from_rows(n, gen).unwrap();
            let set = good_syndrome_set(&h, q);
            let mut brute = BTreeSet::new();
            for e in enumerate_errors(n, q).unwrap().iter() {
                brute.insert(h.mul_vec(e).unwrap());
            }
            prop_assert_eq!(set, brute);
        }
    }
}
