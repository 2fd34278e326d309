//! The mini-scheme: serial registry, minting, verification, double
//! verification, corruption and correction.
//!
//! The registry plays the bank. Everything secret about a banknote (its code,
//! and on the conjugate route its basis and θ) lives in a [`MintRecord`];
//! the outside world reaches it only through serials and [`OracleSession`]s.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codes::{
    certify, enumerate_errors, search_applicable_code_with, CodeError, CodeSpec, CodeSpecFile,
    DEFAULT_MAX_ATTEMPTS,
};
use crate::exec::Exec;
use crate::gf2::{BasisMap, BitVec, Gf2Error, Gf2Matrix, SubspaceBasis};
use crate::oracles::{
    project_via_control, CosetOracle, MembershipOracle, OracleError, OracleKind, OracleSession,
    OracleSuite, QueryLedger, Side,
};
use crate::seed::Seed;
use crate::statesim::{
    apply_basis_map_state, apply_pauli, coset_to_dense, conjugate_coding_state, hadamard_all,
    subspace_state, CosetLabel, DenseState, MixedState, Sign, StateError,
};

/// Serial numbers are this many times the code length.
pub const SERIAL_FACTOR: usize = 3;
/// Serial draws per record before giving up on finding a fresh one.
pub const MAX_SERIAL_RETRIES: u64 = 64;
/// A coset predicate matches when the state lies in it with at least this
/// probability, up to this slack.
pub const MATCH_TOL: f64 = 1e-9;
pub const BANKNOTE_FORMAT: &str = "qmoney-banknote/1";
pub const BANK_FORMAT: &str = "qmoney-bank/1";

const LABEL_CODE: u64 = 1;
const LABEL_SERIAL: u64 = 2;
const LABEL_LAYOUT: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("unknown serial {0}")]
    UnknownSerial(BitVec),
    #[error("no fresh serial after {0} draws")]
    SerialExhausted(u64),
    #[error("undecodable: no tolerated coset contains the note")]
    Undecodable,
    #[error("conjugate minting with x ≠ 0 requires test mode")]
    TestModeRequired,
    #[error("route mismatch: {0}")]
    RouteMismatch(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("malformed file: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Prepare `|C⟩` directly.
    Direct,
    /// Prepare `U_B|0⟩_θ`.
    Conjugate,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Direct => "direct",
            Route::Conjugate => "conjugate",
        })
    }
}

impl FromStr for Route {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Route::Direct),
            "conjugate" => Ok(Route::Conjugate),
            _ => Err(SchemeError::InvalidParameters(format!("unknown route {s:?}"))),
        }
    }
}

/// The bank's secret for one `r`.
///
/// On the conjugate route the basis columns at the positions where θ is 1
/// span the code.
pub struct MintRecord {
    r: BitVec,
    serial: BitVec,
    spec: CodeSpec,
    route: Route,
    theta: Option<BitVec>,
    basis_map: Option<BasisMap>,
    suite: Arc<OracleSuite>,
}

impl fmt::Debug for MintRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MintRecord")
            .field("r", &self.r)
            .field("serial", &self.serial)
            .field("route", &self.route)
            .field("theta", &self.theta)
            .finish_non_exhaustive()
    }
}

impl PartialEq for MintRecord {
    fn eq(&self, other: &Self) -> bool {
        self.r == other.r
            && self.serial == other.serial
            && self.spec == other.spec
            && self.route == other.route
            && self.theta == other.theta
            && self.basis_map.as_ref().map(BasisMap::columns) == other.basis_map.as_ref().map(BasisMap::columns)
    }
}

impl MintRecord {
    fn new(
        r: BitVec,
        serial: BitVec,
        spec: CodeSpec,
        layout: Option<(BitVec, BasisMap)>,
        exec: Exec,
    ) -> Result<Self, SchemeError> {
        let suite = Arc::new(OracleSuite::from_spec(&spec, exec)?);
        let route = if layout.is_some() { Route::Conjugate } else { Route::Direct };
        let (theta, basis_map) = layout.map_or((None, None), |(t, b)| (Some(t), Some(b)));
        Ok(MintRecord {
            r,
            serial,
            spec,
            route,
            theta,
            basis_map,
            suite,
        })
    }

    pub fn r(&self) -> &BitVec {
        &self.r
    }

    pub fn serial(&self) -> &BitVec {
        &self.serial
    }

    pub fn spec(&self) -> &CodeSpec {
        &self.spec
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn theta(&self) -> Option<&BitVec> {
        self.theta.as_ref()
    }

    pub fn basis_map(&self) -> Option<&BasisMap> {
        self.basis_map.as_ref()
    }

    /// Fresh charged access to this record's public oracles.
    pub fn session(&self) -> OracleSession {
        self.suite.session()
    }

    pub fn to_file(&self) -> MintRecordFile {
        MintRecordFile {
            r: self.r.clone(),
            serial: self.serial.clone(),
            route: self.route,
            code: self.spec.to_file(),
            theta: self.theta.clone(),
            basis_columns: self.basis_map.as_ref().map(|b| b.columns().to_vec()),
        }
    }
}

/// On-disk form of a [`MintRecord`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MintRecordFile {
    pub r: BitVec,
    pub serial: BitVec,
    pub route: Route,
    pub code: CodeSpecFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<BitVec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_columns: Option<Vec<BitVec>>,
}

/// On-disk form of a whole registry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankFile {
    pub format: String,
    pub master_seed: Seed,
    pub n: usize,
    pub q: usize,
    pub route: Route,
    pub records: Vec<MintRecordFile>,
}

#[derive(Default)]
struct RegistryInner {
    records: BTreeMap<BitVec, Arc<MintRecord>>,
    serial_index: HashMap<BitVec, BitVec>,
}

/// The bank: lazily creates one [`MintRecord`] per `r`, deterministically
/// from the master seed, with pairwise distinct serials.
pub struct OracleRegistry {
    master_seed: Seed,
    n: usize,
    q: usize,
    route: Route,
    exec: Exec,
    inner: Mutex<RegistryInner>,
}

impl OracleRegistry {
    pub fn new(master_seed: Seed, n: usize, q: usize, route: Route) -> Result<Self, SchemeError> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(SchemeError::InvalidParameters(format!("n = {n} must be even and positive")));
        }
        Ok(OracleRegistry {
            master_seed,
            n,
            q,
            route,
            exec: Exec::default(),
            inner: Mutex::new(RegistryInner::default()),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn master_seed(&self) -> Seed {
        self.master_seed
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn serial_len(&self) -> usize {
        SERIAL_FACTOR * self.n
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, RegistryInner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn check_r(&self, r: &BitVec) -> Result<(), SchemeError> {
        if r.len() != self.n {
            return Err(Gf2Error::LengthMismatch {
                expected: self.n,
                found: r.len(),
            }
            .into());
        }
        Ok(())
    }

    /// The record for `r`, created on first use.
    pub fn generate(&self, r: &BitVec) -> Result<Arc<MintRecord>, SchemeError> {
        self.check_r(r)?;
        let mut inner = self.lock();
        if let Some(rec) = inner.records.get(r) {
            return Ok(Arc::clone(rec));
        }
        let seed = self.master_seed.derive_bits(r);
        let spec = search_applicable_code_with(self.exec, self.n, self.q, seed.derive(LABEL_CODE), DEFAULT_MAX_ATTEMPTS)?;
        self.create_locked(&mut inner, r, spec, seed)
    }

    /// Creates the record for `r` around a caller-chosen certified code.
    pub fn register_code(&self, r: &BitVec, spec: CodeSpec) -> Result<Arc<MintRecord>, SchemeError> {
        self.check_r(r)?;
        if spec.n() != self.n || spec.q() != self.q {
            return Err(SchemeError::InvalidParameters(format!(
                "code has (n, q) = ({}, {}), registry expects ({}, {})",
                spec.n(),
                spec.q(),
                self.n,
                self.q
            )));
        }
        let report = certify(&spec);
        if !report.passed() {
            return Err(CodeError::NotApplicable(report.failures().join("; ")).into());
        }
        let mut inner = self.lock();
        if inner.records.contains_key(r) {
            return Err(SchemeError::InvalidRecord(format!("a record for r = {r} already exists")));
        }
        let seed = self.master_seed.derive_bits(r);
        self.create_locked(&mut inner, r, spec, seed)
    }

    fn create_locked(
        &self,
        inner: &mut RegistryInner,
        r: &BitVec,
        spec: CodeSpec,
        seed: Seed,
    ) -> Result<Arc<MintRecord>, SchemeError> {
        let serial = (0..MAX_SERIAL_RETRIES)
            .map(|nonce| random_bits(self.serial_len(), seed.derive(LABEL_SERIAL).derive(nonce)))
            .find(|s| !inner.serial_index.contains_key(s))
            .ok_or(SchemeError::SerialExhausted(MAX_SERIAL_RETRIES))?;
        let layout = match self.route {
            Route::Direct => None,
            Route::Conjugate => Some(conjugate_layout(spec.code(), seed.derive(LABEL_LAYOUT))?),
        };
        let rec = Arc::new(MintRecord::new(r.clone(), serial.clone(), spec, layout, self.exec)?);
        inner.serial_index.insert(serial, r.clone());
        inner.records.insert(r.clone(), Arc::clone(&rec));
        Ok(rec)
    }

    pub fn record(&self, r: &BitVec) -> Option<Arc<MintRecord>> {
        self.lock().records.get(r).cloned()
    }

    pub fn records(&self) -> Vec<Arc<MintRecord>> {
        self.lock().records.values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.lock().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_serial_len(&self, z: &BitVec) -> Result<(), SchemeError> {
        if z.len() != self.serial_len() {
            return Err(Gf2Error::LengthMismatch {
                expected: self.serial_len(),
                found: z.len(),
            }
            .into());
        }
        Ok(())
    }

    /// The serial-validity oracle.
    pub fn serial_check(&self, z: &BitVec) -> Result<bool, SchemeError> {
        self.check_serial_len(z)?;
        Ok(self.lock().serial_index.contains_key(z))
    }

    pub fn record_by_serial(&self, z: &BitVec) -> Result<Arc<MintRecord>, SchemeError> {
        self.check_serial_len(z)?;
        let inner = self.lock();
        inner
            .serial_index
            .get(z)
            .and_then(|r| inner.records.get(r))
            .cloned()
            .ok_or_else(|| SchemeError::UnknownSerial(z.clone()))
    }

    /// Charged oracle access for the banknote with serial `z`.
    pub fn session(&self, z: &BitVec) -> Result<OracleSession, SchemeError> {
        Ok(self.record_by_serial(z)?.session())
    }

    /// `T_primal` / `T_dual` acting on `|z⟩|ψ⟩`: the phase oracle of the
    /// serial's code when `z` is valid, the identity otherwise.
    pub fn apply_t(&self, side: Side, z: &BitVec, st: &DenseState) -> Result<DenseState, SchemeError> {
        if !self.serial_check(z)? {
            return Ok(st.clone());
        }
        let mut s = self.session(z)?;
        Ok(s.phase(side, st)?)
    }

    pub fn mint_direct(&self, r: &BitVec) -> Result<Banknote, SchemeError> {
        let rec = self.generate(r)?;
        Ok(Banknote {
            serial: rec.serial.clone(),
            state: NoteState::Dense(subspace_state(rec.spec.code())?),
        })
    }

    /// Like [`OracleRegistry::mint_direct`] but holding the state as a label.
    pub fn mint_symbolic(&self, r: &BitVec) -> Result<Banknote, SchemeError> {
        let rec = self.generate(r)?;
        Ok(Banknote {
            serial: rec.serial.clone(),
            state: NoteState::Coset(CosetLabel::fresh(self.n)),
        })
    }

    /// `U_B|x⟩_θ`; `x` must be zero unless `test_mode` is set.
    pub fn mint_conjugate(&self, r: &BitVec, x: &BitVec, test_mode: bool) -> Result<Banknote, SchemeError> {
        if x.len() != self.n {
            return Err(Gf2Error::LengthMismatch {
                expected: self.n,
                found: x.len(),
            }
            .into());
        }
        if !x.is_zero() && !test_mode {
            return Err(SchemeError::TestModeRequired);
        }
        let rec = self.generate(r)?;
        let (Some(theta), Some(b)) = (&rec.theta, &rec.basis_map) else {
            return Err(SchemeError::RouteMismatch("record was generated for the direct route".into()));
        };
        let st = apply_basis_map_state(b, &conjugate_coding_state(x, theta)?)?;
        Ok(Banknote {
            serial: rec.serial.clone(),
            state: NoteState::Dense(st),
        })
    }

    /// Dense amplitudes of a note, resolving labels through its serial.
    pub fn dense_state(&self, note: &Banknote) -> Result<DenseState, SchemeError> {
        match &note.state {
            NoteState::Dense(st) => Ok(st.clone()),
            NoteState::Coset(label) => {
                let rec = self.record_by_serial(&note.serial)?;
                Ok(coset_to_dense(rec.spec.code(), label)?)
            }
        }
    }

    /// Runs the verifier on a note.
    pub fn verify<R: Rng + ?Sized>(&self, note: &Banknote, rng: &mut R) -> Result<VerifyOutcome, SchemeError> {
        let rec = self.record_by_serial(note.serial())?;
        let st = self.dense_state(note)?;
        let mut session = rec.session();
        let (p, post) = verify_in_session(&mut session, &st)?;
        Ok(VerifyOutcome {
            accepted: rng.random::<f64>() < p,
            accept_probability: p,
            post_state: post,
            queries: session.finish().charge(OracleKind::Serial, 1),
        })
    }

    /// `V` for a serial as a dense row-major matrix.
    pub fn verify_operator(&self, z: &BitVec) -> Result<Vec<Complex64>, SchemeError> {
        let rec = self.record_by_serial(z)?;
        let (pm, dm) = (rec.suite.primal_mask(), rec.suite.dual_mask());
        let d = 1usize << self.n;
        let mut m = vec![Complex64::new(0.0, 0.0); d * d];
        for j in 0..d {
            let col = apply_verifier(&pm, &dm, &DenseState::basis_index(self.n, j))?;
            for (i, a) in col.amplitudes().iter().enumerate() {
                m[i * d + j] = *a;
            }
        }
        Ok(m)
    }

    /// Acceptance probability `tr(Vρ)` of a mixed input.
    pub fn verify_mixed(&self, z: &BitVec, rho: &MixedState) -> Result<f64, SchemeError> {
        let rec = self.record_by_serial(z)?;
        if rho.n() != self.n {
            return Err(StateError::SizeMismatch { left: self.n, right: rho.n() }.into());
        }
        let (pm, dm) = (rec.suite.primal_mask(), rec.suite.dual_mask());
        let mut tr = 0.0;
        for j in 0..rho.dim() {
            tr += apply_verifier(&pm, &dm, &rho.column(j))?.amplitudes()[j].re;
        }
        Ok(tr.clamp(0.0, 1.0))
    }

    /// `V ⊗ V` on a 2n-qubit state claimed to hold two notes of serial `z`.
    pub fn double_verify<R: Rng + ?Sized>(
        &self,
        z: &BitVec,
        joint: &DenseState,
        rng: &mut R,
    ) -> Result<DoubleVerifyOutcome, SchemeError> {
        let rec = self.record_by_serial(z)?;
        if joint.n() != 2 * self.n {
            return Err(StateError::SizeMismatch {
                left: 2 * self.n,
                right: joint.n(),
            }
            .into());
        }
        let p = double_verify_probability(&rec.suite.primal_mask(), &rec.suite.dual_mask(), joint)?;
        let queries = QueryLedger::new(rec.suite_factor())
            .charge(OracleKind::Serial, 1)
            .charge(OracleKind::Primal, 2)
            .charge(OracleKind::Dual, 2);
        Ok(DoubleVerifyOutcome {
            accepted: rng.random::<f64>() < p,
            accept_probability: p,
            queries,
        })
    }

    /// Identifies the tolerated error on a note by testing single-coset
    /// predicates in `enumerate_errors` order, then undoes it.
    pub fn correct(&self, note: &Banknote) -> Result<CorrectOutcome, SchemeError> {
        let rec = self.record_by_serial(note.serial())?;
        let spec = &rec.spec;
        let errors = enumerate_errors(spec.n(), spec.q())?;
        let mut ledger = QueryLedger::new(errors.len() as u64);
        match &note.state {
            NoteState::Coset(label) => {
                let mut find = |side: Side, shift: &BitVec| -> Result<BitVec, SchemeError> {
                    for e in errors.iter() {
                        ledger = ledger.charge(OracleKind::Coset, 1);
                        if side.code(spec).member(&(shift + e))? {
                            return Ok(e.clone());
                        }
                    }
                    Err(SchemeError::Undecodable)
                };
                let e = find(Side::Primal, &label.e)?;
                let ez = find(Side::Dual, &label.e_prime)?;
                let zero = BitVec::zeros(spec.n());
                let fixed = label.then_pauli(&e, &zero)?.then_pauli(&zero, &ez)?;
                Ok(CorrectOutcome {
                    note: Banknote {
                        serial: note.serial.clone(),
                        state: NoteState::Coset(fixed),
                    },
                    e,
                    e_prime: ez,
                    queries: ledger,
                })
            }
            NoteState::Dense(st) => {
                let mut find = |side: Side, st: &DenseState| -> Result<BitVec, SchemeError> {
                    for e in errors.iter() {
                        ledger = ledger.charge(OracleKind::Coset, 1);
                        let oracle = CosetOracle::new(spec, side, e.clone())?;
                        if coset_weight(&oracle, st) >= 1.0 - MATCH_TOL {
                            return Ok(e.clone());
                        }
                    }
                    Err(SchemeError::Undecodable)
                };
                let zero = BitVec::zeros(spec.n());
                let e = find(Side::Primal, st)?;
                let without_x = apply_pauli(st, &e, &zero)?;
                let ez = find(Side::Dual, &hadamard_all(&without_x))?;
                let fixed = apply_pauli(&without_x, &zero, &ez)?;
                Ok(CorrectOutcome {
                    note: Banknote {
                        serial: note.serial.clone(),
                        state: NoteState::Dense(fixed),
                    },
                    e,
                    e_prime: ez,
                    queries: ledger,
                })
            }
        }
    }

    pub fn to_file(&self) -> BankFile {
        BankFile {
            format: BANK_FORMAT.to_string(),
            master_seed: self.master_seed,
            n: self.n,
            q: self.q,
            route: self.route,
            records: self.records().iter().map(|r| r.to_file()).collect(),
        }
    }

    /// Rebuilds a registry, re-certifying every stored record.
    pub fn from_file(file: &BankFile) -> Result<Self, SchemeError> {
        if file.format != BANK_FORMAT {
            return Err(SchemeError::Format(format!("unsupported format tag {:?}", file.format)));
        }
        let reg = OracleRegistry::new(file.master_seed, file.n, file.q, file.route)?;
        for rf in &file.records {
            reg.insert_record(rf)?;
        }
        Ok(reg)
    }

    /// Adds a stored record after checking it against the registry.
    pub fn insert_record(&self, rf: &MintRecordFile) -> Result<Arc<MintRecord>, SchemeError> {
        self.check_r(&rf.r)?;
        self.check_serial_len(&rf.serial)?;
        if rf.route != self.route {
            return Err(SchemeError::RouteMismatch(format!("record route {} in a {} bank", rf.route, self.route)));
        }
        let spec = CodeSpec::from_file(&rf.code)?;
        if spec.n() != self.n || spec.q() != self.q {
            return Err(SchemeError::InvalidRecord("code parameters differ from the bank's".into()));
        }
        let report = certify(&spec);
        if !report.passed() {
            return Err(CodeError::NotApplicable(report.failures().join("; ")).into());
        }
        let layout = match (&rf.theta, &rf.basis_columns) {
            (None, None) if rf.route == Route::Direct => None,
            (Some(theta), Some(cols)) if rf.route == Route::Conjugate => {
                let b = BasisMap::from_columns(cols.clone())?;
                check_layout(spec.code(), theta, &b)?;
                Some((theta.clone(), b))
            }
            _ => return Err(SchemeError::InvalidRecord("θ and basis must be present exactly on the conjugate route".into())),
        };
        let mut inner = self.lock();
        if inner.records.contains_key(&rf.r) {
            return Err(SchemeError::InvalidRecord(format!("duplicate r = {}", rf.r)));
        }
        if inner.serial_index.contains_key(&rf.serial) {
            return Err(SchemeError::InvalidRecord(format!("duplicate serial {}", rf.serial)));
        }
        let rec = Arc::new(MintRecord::new(rf.r.clone(), rf.serial.clone(), spec, layout, self.exec)?);
        inner.serial_index.insert(rf.serial.clone(), rf.r.clone());
        inner.records.insert(rf.r.clone(), Arc::clone(&rec));
        Ok(rec)
    }
}

impl MintRecord {
    fn suite_factor(&self) -> u64 {
        enumerate_errors(self.spec.n(), self.spec.q()).map_or(0, |e| e.len() as u64)
    }
}

fn random_bits(len: usize, seed: Seed) -> BitVec {
    let mut rng = seed.rng();
    let bits: Vec<bool> = (0..len).map(|_| rng.random()).collect();
    BitVec::from_bools(&bits)
}

/// Random θ of weight n/2 and a random basis whose θ-selected columns form a
/// random basis of `code`.
pub fn conjugate_layout(code: &SubspaceBasis, seed: Seed) -> Result<(BitVec, BasisMap), SchemeError> {
    let n = code.ambient_dim();
    let k = code.dim();
    if 2 * k != n {
        return Err(SchemeError::InvalidParameters(format!("code dimension {k} is not n/2 for n = {n}")));
    }
    let mut rng = seed.rng();
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut rng);
    let (on, off) = positions.split_at(k);
    let theta = BitVec::from_ones(n, on.iter().copied());

    let mut picked: Vec<BitVec> = Vec::with_capacity(n);
    let mut grow = |target: usize, draw: &mut dyn FnMut() -> BitVec| {
        while picked.len() < target {
            let v = draw();
            let mut trial = picked.clone();
            trial.push(v);
            if Gf2Matrix::from_rows(n, trial.clone()).expect("n-bit rows").rank() == trial.len() {
                picked = trial;
            }
        }
    };
    let coeff_mask = if k >= 64 { u64::MAX } else { (1u64 << k) - 1 };
    let mut rng2 = seed.derive(1).rng();
    grow(k, &mut || code.element(rng2.random::<u64>() & coeff_mask));
    let mut rng3 = seed.derive(2).rng();
    grow(n, &mut || random_bits(n, Seed(rng3.random())));

    let mut columns = vec![BitVec::zeros(n); n];
    for (slot, v) in on.iter().chain(off.iter()).zip(picked) {
        columns[*slot] = v;
    }
    let b = BasisMap::from_columns(columns)?;
    check_layout(code, &theta, &b)?;
    Ok((theta, b))
}

fn check_layout(code: &SubspaceBasis, theta: &BitVec, b: &BasisMap) -> Result<(), SchemeError> {
    let n = code.ambient_dim();
    if theta.len() != n || b.ambient_dim() != n || 2 * theta.weight() != n {
        return Err(SchemeError::InvalidRecord("θ must have weight n/2 and match the basis".into()));
    }
    let span = SubspaceBasis::from_generators(n, theta.iter_ones().map(|i| b.column(i).clone()).collect())?;
    if &span != code {
        return Err(SchemeError::InvalidRecord("θ-selected basis columns do not span the code".into()));
    }
    Ok(())
}

/// `(A, t, t′)` with `U_B|x⟩_θ = |A_{t,t′}⟩`: `A` is spanned by the columns
/// where θ is 1, `t` sums the columns where θ is 0 and x is 1, `t′` sums the
/// dual-basis rows where θ and x are both 1.
pub fn conjugate_coset_params(
    b: &BasisMap,
    theta: &BitVec,
    x: &BitVec,
) -> Result<(SubspaceBasis, BitVec, BitVec), SchemeError> {
    let n = b.ambient_dim();
    for len in [theta.len(), x.len()] {
        if len != n {
            return Err(Gf2Error::LengthMismatch { expected: n, found: len }.into());
        }
    }
    let dual = b.dual_basis()?;
    let mut t = BitVec::zeros(n);
    let mut tp = BitVec::zeros(n);
    for i in x.iter_ones() {
        if theta.get(i) {
            tp += dual.row(i);
        } else {
            t += b.column(i);
        }
    }
    let a = SubspaceBasis::from_generators(n, theta.iter_ones().map(|i| b.column(i).clone()).collect())?;
    Ok((a, t, tp))
}

fn coset_weight(oracle: &CosetOracle, st: &DenseState) -> f64 {
    st.amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| oracle.test(&BitVec::from_index(*i, st.n())))
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// The verifier's four stages against arbitrary primal/dual oracles:
/// project onto the primal set, H, project onto the dual set, H.
/// Returns the acceptance probability and the accepted branch.
pub fn verify_pipeline(
    primal: &dyn MembershipOracle,
    dual: &dyn MembershipOracle,
    st: &DenseState,
) -> Result<(f64, Option<DenseState>), SchemeError> {
    let p1 = project_via_control(primal, st)?;
    let Some(s1) = p1.state_in else {
        return Ok((0.0, None));
    };
    let p2 = project_via_control(dual, &hadamard_all(&s1))?;
    let post = p2.state_in.map(|s| hadamard_all(&s));
    Ok(((p1.prob_in * p2.prob_in).clamp(0.0, 1.0), post))
}

fn verify_in_session(session: &mut OracleSession, st: &DenseState) -> Result<(f64, Option<DenseState>), SchemeError> {
    let p1 = session.project(Side::Primal, st)?;
    let Some(s1) = p1.state_in else {
        return Ok((0.0, None));
    };
    let p2 = session.project(Side::Dual, &hadamard_all(&s1))?;
    let post = p2.state_in.map(|s| hadamard_all(&s));
    Ok(((p1.prob_in * p2.prob_in).clamp(0.0, 1.0), post))
}

/// `V|v⟩` for an unnormalized vector, by masking and transforms.
fn apply_verifier(primal_mask: &[bool], dual_mask: &[bool], v: &DenseState) -> Result<DenseState, SchemeError> {
    let zero = Complex64::new(0.0, 0.0);
    let mask = |m: &[bool], s: &DenseState| -> Result<DenseState, StateError> {
        let amps = s.amplitudes().iter().zip(m).map(|(a, &k)| if k { *a } else { zero }).collect();
        DenseState::workspace(s.n(), amps)
    };
    let s = hadamard_all(&mask(primal_mask, v)?);
    Ok(hadamard_all(&mask(dual_mask, &s)?))
}

/// `‖(V⊗V)|ψ⟩‖²` for a 2n-qubit state, from per-register masks.
pub fn double_verify_probability(
    primal_mask: &[bool],
    dual_mask: &[bool],
    joint: &DenseState,
) -> Result<f64, SchemeError> {
    let d = primal_mask.len();
    if joint.dim() != d * d {
        return Err(StateError::AmplitudeCount {
            expected: d * d,
            found: joint.dim(),
        }
        .into());
    }
    let shift = d.trailing_zeros();
    let zero = Complex64::new(0.0, 0.0);
    let product = |m: &[bool], s: &DenseState| -> Result<DenseState, StateError> {
        let amps = s
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(i, a)| if m[i >> shift] && m[i & (d - 1)] { *a } else { zero })
            .collect();
        DenseState::workspace(s.n(), amps)
    };
    let s = hadamard_all(&product(primal_mask, joint)?);
    let out = product(dual_mask, &s)?;
    Ok(out.norm_sqr().clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoteState {
    Dense(DenseState),
    Coset(CosetLabel),
}

/// A serial number and a quantum state.
#[derive(Clone, Debug, PartialEq)]
pub struct Banknote {
    serial: BitVec,
    state: NoteState,
}

impl Banknote {
    pub fn new(serial: BitVec, state: NoteState) -> Self {
        Banknote { serial, state }
    }

    pub fn serial(&self) -> &BitVec {
        &self.serial
    }

    pub fn state(&self) -> &NoteState {
        &self.state
    }

    pub fn n(&self) -> usize {
        match &self.state {
            NoteState::Dense(s) => s.n(),
            NoteState::Coset(l) => l.n(),
        }
    }

    /// Applies `X^e Z^{e′}` of any weight.
    pub fn corrupt(&self, e: &BitVec, e_prime: &BitVec) -> Result<Banknote, SchemeError> {
        let state = match &self.state {
            NoteState::Dense(s) => NoteState::Dense(apply_pauli(s, e, e_prime)?),
            NoteState::Coset(l) => NoteState::Coset(l.then_pauli(e, e_prime)?),
        };
        Ok(Banknote {
            serial: self.serial.clone(),
            state,
        })
    }

    pub fn to_file(&self) -> BanknoteFile {
        let state = match &self.state {
            NoteState::Dense(s) => StateFile::Dense {
                amplitudes: s.dump_lines(),
            },
            NoteState::Coset(l) => StateFile::Coset {
                e: l.e.clone(),
                e_prime: l.e_prime.clone(),
                sign: l.sign,
            },
        };
        BanknoteFile {
            format: BANKNOTE_FORMAT.to_string(),
            n: self.n(),
            serial: self.serial.clone(),
            state,
        }
    }

    pub fn from_file(file: &BanknoteFile) -> Result<Self, SchemeError> {
        if file.format != BANKNOTE_FORMAT {
            return Err(SchemeError::Format(format!("unsupported format tag {:?}", file.format)));
        }
        if file.serial.len() != SERIAL_FACTOR * file.n {
            return Err(SchemeError::Format(format!(
                "serial has {} bits, expected {}",
                file.serial.len(),
                SERIAL_FACTOR * file.n
            )));
        }
        let state = match &file.state {
            StateFile::Dense { amplitudes } => {
                let st = DenseState::parse_dump(file.n, amplitudes)?;
                if !st.is_normalized() {
                    return Err(StateError::NotNormalized(st.norm_sqr()).into());
                }
                NoteState::Dense(st)
            }
            StateFile::Coset { e, e_prime, sign } => {
                let mut l = CosetLabel::raw(e.clone(), e_prime.clone())?;
                if l.n() != file.n {
                    return Err(SchemeError::Format("error vectors do not have n bits".into()));
                }
                l.sign = *sign;
                NoteState::Coset(l)
            }
        };
        Ok(Banknote {
            serial: file.serial.clone(),
            state,
        })
    }
}

/// On-disk form of a [`Banknote`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanknoteFile {
    pub format: String,
    pub n: usize,
    pub serial: BitVec,
    pub state: StateFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateFile {
    Coset { e: BitVec, e_prime: BitVec, sign: Sign },
    Dense { amplitudes: Vec<String> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOutcome {
    /// Sampled decision.
    pub accepted: bool,
    /// Exact acceptance probability.
    pub accept_probability: f64,
    /// Accepted branch, absent when acceptance is impossible.
    pub post_state: Option<DenseState>,
    pub queries: QueryLedger,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoubleVerifyOutcome {
    pub accepted: bool,
    pub accept_probability: f64,
    pub queries: QueryLedger,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectOutcome {
    pub note: Banknote,
    /// Identified bit-flip pattern.
    pub e: BitVec,
    /// Identified phase-flip pattern.
    pub e_prime: BitVec,
    pub queries: QueryLedger,
}
