//! Experiment harness: completeness sweeps, baseline attacks against the
//! double verifier, bound tables and the amplification-cost calculator.
//!
//! Every report is a pure function of its parameters and seed.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codes::{
    binomial, build_syndrome_table, enumerate_errors, error_set_size, gv_margin, soundness_log2_with,
    CodeError, CodeSpec,
};
use crate::exec::Exec;
use crate::fmt::g17;
use crate::gf2::BitVec;
use crate::oracles::{OracleError, OracleSession, QueryLedger};
use crate::scheme::{Banknote, NoteState, OracleRegistry, Route, SchemeError};
use crate::seed::Seed;
use crate::statesim::{DenseState, StateError};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
}

/// One report cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i128),
    Real(f64),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => f.write_str(&g17(*v)),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Real(v) => Some(*v),
            Value::Text(_) => None,
        }
    }
}

/// A named table of results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub seed: Seed,
}

impl ExperimentReport {
    fn new(name: &str, seed: Seed, columns: &[&str]) -> Self {
        ExperimentReport {
            name: name.to_string(),
            parameters: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            seed,
        }
    }

    fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All values of a numeric column.
    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows.iter().map(|r| r[i].as_f64()).collect()
    }

    /// Header row, then one line per row; reals at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Value::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// `<name>-<n>-<q>-<seed>.csv`.
    pub fn file_name(&self) -> String {
        let get = |k: &str| self.parameters.get(k).map_or("na", String::as_str).to_string();
        format!("{}-{}-{}-{}.csv", self.name, get("n"), get("q"), self.seed.0)
    }
}

/// Exact acceptance of every tolerated corruption of a fresh note, plus an
/// optional probe row for the lightest undecodable bit-flip pattern.
pub fn completeness_sweep(spec: &CodeSpec, probe_undecodable: bool) -> Result<ExperimentReport, LabError> {
    let (n, q) = (spec.n(), spec.q());
    let reg = OracleRegistry::new(Seed(0), n, q, Route::Direct)?;
    let r = BitVec::zeros(n);
    reg.register_code(&r, spec.clone())?;
    let note = reg.mint_symbolic(&r)?;
    let mut rep = ExperimentReport::new("completeness", Seed(0), &["e", "e_prime", "tolerated", "accept_probability"])
        .param("n", n)
        .param("q", q);
    let errors = enumerate_errors(n, q)?;
    let mut rng = Seed(0).rng();
    let mut run = |rep: &mut ExperimentReport, e: &BitVec, ez: &BitVec, tolerated: bool| -> Result<(), LabError> {
        let p = reg.verify(&note.corrupt(e, ez)?, &mut rng)?.accept_probability;
        rep.push(vec![
            Value::Text(e.to_string()),
            Value::Text(ez.to_string()),
            Value::Int(i128::from(tolerated)),
            Value::Real(p),
        ]);
        Ok(())
    };
    for e in errors.iter() {
        for ez in errors.iter() {
            run(&mut rep, e, ez, true)?;
        }
    }
    if probe_undecodable {
        if let Some(e) = lightest_undecodable(spec)? {
            run(&mut rep, &e, &BitVec::zeros(n), false)?;
        }
    }
    Ok(rep)
}

/// Lowest-weight bit-flip pattern whose syndrome the decoder does not know;
/// ties go to the pattern whose ones sit furthest left.
pub fn lightest_undecodable(spec: &CodeSpec) -> Result<Option<BitVec>, LabError> {
    let n = spec.n();
    let table = build_syndrome_table(spec.parity_primal(), spec.q())?;
    for w in spec.q() + 1..=n {
        let mut found: Option<BitVec> = None;
        for_each_weight(n, w, &mut |v| {
            if found.is_none() && !table.contains(&spec.parity_primal().mul_vec(v).expect("n bits")) {
                found = Some(v.clone());
            }
        });
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

fn for_each_weight(n: usize, w: usize, f: &mut dyn FnMut(&BitVec)) {
    fn rec(n: usize, start: usize, left: usize, cur: &mut BitVec, f: &mut dyn FnMut(&BitVec)) {
        if left == 0 {
            f(cur);
            return;
        }
        for i in start..=n - left {
            cur.set(i, true);
            rec(n, i + 1, left - 1, cur, f);
            cur.set(i, false);
        }
    }
    rec(n, 0, w, &mut BitVec::zeros(n), f);
}

/// Desk-scale counterfeiters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackStrategy {
    /// Keep the note, add a uniformly random basis state as the copy.
    PassthroughMixed,
    /// Measure the note in the computational basis and prepare two copies.
    MeasureAndCopy,
    /// Ignore the note, output Gaussian random amplitudes on 2n qubits.
    RandomState,
}

impl AttackStrategy {
    pub const ALL: [AttackStrategy; 3] = [
        AttackStrategy::PassthroughMixed,
        AttackStrategy::MeasureAndCopy,
        AttackStrategy::RandomState,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackStrategy::PassthroughMixed => "passthrough-mixed",
            AttackStrategy::MeasureAndCopy => "measure-and-copy",
            AttackStrategy::RandomState => "random-state",
        }
    }

    /// Exact double-verification rate averaged over the strategy's randomness.
    ///
    /// With `P = V` of rank `|E_X|·|E_Z|`:
    /// passthrough gives `1 · tr(P)/2ⁿ`; measure-and-copy gives
    /// `(⟨v|P|v⟩)² = (|E_Z|/2^{n/2})²` for any codeword `v`; a random state
    /// gives `tr(P ⊗ P)/4ⁿ` in expectation.
    pub fn analytic_rate(self, n: usize, q: usize) -> Result<f64, LabError> {
        let ex = error_set_size(n, q)? as f64;
        let half = (n / 2) as i32;
        let tolerated = ex * ex / 2f64.powi(n as i32);
        Ok(match self {
            AttackStrategy::PassthroughMixed => tolerated,
            AttackStrategy::MeasureAndCopy => (ex / 2f64.powi(half)).powi(2),
            AttackStrategy::RandomState => tolerated * tolerated,
        })
    }

    /// Produces the claimed two-note state. Oracle access is only through
    /// `session`; this baseline set never queries it.
    pub fn counterfeit(
        self,
        note: &DenseState,
        _session: &mut OracleSession,
        rng: &mut ChaCha8Rng,
    ) -> Result<DenseState, LabError> {
        let n = note.n();
        Ok(match self {
            AttackStrategy::PassthroughMixed => {
                let u = rng.random_range(0..1usize << n);
                note.tensor(&DenseState::basis_index(n, u))?
            }
            AttackStrategy::MeasureAndCopy => {
                let v = sample_basis(note, rng);
                let one = DenseState::basis_index(n, v);
                one.tensor(&one)?
            }
            AttackStrategy::RandomState => DenseState::random(2 * n, Seed(rng.random()))?,
        })
    }
}

impl fmt::Display for AttackStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackStrategy {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttackStrategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LabError::UnknownStrategy(s.to_string()))
    }
}

/// Index drawn with probability `|amp|²`.
fn sample_basis(st: &DenseState, rng: &mut ChaCha8Rng) -> usize {
    let mut u: f64 = rng.random::<f64>() * st.norm_sqr();
    for (i, a) in st.amplitudes().iter().enumerate() {
        u -= a.norm_sqr();
        if u < 0.0 {
            return i;
        }
    }
    st.amplitudes().iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub strategy: AttackStrategy,
    pub n: usize,
    pub q: usize,
    pub trials: u64,
    pub accepted: u64,
    pub empirical_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub analytic_rate: f64,
    /// Mean over trials of the exact acceptance probability.
    pub mean_exact_probability: f64,
    pub ledger: QueryLedger,
    pub seed: Seed,
}

impl AttackSummary {
    pub fn analytic_in_interval(&self) -> bool {
        self.wilson_low <= self.analytic_rate && self.analytic_rate <= self.wilson_high
    }

    pub fn to_report(&self) -> ExperimentReport {
        let mut rep = ExperimentReport::new(
            "attack",
            self.seed,
            &[
                "strategy",
                "trials",
                "accepted",
                "empirical_rate",
                "wilson_low",
                "wilson_high",
                "analytic_rate",
                "mean_exact_probability",
                "primal_queries",
                "dual_queries",
                "combined_equivalent",
            ],
        )
        .param("n", self.n)
        .param("q", self.q)
        .param("strategy", self.strategy);
        use crate::oracles::OracleKind;
        rep.push(vec![
            Value::Text(self.strategy.to_string()),
            Value::Int(self.trials.into()),
            Value::Int(self.accepted.into()),
            Value::Real(self.empirical_rate),
            Value::Real(self.wilson_low),
            Value::Real(self.wilson_high),
            Value::Real(self.analytic_rate),
            Value::Real(self.mean_exact_probability),
            Value::Int(self.ledger.count(OracleKind::Primal).into()),
            Value::Int(self.ledger.count(OracleKind::Dual).into()),
            Value::Int(self.ledger.combined_equivalent().into()),
        ]);
        rep
    }
}

/// Runs `trials` independent counterfeit-and-double-verify rounds against
/// the note minted for a seed-derived `r`. Trial `i` draws from
/// `seed.derive(i)`, so results do not depend on the execution policy.
pub fn run_attack(
    registry: &OracleRegistry,
    strategy: AttackStrategy,
    trials: u64,
    seed: Seed,
) -> Result<AttackSummary, LabError> {
    run_attack_with(Exec::default(), registry, strategy, trials, seed)
}

pub fn run_attack_with(
    exec: Exec,
    registry: &OracleRegistry,
    strategy: AttackStrategy,
    trials: u64,
    seed: Seed,
) -> Result<AttackSummary, LabError> {
    let n = registry.n();
    let r = {
        let mut rng = seed.derive(u64::MAX).rng();
        BitVec::from_index(rng.random_range(0..1usize << n), n)
    };
    let note = registry.mint_direct(&r)?;
    attack_note(exec, registry, &note, strategy, trials, seed)
}

/// [`run_attack_with`] against a given note.
pub fn attack_note(
    exec: Exec,
    registry: &OracleRegistry,
    note: &Banknote,
    strategy: AttackStrategy,
    trials: u64,
    seed: Seed,
) -> Result<AttackSummary, LabError> {
    let NoteState::Dense(st) = note.state() else {
        return Err(LabError::InvalidParameters("attacks need a dense note".into()));
    };
    let serial = note.serial().clone();
    let rec = registry.record_by_serial(&serial)?;
    let results = exec.map_range(0..trials as usize, |i| -> Result<(bool, f64, QueryLedger), LabError> {
        let mut rng = seed.derive(i as u64).rng();
        let mut session = rec.session();
        let forged = strategy.counterfeit(st, &mut session, &mut rng)?;
        let out = registry.double_verify(&serial, &forged, &mut rng)?;
        Ok((out.accepted, out.accept_probability, session.finish().merge(&out.queries)?))
    });
    let mut accepted = 0u64;
    let mut exact = 0.0;
    let mut ledger = QueryLedger::default();
    for r in results {
        let (a, p, l) = r?;
        accepted += u64::from(a);
        exact += p;
        ledger = ledger.merge(&l)?;
    }
    let (lo, hi) = wilson_interval(accepted, trials, Z95);
    let q = registry.q();
    Ok(AttackSummary {
        strategy,
        n: registry.n(),
        q,
        trials,
        accepted,
        empirical_rate: if trials == 0 { 0.0 } else { accepted as f64 / trials as f64 },
        wilson_low: lo,
        wilson_high: hi,
        analytic_rate: strategy.analytic_rate(registry.n(), q)?,
        mean_exact_probability: if trials == 0 { 0.0 } else { exact / trials as f64 },
        ledger,
        seed,
    })
}

fn range_label(ns: &RangeInclusive<usize>) -> String {
    format!("{}to{}", ns.start(), ns.end())
}

fn list_label(qs: &[usize]) -> String {
    qs.iter().map(usize::to_string).collect::<Vec<_>>().join("_")
}

/// `(n, q, 1 − 2H(2q/n))` for every pair with `2q ≤ n`.
pub fn gv_table(ns: RangeInclusive<usize>, qs: &[usize]) -> Result<ExperimentReport, LabError> {
    let mut rep = ExperimentReport::new("gv", Seed(0), &["n", "q", "margin"])
        .param("n", range_label(&ns))
        .param("q", list_label(qs));
    for &q in qs {
        for n in ns.clone() {
            if n == 0 || 2 * q > n {
                continue;
            }
            rep.push(vec![Value::Int(n as i128), Value::Int(q as i128), Value::Real(gv_margin(n, q)?)]);
        }
    }
    Ok(rep)
}

/// `|E_q|²·ε` with `ε = 2^{−n/2}`.
pub fn soundness_table(ns: RangeInclusive<usize>, qs: &[usize]) -> Result<ExperimentReport, LabError> {
    soundness_table_with(ns, qs, &|n| -(n as f64) / 2.0)
}

/// `|E_q|²·ε` for `log₂ ε` given per `n`.
pub fn soundness_table_with(
    ns: RangeInclusive<usize>,
    qs: &[usize],
    log2_epsilon: &dyn Fn(usize) -> f64,
) -> Result<ExperimentReport, LabError> {
    let mut rep = ExperimentReport::new("soundness", Seed(0), &["n", "q", "e_q", "soundness", "log2_soundness"])
        .param("n", range_label(&ns))
        .param("q", list_label(qs));
    for &q in qs {
        for n in ns.clone() {
            if q > n {
                continue;
            }
            let ex = error_set_size(n, q)?;
            let e_q = ex.checked_mul(ex).ok_or(CodeError::Overflow { n, q })?;
            let l = soundness_log2_with(n, q, log2_epsilon(n))?;
            rep.push(vec![
                Value::Int(n as i128),
                Value::Int(q as i128),
                Value::Int(e_q as i128),
                Value::Real(l.exp2()),
                Value::Real(l),
            ]);
        }
    }
    Ok(rep)
}

/// Smallest `n` in the table (for a given `q`) whose soundness value is < 1.
pub fn soundness_crossing(rep: &ExperimentReport, q: usize) -> Option<usize> {
    let (ni, qi, si) = (rep.column_index("n")?, rep.column_index("q")?, rep.column_index("soundness")?);
    rep.rows
        .iter()
        .filter(|r| r[qi] == Value::Int(q as i128))
        .find(|r| r[si].as_f64().is_some_and(|s| s < 1.0))
        .and_then(|r| r[ni].as_f64().map(|n| n as usize))
}

/// `ln(1/δ) / (√ε (√ε + δ²))`: the argument of the asymptotic query bound for
/// amplifying a counterfeiter with success ε to 1 − δ, constant factor 1.
/// A calculator only; no amplification is simulated.
pub fn amplification_cost(epsilon: f64, delta: f64) -> Result<f64, LabError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(LabError::InvalidParameters(format!("epsilon = {epsilon} must lie in (0, 1]")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::InvalidParameters(format!("delta = {delta} must lie in (0, 1)")));
    }
    let s = epsilon.sqrt();
    Ok((1.0 / delta).ln() / (s * (s + delta * delta)))
}

/// Repeats a short attack `repetitions` times and reports how often the
/// analytic rate falls inside the Wilson interval.
pub fn wilson_coverage(
    registry: &OracleRegistry,
    strategy: AttackStrategy,
    trials: u64,
    repetitions: u64,
    seed: Seed,
) -> Result<f64, LabError> {
    let mut hits = 0u64;
    for k in 0..repetitions {
        let s = run_attack(registry, strategy, trials, seed.derive(k))?;
        hits += u64::from(s.analytic_in_interval());
    }
    Ok(hits as f64 / repetitions as f64)
}

/// Shared registry with the certified code injected at `r = 0`.
pub fn registry_for(spec: &CodeSpec, seed: Seed) -> Result<Arc<OracleRegistry>, LabError> {
    let reg = OracleRegistry::new(seed, spec.n(), spec.q(), Route::Direct)?;
    reg.register_code(&BitVec::zeros(spec.n()), spec.clone())?;
    Ok(Arc::new(reg))
}

/// `binom(n, k)` as f64, for table consumers.
pub fn binomial_f64(n: usize, k: usize) -> Option<f64> {
    binomial(n, k).map(|b| b as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{search_applicable_code, DEFAULT_MAX_ATTEMPTS};
    use crate::oracles::{FnOracle, MembershipOracle, MembershipPredicate, OracleSuite, PredicateKind};
    use crate::reference;

    #[test]
    fn completeness_examples() {
        let spec = reference::code_spec(1).unwrap();
        let rep = completeness_sweep(&spec, true).unwrap();
        assert_eq!(rep.rows.len(), 50);
        let p = rep.column_f64("accept_probability").unwrap();
        assert!(p[..49].iter().all(|x| (x - 1.0).abs() < 1e-9));
        assert_eq!(p[49], 0.0);
        // Columns 1 and 4 of the parity matrix sum to the missing syndrome 111.
        assert_eq!(rep.rows[49][0], Value::Text("100100".into()));

        let q0 = completeness_sweep(&spec.with_q(0), false).unwrap();
        assert_eq!(q0.rows.len(), 1);
        assert!((q0.column_f64("accept_probability").unwrap()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn csv_format() {
        let rep = gv_table(2..=6, &[1]).unwrap();
        let csv = rep.to_csv();
        assert!(csv.starts_with("n,q,margin\n2,1,1\n"));
        assert!(!csv.contains('\r'));
        assert!(csv.contains("6,1,-0.836591668108979"));
        assert_eq!(rep.file_name(), "gv-2to6-1-0.csv");
    }

    #[test]
    fn gv_examples() {
        let rep = gv_table(2..=60, &[1, 2, 3]).unwrap();
        let m61 = rep.rows.iter().find(|r| r[0] == Value::Int(6) && r[1] == Value::Int(1)).unwrap();
        assert!((m61[2].as_f64().unwrap() + 0.836_591_668_108_979_2).abs() < 1e-9);
        for q in [1i128, 2, 3] {
            let ms: Vec<(f64, f64)> = rep
                .rows
                .iter()
                .filter(|r| r[1] == Value::Int(q))
                .map(|r| (r[0].as_f64().unwrap(), r[2].as_f64().unwrap()))
                .collect();
            // Starts at 1 (n = 2q), bottoms out at −1 (n = 4q), then rises.
            assert_eq!(ms[0].1, 1.0);
            let trough = ms.iter().find(|(n, _)| *n == 4.0 * q as f64).unwrap();
            assert!((trough.1 + 1.0).abs() < 1e-12);
            for w in ms.windows(2) {
                let x = 2.0 * q as f64 / w[0].0;
                if x > 0.5 {
                    assert!(w[1].1 < w[0].1);
                } else {
                    assert!(w[1].1 > w[0].1);
                }
            }
        }
    }

    #[test]
    fn soundness_examples() {
        let rep = soundness_table(4..=40, &[0, 1]).unwrap();
        let row = rep.rows.iter().find(|r| r[0] == Value::Int(6) && r[1] == Value::Int(1)).unwrap();
        assert_eq!(row[2], Value::Int(49));
        assert_eq!(row[4].as_f64().unwrap(), 4.0 * 7f64.log2() - 3.0);
        assert!((row[3].as_f64().unwrap() / (49.0 * 49.0 / 8.0) - 1.0).abs() < 1e-14);
        for r in rep.rows.iter().filter(|r| r[1] == Value::Int(0)) {
            let n = r[0].as_f64().unwrap();
            assert_eq!(r[3].as_f64().unwrap(), (-n / 2.0).exp2());
        }
        assert_eq!(soundness_crossing(&rep, 1), None);
        // Brute force in integers: first n with (1+n)⁴ < 2^{n/2}.
        let wide = soundness_table(4..=80, &[1]).unwrap();
        let brute = (4u32..=80).find(|&n| ((1 + n as u128).pow(4) as f64) < (n as f64 / 2.0).exp2());
        assert_eq!(soundness_crossing(&wide, 1), brute.map(|n| n as usize));
        let custom = soundness_table_with(6..=6, &[1], &|_| 0.0).unwrap();
        assert!((custom.rows[0][3].as_f64().unwrap() - 2401.0).abs() < 1e-9);
    }

    #[test]
    fn amplification_examples() {
        let d = (-1.0f64).exp();
        let v = amplification_cost(1.0, d).unwrap();
        assert!((v - 1.0 / (1.0 + d * d)).abs() < 1e-15);
        let a = amplification_cost(0.25, 1e-5).unwrap();
        let expect = (1e5f64).ln() / (0.5 * (0.5 + 1e-10));
        assert!((a - expect).abs() < 1e-9);
        assert!((a / (1e5f64).ln() - 4.0).abs() < 1e-8);
        let mut prev = f64::INFINITY;
        for k in 1..=100 {
            let c = amplification_cost(k as f64 / 100.0, 0.1).unwrap();
            assert!(c < prev);
            prev = c;
        }
        assert!(amplification_cost(0.0, 0.1).is_err());
        assert!(amplification_cost(0.5, 1.0).is_err());
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo - 0.403_831_4).abs() < 1e-6 && (hi - 0.596_168_6).abs() < 1e-6);
        let (lo, hi) = wilson_interval(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.35);
    }

    #[test]
    fn analytic_rates() {
        assert_eq!(AttackStrategy::PassthroughMixed.analytic_rate(6, 1).unwrap(), 49.0 / 64.0);
        assert_eq!(AttackStrategy::MeasureAndCopy.analytic_rate(6, 1).unwrap(), 49.0 / 64.0);
        assert_eq!(AttackStrategy::RandomState.analytic_rate(6, 1).unwrap(), (49.0f64 / 64.0).powi(2));
        assert!(matches!("nope".parse::<AttackStrategy>(), Err(LabError::UnknownStrategy(_))));
    }

    #[test]
    fn attacks_are_deterministic_and_policy_independent() {
        let reg = registry_for(&reference::code_spec(1).unwrap(), Seed(3)).unwrap();
        for s in AttackStrategy::ALL {
            let a = run_attack_with(Exec::Sequential, &reg, s, 300, Seed(5)).unwrap();
            let b = run_attack_with(Exec::Parallel, &reg, s, 300, Seed(5)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.to_report().to_csv(), b.to_report().to_csv());
            assert_eq!(a.ledger.count(crate::oracles::OracleKind::Primal), 600);
        }
    }

    #[test]
    fn exact_means_match_analytics() {
        let reg = registry_for(&reference::code_spec(1).unwrap(), Seed(3)).unwrap();
        let m = run_attack(&reg, AttackStrategy::MeasureAndCopy, 200, Seed(1)).unwrap();
        assert!(m.mean_exact_probability == 49.0 / 64.0 || (m.mean_exact_probability - 49.0 / 64.0).abs() < 1e-12);
        let p = run_attack(&reg, AttackStrategy::PassthroughMixed, 4000, Seed(2)).unwrap();
        // Per-trial exact values are 7/8 or 0; the mean concentrates at 49/64.
        assert!((p.mean_exact_probability - 49.0 / 64.0).abs() < 0.03);
    }

    #[test]
    fn strategies_work_without_code_access() {
        let spec = search_applicable_code(8, 1, Seed(4), DEFAULT_MAX_ATTEMPTS).unwrap();
        let primal = MembershipPredicate::new(&spec, PredicateKind::SubsetPrimal).unwrap();
        let dual = MembershipPredicate::new(&spec, PredicateKind::SubsetDual).unwrap();
        let pm = primal.support_mask(Exec::default());
        let dm = dual.support_mask(Exec::default());
        // Opaque suite: lookups into masks, nothing else.
        let blind = Arc::new(
            OracleSuite::from_oracles(
                Arc::new(FnOracle::new(8, move |x: &BitVec| pm[x.to_index()])),
                Arc::new(FnOracle::new(8, move |x: &BitVec| dm[x.to_index()])),
                9,
            )
            .unwrap(),
        );
        let full = Arc::new(OracleSuite::from_spec(&spec, Exec::default()).unwrap());
        let note = crate::statesim::subspace_state(spec.code()).unwrap();
        for s in AttackStrategy::ALL {
            let a = s.counterfeit(&note, &mut blind.session(), &mut Seed(1).rng()).unwrap();
            let b = s.counterfeit(&note, &mut full.session(), &mut Seed(1).rng()).unwrap();
            assert_eq!(a, b);
        }
    }
}
