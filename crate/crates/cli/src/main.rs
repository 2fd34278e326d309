//! `qmoney`: generate codes, mint, corrupt, verify and correct banknotes, run
//! attack baselines and print bound tables.
//!
//! Artifacts go to `--out` when given, otherwise to stdout. The one-line
//! summary goes to stdout, or to stderr when stdout already carries the
//! artifact. Exit status: 0 on success (a rejected note is still a success),
//! 1 on domain errors, 2 on usage errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use qmoney::codes::{
    certify, search_applicable_code_with, CodeSpec, CodeSpecFile, DEFAULT_MAX_ATTEMPTS,
};
use qmoney::labx::{self, AttackStrategy, ExperimentReport};
use qmoney::scheme::{BankFile, Banknote, BanknoteFile, NoteState, OracleRegistry, Route};
use qmoney::statesim::{inner, subspace_state};
use qmoney::{reference, BitVec, Exec, Seed};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "qmoney", version, about = "Noise-tolerant subspace-state quantum money simulator")]
struct Cli {
    /// Root seed for all randomness; generated and printed when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads; 1 forces the sequential path.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RouteArg {
    Direct,
    Conjugate,
}

impl From<RouteArg> for Route {
    fn from(r: RouteArg) -> Route {
        match r {
            RouteArg::Direct => Route::Direct,
            RouteArg::Conjugate => Route::Conjugate,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    PassthroughMixed,
    MeasureAndCopy,
    RandomState,
}

impl From<StrategyArg> for AttackStrategy {
    fn from(s: StrategyArg) -> AttackStrategy {
        match s {
            StrategyArg::PassthroughMixed => AttackStrategy::PassthroughMixed,
            StrategyArg::MeasureAndCopy => AttackStrategy::MeasureAndCopy,
            StrategyArg::RandomState => AttackStrategy::RandomState,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for and certify an applicable code.
    Gencode {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
        max_attempts: usize,
    },
    /// Mint a banknote, creating or extending the bank file.
    Mint {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long, value_enum, default_value = "direct")]
        route: RouteArg,
        /// Bank randomness selecting the record; drawn from the seed if absent.
        #[arg(long)]
        r: Option<BitVec>,
        /// Conjugate-coding input; nonzero values need --test-mode.
        #[arg(long)]
        x: Option<BitVec>,
        #[arg(long)]
        test_mode: bool,
        /// Use this code file instead of searching.
        #[arg(long)]
        code: Option<PathBuf>,
        /// Store the state as a coset label instead of amplitudes.
        #[arg(long, conflicts_with = "x")]
        symbolic: bool,
    },
    /// Apply X^e Z^e' to a banknote.
    Corrupt {
        #[arg(long)]
        note: PathBuf,
        #[arg(long, required_unless_present_any = ["ez", "rand_weight"])]
        e: Option<BitVec>,
        #[arg(long)]
        ez: Option<BitVec>,
        /// Random e and e' of this weight.
        #[arg(long, conflicts_with_all = ["e", "ez"])]
        rand_weight: Option<usize>,
    },
    /// Verify a banknote against the bank.
    Verify {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        note: PathBuf,
    },
    /// Identify and undo a tolerated error.
    Correct {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        note: PathBuf,
    },
    /// Run a counterfeiting baseline against the double verifier.
    Attack {
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long)]
        code: Option<PathBuf>,
    },
    /// Print the GV-margin or soundness table.
    #[command(group(ArgGroup::new("table").required(true).args(["gv", "soundness"])))]
    Bounds {
        #[arg(long)]
        gv: bool,
        #[arg(long)]
        soundness: bool,
        #[arg(long, default_value_t = 4)]
        n_min: usize,
        #[arg(long, default_value_t = 40)]
        n_max: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        q: Vec<usize>,
    },
    /// Rerun the worked [[6,3]] example and check every golden value.
    Demo,
}

struct Ctx {
    seed: Seed,
    out: Option<PathBuf>,
    format: Format,
    exec: Exec,
    artifact_on_stdout: bool,
}

struct Summary {
    command: &'static str,
    message: String,
    fields: BTreeMap<&'static str, Value>,
}

impl Summary {
    fn new(command: &'static str, message: impl Into<String>) -> Self {
        Summary {
            command,
            message: message.into(),
            fields: BTreeMap::new(),
        }
    }

    fn field(mut self, k: &'static str, v: impl Into<Value>) -> Self {
        self.fields.insert(k, v.into());
        self
    }
}

impl Ctx {
    fn emit_artifact(&mut self, content: &str) -> Result<()> {
        match &self.out {
            Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display()))?,
            None => {
                print!("{content}");
                self.artifact_on_stdout = true;
            }
        }
        Ok(())
    }

    fn emit_summary(&self, s: Summary) {
        let mut fields = s.fields;
        fields.insert("seed", json!(self.seed.0));
        let line = match self.format {
            Format::Text => s.message.clone(),
            Format::Json => {
                let mut obj = serde_json::Map::new();
                obj.insert("command".into(), json!(s.command));
                obj.insert("message".into(), json!(s.message));
                for (k, v) in fields {
                    obj.insert(k.into(), v);
                }
                Value::Object(obj).to_string()
            }
            Format::Csv => {
                let mut keys = vec!["command".to_string(), "message".to_string()];
                let mut vals = vec![s.command.to_string(), csv_cell(&s.message)];
                for (k, v) in fields {
                    keys.push(k.to_string());
                    vals.push(csv_cell(&match v {
                        Value::String(t) => t,
                        other => other.to_string(),
                    }));
                }
                format!("{}\n{}", keys.join(","), vals.join(","))
            }
        };
        if self.artifact_on_stdout {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }

    fn emit_report(&mut self, rep: &ExperimentReport) -> Result<()> {
        match self.format {
            Format::Json => self.emit_artifact(&to_pretty(rep)?),
            Format::Csv | Format::Text => self.emit_artifact(&rep.to_csv()),
        }
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn to_pretty<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn load_note(path: &Path) -> Result<Banknote> {
    let file: BanknoteFile = read_json(path)?;
    Ok(Banknote::from_file(&file)?)
}

fn load_bank(path: &Path) -> Result<OracleRegistry> {
    let file: BankFile = read_json(path)?;
    Ok(OracleRegistry::from_file(&file)?)
}

fn load_code(path: &Path) -> Result<CodeSpec> {
    let file: CodeSpecFile = read_json(path)?;
    let spec = CodeSpec::from_file(&file)?;
    let report = certify(&spec);
    if !report.passed() {
        bail!("code in {} is not applicable: {}", path.display(), report.failures().join("; "));
    }
    Ok(spec)
}

fn random_weight(n: usize, w: usize, rng: &mut impl Rng) -> Result<BitVec> {
    if w > n {
        bail!("weight {w} exceeds n = {n}");
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    Ok(BitVec::from_ones(n, idx[..w].iter().copied()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli.seed.unwrap_or_else(|| {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        s
    });
    let exec = match configure_jobs(cli.jobs) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let mut ctx = Ctx {
        seed: Seed(seed),
        out: cli.out,
        format: cli.format,
        exec,
        artifact_on_stdout: false,
    };
    match run(&mut ctx, cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn configure_jobs(jobs: Option<usize>) -> Result<Exec> {
    match jobs {
        None => Ok(Exec::default()),
        Some(0) => bail!("--jobs must be at least 1"),
        Some(1) => Ok(Exec::Sequential),
        Some(_k) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(_k)
                .build_global()
                .context("configuring the worker pool")?;
            Ok(Exec::default())
        }
    }
}

fn run(ctx: &mut Ctx, cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Gencode { n, q, max_attempts } => gencode(ctx, n, q, max_attempts),
        Command::Mint {
            bank,
            n,
            q,
            route,
            r,
            x,
            test_mode,
            code,
            symbolic,
        } => mint(ctx, MintArgs {
            bank,
            n,
            q,
            route: route.into(),
            r,
            x,
            test_mode,
            code,
            symbolic,
        }),
        Command::Corrupt { note, e, ez, rand_weight } => corrupt(ctx, &note, e, ez, rand_weight),
        Command::Verify { bank, note } => verify(ctx, &bank, &note),
        Command::Correct { bank, note } => correct(ctx, &bank, &note),
        Command::Attack {
            n,
            q,
            strategy,
            trials,
            code,
        } => attack(ctx, n, q, strategy.into(), trials, code),
        Command::Bounds {
            gv,
            soundness: _,
            n_min,
            n_max,
            q,
        } => bounds(ctx, gv, n_min, n_max, &q),
        Command::Demo => demo(ctx),
    }
}

fn gencode(ctx: &mut Ctx, n: usize, q: usize, max_attempts: usize) -> Result<ExitCode> {
    let spec = search_applicable_code_with(ctx.exec, n, q, ctx.seed, max_attempts)?;
    ctx.emit_artifact(&to_pretty(&spec.to_file())?)?;
    ctx.emit_summary(
        Summary::new("gencode", format!("found C in W: d={}/{}", spec.d_primal(), spec.d_dual()))
            .field("n", n)
            .field("q", q)
            .field("d_primal", spec.d_primal())
            .field("d_dual", spec.d_dual()),
    );
    Ok(ExitCode::SUCCESS)
}

struct MintArgs {
    bank: PathBuf,
    n: Option<usize>,
    q: Option<usize>,
    route: Route,
    r: Option<BitVec>,
    x: Option<BitVec>,
    test_mode: bool,
    code: Option<PathBuf>,
    symbolic: bool,
}

fn mint(ctx: &mut Ctx, a: MintArgs) -> Result<ExitCode> {
    let code = a.code.as_deref().map(load_code).transpose()?;
    let reg = if a.bank.exists() {
        let reg = load_bank(&a.bank)?;
        for (flag, want, have) in [("n", a.n, reg.n()), ("q", a.q, reg.q())] {
            if want.is_some_and(|w| w != have) {
                bail!("--{flag} {} disagrees with the bank's {flag} = {have}", want.unwrap_or(0));
            }
        }
        if reg.route() != a.route {
            bail!("--route {} disagrees with the bank's route {}", a.route, reg.route());
        }
        reg
    } else {
        let n = a.n.or(code.as_ref().map(CodeSpec::n)).unwrap_or(6);
        let q = a.q.or(code.as_ref().map(CodeSpec::q)).unwrap_or(1);
        OracleRegistry::new(ctx.seed, n, q, a.route)?.with_exec(ctx.exec)
    };
    let n = reg.n();
    let r = match a.r {
        Some(r) => r,
        None => {
            let mut rng = ctx.seed.derive(0x4d494e54).rng();
            BitVec::from_index(rng.random_range(0..1usize << n.min(63)), n)
        }
    };
    if let Some(spec) = code {
        reg.register_code(&r, spec)?;
    }
    let note = match (a.route, a.symbolic) {
        (Route::Direct, true) => reg.mint_symbolic(&r)?,
        (Route::Direct, false) => {
            if a.x.is_some() {
                bail!("--x applies to the conjugate route only");
            }
            reg.mint_direct(&r)?
        }
        (Route::Conjugate, true) => bail!("--symbolic applies to the direct route only"),
        (Route::Conjugate, false) => {
            let x = a.x.unwrap_or_else(|| BitVec::zeros(n));
            reg.mint_conjugate(&r, &x, a.test_mode)?
        }
    };
    write_json(&a.bank, &reg.to_file())?;
    ctx.emit_artifact(&to_pretty(&note.to_file())?)?;
    ctx.emit_summary(
        Summary::new("mint", format!("minted serial {} (r = {r}, route {})", note.serial(), a.route))
            .field("serial", note.serial().to_string())
            .field("r", r.to_string())
            .field("route", a.route.to_string()),
    );
    Ok(ExitCode::SUCCESS)
}

fn corrupt(
    ctx: &mut Ctx,
    path: &Path,
    e: Option<BitVec>,
    ez: Option<BitVec>,
    rand_weight: Option<usize>,
) -> Result<ExitCode> {
    let note = load_note(path)?;
    let n = note.n();
    let (e, ez) = match rand_weight {
        Some(w) => {
            let mut rng = ctx.seed.derive(0x434f5252).rng();
            (random_weight(n, w, &mut rng)?, random_weight(n, w, &mut rng)?)
        }
        None => (e.unwrap_or_else(|| BitVec::zeros(n)), ez.unwrap_or_else(|| BitVec::zeros(n))),
    };
    let bad = note.corrupt(&e, &ez)?;
    ctx.emit_artifact(&to_pretty(&bad.to_file())?)?;
    ctx.emit_summary(
        Summary::new("corrupt", format!("applied X^{e} Z^{ez}"))
            .field("e", e.to_string())
            .field("e_prime", ez.to_string()),
    );
    Ok(ExitCode::SUCCESS)
}

fn verify(ctx: &mut Ctx, bank: &Path, note: &Path) -> Result<ExitCode> {
    let reg = load_bank(bank)?;
    let note = load_note(note)?;
    let out = reg.verify(&note, &mut ctx.seed.derive(0x5645).rng())?;
    let verdict = if out.accepted { "accepted" } else { "rejected" };
    ctx.emit_summary(
        Summary::new(
            "verify",
            format!("{verdict} (acceptance probability {})", qmoney::fmt::g17(out.accept_probability)),
        )
        .field("accepted", out.accepted)
        .field("accept_probability", out.accept_probability)
        .field("queries", serde_json::to_value(&out.queries)?),
    );
    Ok(ExitCode::SUCCESS)
}

fn correct(ctx: &mut Ctx, bank: &Path, note: &Path) -> Result<ExitCode> {
    let reg = load_bank(bank)?;
    let note = load_note(note)?;
    let out = reg.correct(&note)?;
    ctx.emit_artifact(&to_pretty(&out.note.to_file())?)?;
    ctx.emit_summary(
        Summary::new("correct", format!("corrected e = {}, e' = {}", out.e, out.e_prime))
            .field("e", out.e.to_string())
            .field("e_prime", out.e_prime.to_string())
            .field("coset_queries", out.queries.count(qmoney::oracles::OracleKind::Coset)),
    );
    Ok(ExitCode::SUCCESS)
}

fn attack(
    ctx: &mut Ctx,
    n: usize,
    q: usize,
    strategy: AttackStrategy,
    trials: u64,
    code: Option<PathBuf>,
) -> Result<ExitCode> {
    let spec = match code {
        Some(p) => load_code(&p)?,
        None => search_applicable_code_with(ctx.exec, n, q, ctx.seed.derive(0xC0DE), DEFAULT_MAX_ATTEMPTS)?,
    };
    let reg: Arc<OracleRegistry> = labx::registry_for(&spec, ctx.seed)?;
    let note = reg.mint_direct(&BitVec::zeros(spec.n()))?;
    let s = labx::attack_note(ctx.exec, &reg, &note, strategy, trials, ctx.seed)?;
    ctx.emit_report(&s.to_report())?;
    ctx.emit_summary(
        Summary::new(
            "attack",
            format!(
                "{strategy}: {}/{} accepted, rate {} in [{}, {}], analytic {}",
                s.accepted,
                s.trials,
                qmoney::fmt::g17(s.empirical_rate),
                qmoney::fmt::g17(s.wilson_low),
                qmoney::fmt::g17(s.wilson_high),
                qmoney::fmt::g17(s.analytic_rate)
            ),
        )
        .field("strategy", strategy.to_string())
        .field("empirical_rate", s.empirical_rate)
        .field("wilson_low", s.wilson_low)
        .field("wilson_high", s.wilson_high)
        .field("analytic_rate", s.analytic_rate)
        .field("analytic_in_interval", s.analytic_in_interval()),
    );
    Ok(ExitCode::SUCCESS)
}

fn bounds(ctx: &mut Ctx, gv: bool, n_min: usize, n_max: usize, qs: &[usize]) -> Result<ExitCode> {
    if n_min > n_max {
        bail!("--n-min {n_min} exceeds --n-max {n_max}");
    }
    let rep = if gv {
        labx::gv_table(n_min..=n_max, qs)?
    } else {
        labx::soundness_table(n_min..=n_max, qs)?
    };
    ctx.emit_report(&rep)?;
    let mut summary = Summary::new("bounds", format!("{} table: {} rows", rep.name, rep.rows.len()))
        .field("table", rep.name.clone())
        .field("rows", rep.rows.len());
    if !gv {
        for &q in qs {
            if let Some(n) = labx::soundness_crossing(&rep, q) {
                summary.message.push_str(&format!("; q={q} drops below 1 at n={n}"));
            }
        }
    }
    ctx.emit_summary(summary);
    Ok(ExitCode::SUCCESS)
}

fn demo(ctx: &mut Ctx) -> Result<ExitCode> {
    let mut checks: Vec<(String, bool)> = Vec::new();
    let mut check = |name: &str, ok: bool| checks.push((name.to_string(), ok));

    let g = reference::generator_matrix();
    let h = reference::parity_matrix();
    check("H_C · G_C = 0", h.mul(&g)?.is_zero());
    let spec = reference::code_spec(1)?;
    check("d(C) = 3", spec.d_primal() == reference::DISTANCE);
    check("d(C⊥) = 3", spec.d_dual() == reference::DISTANCE);
    check("C is applicable for q = 1", certify(&spec).passed());
    let st = subspace_state(spec.code())?;
    let listed: Vec<BitVec> = reference::CODEWORDS.iter().map(|w| w.parse()).collect::<Result<_, _>>()?;
    let amp = 1.0 / 8f64.sqrt();
    let support_ok = st.dump_lines().len() == 8
        && listed.iter().all(|v| (st.amplitude(v).re - amp).abs() < 1e-12 && st.amplitude(v).im == 0.0);
    check("|C⟩ = 1/√8 Σ over the 8 listed codewords", support_ok);

    let reg = labx::registry_for(&spec, ctx.seed)?;
    let r = BitVec::zeros(6);
    let note = reg.mint_direct(&r)?;
    let mut rng = ctx.seed.derive(1).rng();
    let fresh = reg.verify(&note, &mut rng)?;
    check("fresh note accepted with probability 1", (fresh.accept_probability - 1.0).abs() < 1e-9);

    let sweep = labx::completeness_sweep(&spec, true)?;
    let probs = sweep.column_f64("accept_probability").unwrap_or_default();
    let pairs = 49;
    check(
        "all 49 tolerated corruptions accepted with probability 1",
        probs.len() == pairs + 1 && probs[..pairs].iter().all(|p| (p - 1.0).abs() < 1e-9),
    );
    check("lightest undecodable corruption rejected", probs.get(pairs) == Some(&0.0));

    let zero = BitVec::zeros(6);
    let undecodable = note.corrupt(&"000111".parse()?, &zero)?;
    let p = reg.verify(&undecodable, &mut rng)?.accept_probability;
    check("X^000111 corruption accepted with probability 0", p == 0.0);
    check("X^000111 corruption is undecodable", reg.correct(&undecodable).is_err());

    let bad = note.corrupt(&"100000".parse()?, &"010000".parse()?)?;
    let fixed = reg.correct(&bad)?;
    let NoteState::Dense(fixed_state) = fixed.note.state() else {
        bail!("correction changed the note representation");
    };
    let f = inner(fixed_state, &st)?.norm();
    check(
        "correction of (100000, 010000) restores |C⟩",
        fixed.e.to_string() == "100000" && fixed.e_prime.to_string() == "010000" && (f - 1.0).abs() < 1e-12,
    );

    let passed = checks.iter().filter(|(_, ok)| *ok).count();
    let total = checks.len();
    let artifact = match ctx.format {
        Format::Json => to_pretty(&json!(checks
            .iter()
            .map(|(name, ok)| json!({"check": name, "passed": ok}))
            .collect::<Vec<_>>()))?,
        Format::Csv => {
            let mut s = String::from("check,passed\n");
            for (name, ok) in &checks {
                s.push_str(&format!("{},{}\n", csv_cell(name), ok));
            }
            s
        }
        Format::Text => checks
            .iter()
            .map(|(name, ok)| format!("{} {name}\n", if *ok { "ok  " } else { "FAIL" }))
            .collect(),
    };
    ctx.emit_artifact(&artifact)?;
    ctx.emit_summary(
        Summary::new("demo", format!("demo: {passed}/{total} golden checks passed"))
            .field("passed", passed)
            .field("total", total),
    );
    Ok(if passed == total {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
