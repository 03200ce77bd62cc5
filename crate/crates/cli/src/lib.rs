//! Command-line front end: instance generation, solving, condition-number
//! analysis, oracle verification and batch experiments.
//!
//! Exit codes: `0` success, `1` usage error, `2` numeric failure (including
//! a missing certificate), `3` I/O or malformed input file. Machine output
//! goes to the files named by `--out`/`--trace`; standard output carries a
//! human-readable summary.

pub mod verify;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use rpdhg::conditioning::{analyze, iteration_bounds, BoundReport, ConditionReport, OptimalCertificate};
use rpdhg::format::to_json_pretty;
use rpdhg::harness::{
    fit_loglog, generate_family, generate_todd, records_csv, records_jsonl, run_experiment, ExperimentKind,
    ExperimentParams, ExperimentRecord, Family, Predictor, Response, ToddSpec,
};
use rpdhg::lp::{InstanceFile, LpInstance};
use rpdhg::oracle;
use rpdhg::solver::{run_rpdhg, SolveResult, SolverConfig, Target, TraceLevel, DEFAULT_BETA};
use rpdhg::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rpdhg-lab", version, about = "Restarted PDHG solver and LP condition-number laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random instance with planted optimum, or a hand-built family member.
    Generate(GenerateArgs),
    /// Run rPDHG on an instance file.
    Solve(SolveArgs),
    /// Compute the condition-number report of a certified instance.
    Analyze(AnalyzeArgs),
    /// Compute the explicit iteration bounds of a certified instance.
    Bounds(BoundsArgs),
    /// Cross-check the closed forms against the brute-force oracles.
    Verify(VerifyArgs),
    /// Run a batch experiment and write CSV and JSONL records.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Todd,
    Lp1,
    Lp2,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "todd")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perturbation parameter of the LP1/LP2 families.
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
    /// Use `c = ŝ` instead of the least-norm cost.
    #[arg(long)]
    pub plain_c: bool,
    /// Replace the planted certificate by the enumeration oracle's.
    #[arg(long)]
    pub certify: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Stop at Euclidean distance `eps` to the certified `(x*, y*)`.
    #[arg(long, conflicts_with = "tol")]
    pub eps: Option<f64>,
    /// Stop at relative error `tol` (default 1e-8 when `--eps` is absent).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_iters: usize,
    /// Write the restart trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Trace every OnePDHG iteration instead of every restart.
    #[arg(long, requires = "trace")]
    pub full_trace: bool,
    /// Certify with the enumeration oracle, ignoring any certificate in the file.
    #[arg(long)]
    pub certify: bool,
    /// Test the target at every iterate, not only at restarts.
    #[arg(long)]
    pub every_iterate: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Target tolerance used in the reported iteration bounds.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    /// Level of the sampled sublevel set.
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
    #[arg(long)]
    pub certify: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long, hide = true)]
    pub gamma_note: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long)]
    pub certify: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Check one certified instance instead of the random suite.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Random cases per check.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// perturbation, two_stage or regression.
    pub kind: String,
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Distance target for the random batches (default 1e-4), relative
    /// error target for the perturbation sweep (default 1e-8).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Comma-separated values of gamma for the perturbation sweep.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub plain_c: bool,
    /// Test the target only at restarts instead of at every iterate.
    #[arg(long)]
    pub restarts_only: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failed command: its exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: exit_code(&e), message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

/// Exit code of a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => EXIT_IO,
        Error::InvalidParameter(_) | Error::UnsupportedFormat(_) => EXIT_USAGE,
        _ => EXIT_NUMERIC,
    }
}

/// Anything [`emit_report`] can serialize.
#[derive(Clone, Copy, Debug)]
pub enum Report<'a> {
    Condition(&'a ConditionReport),
    Bounds(&'a BoundReport),
    Solve(&'a SolveResult),
    Records(&'a [ExperimentRecord]),
}

fn bounds_summary(b: &BoundReport) -> String {
    format!(
        "kappa={:.6} phi={:.6e} global_T=[{:.3e}, {:.3e}] T_basis=[{:.3e}, {:.3e}] T_local={:.3e}",
        b.kappa,
        b.phi,
        b.global_t.optimistic,
        b.global_t.conservative,
        b.t_basis.optimistic,
        b.t_basis.conservative,
        b.t_local
    )
}

/// Serializes a report. Machine formats print floats with 17 significant
/// digits; CSV is only defined for batch records.
pub fn emit_report(report: Report<'_>, format: Format) -> rpdhg::Result<Vec<u8>> {
    let text = match (report, format) {
        (Report::Condition(r), Format::Json) => to_json_pretty(r)?,
        (Report::Condition(r), Format::Text) => format!("{}\n", r.summary()),
        (Report::Bounds(r), Format::Json) => to_json_pretty(r)?,
        (Report::Bounds(r), Format::Text) => format!("{}\n", bounds_summary(r)),
        (Report::Solve(r), Format::Json) => to_json_pretty(r)?,
        (Report::Solve(r), Format::Text) => format!("{}\n", r.summary()),
        (Report::Records(r), Format::Csv) => records_csv(r)?,
        (Report::Records(r), Format::Json) => records_jsonl(r)?,
        (Report::Records(records), Format::Text) => {
            let mut out = String::new();
            for r in records {
                let _ = writeln!(
                    out,
                    "seed={} total={} stage1={} stage2={} kphi_ln={:.3e} binv_a={:.3e} term={}",
                    r.seed, r.total_iters, r.stage1_iters, r.stage2_iters, r.kphi_ln, r.binv_a_norm, r.term_reason
                );
            }
            out
        }
        (Report::Condition(_), Format::Csv) => return Err(Error::UnsupportedFormat("csv for a condition report".into())),
        (Report::Bounds(_), Format::Csv) => return Err(Error::UnsupportedFormat("csv for a bound report".into())),
        (Report::Solve(_), Format::Csv) => return Err(Error::UnsupportedFormat("csv for a solve result".into())),
    };
    Ok(text.into_bytes())
}

/// Parses `argv` (including the program name), runs the command and
/// returns the exit code. Errors are reported on standard error.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            print!("{summary}");
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Runs a parsed command and returns its standard-output summary.
pub fn run(command: Command) -> Result<String, Failure> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Bounds(a) => bounds(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) })
}

/// Reads and validates an instance file. Unreadable, malformed or
/// inconsistently sized files are I/O failures; numerically invalid data
/// (rank deficiency, non-finite values) is a numeric failure.
pub fn load_instance(path: &Path) -> Result<(LpInstance, Option<OptimalCertificate>), Failure> {
    let io = |message: String| Failure { code: EXIT_IO, message: format!("{}: {message}", path.display()) };
    let file = InstanceFile::read(path).map_err(|e| io(e.to_string()))?;
    let inst = file.to_instance().map_err(|e| match e {
        Error::DimensionMismatch(msg) => io(msg),
        other => Failure::from(other),
    })?;
    let cert = match &file.certificate {
        Some(data) => Some(OptimalCertificate::from_data(&inst, data)?),
        None => None,
    };
    Ok((inst, cert))
}

/// The certificate from the file, or from the enumeration oracle when
/// `force` is set or the file has none and the instance is small enough.
fn resolve_certificate(inst: &LpInstance, cert: Option<OptimalCertificate>, force: bool) -> Result<OptimalCertificate, Failure> {
    match cert {
        Some(c) if !force => Ok(c),
        _ if oracle::binomial(inst.n(), inst.m()) <= oracle::ENUMERATION_LIMIT => Ok(oracle::certify(inst)?),
        _ => Err(Error::MissingCertificate(format!(
            "{} has no certificate and C({}, {}) bases are too many to enumerate",
            inst.name(),
            inst.n(),
            inst.m()
        ))
        .into()),
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive and finite, got {v}")))
    }
}

fn generate(a: GenerateArgs) -> Result<String, Failure> {
    let (inst, cert) = match a.family {
        FamilyArg::Todd => {
            let t = generate_todd(&ToddSpec { m: a.m, n: a.n, seed: a.seed, use_projected_c: !a.plain_c })?;
            let cert = if a.certify { oracle::certify(&t.instance)? } else { t.certificate };
            (t.instance, Some(cert))
        }
        FamilyArg::Lp1 | FamilyArg::Lp2 => {
            let kind = if a.family == FamilyArg::Lp1 { Family::Lp1 } else { Family::Lp2 };
            let inst = generate_family(kind, a.gamma)?;
            match oracle::certify(&inst) {
                Ok(cert) => (inst, Some(cert)),
                Err(Error::MultipleOptima { .. }) => (inst, None),
                Err(e) => return Err(e.into()),
            }
        }
    };
    let file = InstanceFile::from_instance(&inst, cert.as_ref().map(OptimalCertificate::to_data));
    write_file(&a.out, to_json_pretty(&file)?.as_bytes())?;
    Ok(format!(
        "wrote {} ({}x{}, {}) to {}\n",
        inst.name(),
        inst.m(),
        inst.n(),
        if cert.is_some() { "certified" } else { "no unique optimum, no certificate" },
        a.out.display()
    ))
}

fn solve(a: SolveArgs) -> Result<String, Failure> {
    let (inst, cert) = load_instance(&a.input)?;
    let target = match (a.eps, a.tol) {
        (Some(eps), _) => {
            check_positive("eps", eps)?;
            Target::Distance { eps }
        }
        (None, tol) => {
            let eps = tol.unwrap_or(1e-8);
            check_positive("tol", eps)?;
            Target::RelativeError { eps }
        }
    };
    let cert = if a.certify || (a.eps.is_some() && cert.is_none()) {
        Some(resolve_certificate(&inst, cert, a.certify)?)
    } else {
        cert
    };
    let mut config = SolverConfig::new(&inst, target)?;
    config.beta = a.beta;
    config.max_onepdhg = a.max_iters;
    config.check_every_iterate = a.every_iterate;
    config.trace_level = if a.full_trace { TraceLevel::Full } else { TraceLevel::Restarts };
    let (result, trace) = run_rpdhg(&inst, &config, cert.as_ref())?;
    if let Some(path) = &a.trace {
        write_file(path, trace.to_jsonl()?.as_bytes())?;
    }
    if let Some(path) = &a.out {
        write_file(path, &emit_report(Report::Solve(&result), a.format)?)?;
    }
    Ok(format!("{}: {}\n", inst.name(), result.summary()))
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<String, Failure> {
    check_positive("eps", a.eps)?;
    check_positive("delta", a.delta)?;
    let (inst, cert) = load_instance(&a.input)?;
    let cert = resolve_certificate(&inst, cert, a.certify)?;
    let report = analyze(&inst, &cert, a.eps, a.beta, a.delta)?;
    if let Some(path) = &a.out {
        write_file(path, &emit_report(Report::Condition(&report), a.format)?)?;
    }
    Ok(format!("{}\n", report.summary()))
}

fn bounds(a: BoundsArgs) -> Result<String, Failure> {
    check_positive("eps", a.eps)?;
    let (inst, cert) = load_instance(&a.input)?;
    let cert = resolve_certificate(&inst, cert, a.certify)?;
    let report = iteration_bounds(&inst, &cert, a.eps, a.beta)?;
    if let Some(path) = &a.out {
        write_file(path, &emit_report(Report::Bounds(&report), a.format)?)?;
    }
    Ok(format!("{}: {}\n", inst.name(), bounds_summary(&report)))
}

fn with_pool<T: Send>(jobs: usize, work: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    if jobs == 0 {
        return Ok(work());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| usage(format!("--jobs {jobs}: {e}")))?;
    Ok(pool.install(work))
}

fn verify_cmd(a: VerifyArgs) -> Result<String, Failure> {
    let checks = match &a.input {
        Some(path) => {
            let (inst, cert) = load_instance(path)?;
            let cert = resolve_certificate(&inst, cert, false)?;
            verify::run_instance(&inst, &cert, 100, a.seed)
        }
        None => {
            let params = verify::SuiteParams { seed: a.seed, count: a.count, ..Default::default() };
            with_pool(a.jobs, || verify::run_suite(&params))?
        }
    };
    if let Some(path) = &a.out {
        write_file(path, to_json_pretty(&checks)?.as_bytes())?;
    }
    let summary: String = checks.iter().map(|c| format!("{}\n", c.line())).collect();
    if checks.iter().all(verify::CheckSummary::passed) {
        Ok(summary)
    } else {
        Err(Failure { code: EXIT_NUMERIC, message: format!("verification failed\n{summary}") })
    }
}

fn experiment(a: ExperimentArgs) -> Result<String, Failure> {
    let kind: ExperimentKind = a.kind.parse().map_err(|e: Error| usage(e.to_string()))?;
    let defaults = ExperimentParams::default();
    let tol = a.tol.unwrap_or(if kind == ExperimentKind::Perturbation { 1e-8 } else { defaults.tol });
    let params = ExperimentParams {
        m: a.m,
        n: a.n,
        count: a.count,
        seed: a.seed,
        tol,
        gammas: if a.gamma.is_empty() { defaults.gammas.clone() } else { a.gamma },
        beta: a.beta,
        max_iters: a.max_iters,
        jobs: a.jobs,
        use_projected_c: !a.plain_c,
        check_every_iterate: !a.restarts_only,
        ..defaults
    };
    let output = run_experiment(kind, &params, a.out.as_deref())?;
    let mut summary = String::new();
    if kind == ExperimentKind::Perturbation {
        for r in &output.perturbation {
            let _ = writeln!(
                summary,
                "{} gamma={:e}: phi={:.4e} total={} stage1={} stage2={} {}",
                r.family,
                r.gamma,
                r.phi,
                r.total_iters,
                r.stage1_iters,
                r.stage2_iters,
                r.error.as_deref().unwrap_or(&r.term_reason)
            );
        }
    } else {
        let failed = output.records.iter().filter(|r| r.error.is_some()).count();
        let _ = writeln!(summary, "{}: {} instances, {} failed", kind.as_str(), output.records.len(), failed);
        for (p, r, label) in [
            (Predictor::KphiLnKphi, Response::Total, "total vs kphi_ln"),
            (Predictor::KphiLnKphi, Response::Stage1Inner, "stage1 vs kphi_ln"),
            (Predictor::BinvA, Response::Stage2Inner, "stage2 vs binv_a"),
            (Predictor::KphiLnKphi, Response::Stage1, "stage1 (outer iterates) vs kphi_ln"),
            (Predictor::BinvA, Response::Stage2, "stage2 (outer iterates) vs binv_a"),
        ] {
            match fit_loglog(&output.records, p, r) {
                Ok(fit) => {
                    let _ = writeln!(
                        summary,
                        "{label}: intercept={:.4} r2={:.4} n={} max_excess={:.3}",
                        fit.intercept, fit.r2, fit.n, fit.max_excess
                    );
                }
                Err(e) => {
                    let _ = writeln!(summary, "{label}: {e}");
                }
            }
        }
    }
    for f in &output.files {
        let _ = writeln!(summary, "wrote {}", f.display());
    }
    Ok(summary)
}
