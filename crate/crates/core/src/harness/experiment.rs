use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::{detect_stages, detect_stages_inner, generate_family, generate_todd, Family, StageSplit, ToddSpec};
use crate::conditioning::{iteration_bounds, OptimalCertificate};
use crate::error::{Error, Result};
use crate::format::{fmt_f64, to_json_line};
use crate::lp::LpInstance;
use crate::rng::derive_seed;
use crate::solver::{run_rpdhg, NormMode, SolveTrace, SolverConfig, Target, DEFAULT_BETA};

/// Column order of the batch CSV files.
pub const CSV_HEADER: [&str; 13] = [
    "seed",
    "m",
    "n",
    "kappa",
    "phi",
    "kphi_ln",
    "binv_a_norm",
    "xi",
    "w_norm",
    "total_iters",
    "stage1_iters",
    "stage2_iters",
    "term_reason",
];

const PERTURBATION_HEADER: [&str; 9] =
    ["family", "gamma", "phi", "kappa", "total_iters", "stage1_iters", "stage2_iters", "stage2_per_decade", "term_reason"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// `LP1`/`LP2` sweeps over `γ` to a relative-error target.
    Perturbation,
    /// Random batch solved to a distance target on `w = (x, s)`, with bounds.
    TwoStage,
    /// Random batch solved to a distance target on `(x, y)`.
    Regression,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Perturbation => "perturbation",
            ExperimentKind::TwoStage => "two_stage",
            ExperimentKind::Regression => "regression",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perturbation" => Ok(ExperimentKind::Perturbation),
            "two_stage" | "two-stage" => Ok(ExperimentKind::TwoStage),
            "regression" => Ok(ExperimentKind::Regression),
            other => Err(Error::InvalidParameter(format!("unknown experiment kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentParams {
    pub m: usize,
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    /// Target tolerance: distance for the random batches, relative error
    /// for the perturbation sweep.
    pub tol: f64,
    pub gammas: Vec<f64>,
    pub beta: f64,
    pub max_iters: usize,
    /// Worker threads; `0` uses the global pool.
    pub jobs: usize,
    pub use_projected_c: bool,
    /// Test the target at every OnePDHG iterate instead of only at restarts.
    pub check_every_iterate: bool,
    /// Metric of the normalized duality gap in the restart test.
    pub norm_mode: NormMode,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            m: 50,
            n: 100,
            count: 100,
            seed: 7,
            tol: 1e-4,
            gammas: vec![0.02, 0.005, 0.001],
            beta: DEFAULT_BETA,
            max_iters: 10_000_000,
            jobs: 0,
            use_projected_c: true,
            check_every_iterate: false,
            norm_mode: NormMode::MTilde,
        }
    }
}

/// One random instance of a batch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub index: usize,
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub kappa: f64,
    pub phi: f64,
    pub kphi_ln: f64,
    pub binv_a_norm: f64,
    pub xi: f64,
    pub w_norm: f64,
    pub total_iters: usize,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub term_reason: String,
    /// Support of the last outer iterate equals the optimal basis.
    pub stabilized: bool,
    /// Stage split on every iterate rather than on outer iterates.
    pub stage1_inner: usize,
    pub stage2_inner: usize,
    pub redraws: u32,
    pub restarts: usize,
    pub final_rel_err: f64,
    pub final_metric: f64,
    /// Bounds with `Φ̂ = 2Φ` at `ε = tol`.
    pub global_bound: f64,
    pub basis_bound: f64,
    pub local_bound: f64,
    pub error: Option<String>,
}

impl ExperimentRecord {
    fn csv_row(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.m.to_string(),
            self.n.to_string(),
            fmt_f64(self.kappa),
            fmt_f64(self.phi),
            fmt_f64(self.kphi_ln),
            fmt_f64(self.binv_a_norm),
            fmt_f64(self.xi),
            fmt_f64(self.w_norm),
            self.total_iters.to_string(),
            self.stage1_iters.to_string(),
            self.stage2_iters.to_string(),
            self.term_reason.clone(),
        ]
    }

    fn failed(index: usize, seed: u64, params: &ExperimentParams, err: &Error) -> Self {
        Self {
            index,
            seed,
            m: params.m,
            n: params.n,
            kappa: f64::NAN,
            phi: f64::NAN,
            kphi_ln: f64::NAN,
            binv_a_norm: f64::NAN,
            xi: f64::NAN,
            w_norm: f64::NAN,
            total_iters: 0,
            stage1_iters: 0,
            stage2_iters: 0,
            term_reason: "error".into(),
            stabilized: false,
            stage1_inner: 0,
            stage2_inner: 0,
            redraws: 0,
            restarts: 0,
            final_rel_err: f64::NAN,
            final_metric: f64::NAN,
            global_bound: f64::NAN,
            basis_bound: f64::NAN,
            local_bound: f64::NAN,
            error: Some(err.to_string()),
        }
    }
}

/// One `(family, γ)` solve of the perturbation sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationRecord {
    pub family: &'static str,
    pub gamma: f64,
    pub phi: f64,
    pub kappa: f64,
    pub total_iters: usize,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    /// Stage II iterations per decade of relative error.
    pub stage2_per_decade: Option<f64>,
    pub term_reason: String,
    /// `(OnePDHG count, relative error)` at every restart.
    pub rel_err_trace: Vec<(usize, f64)>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub perturbation: Vec<PerturbationRecord>,
    pub files: Vec<PathBuf>,
}

fn split_or_flag(result: Result<StageSplit>, total: usize) -> (usize, usize, bool) {
    match result {
        Ok(split) => (split.stage1_iters, split.stage2_iters, true),
        Err(_) => (total, 0, false),
    }
}

fn solver_config(inst: &LpInstance, target: Target, params: &ExperimentParams) -> Result<SolverConfig> {
    let mut config = SolverConfig::new(inst, target)?;
    config.beta = params.beta;
    config.max_onepdhg = params.max_iters;
    config.check_every_iterate = params.check_every_iterate;
    config.norm_mode = params.norm_mode;
    Ok(config)
}

/// Generates, analyzes and solves instance `index` of a random batch.
pub fn run_todd_instance(kind: ExperimentKind, params: &ExperimentParams, index: usize) -> ExperimentRecord {
    let seed = derive_seed(params.seed, index as u64);
    let spec = ToddSpec { m: params.m, n: params.n, seed, use_projected_c: params.use_projected_c };
    let attempt = || -> Result<ExperimentRecord> {
        let todd = generate_todd(&spec)?;
        let (inst, cert) = (&todd.instance, &todd.certificate);
        let target = match kind {
            ExperimentKind::TwoStage => Target::DistanceW { eps: params.tol },
            _ => Target::Distance { eps: params.tol },
        };
        let config = solver_config(inst, target, params)?;
        let (result, trace) = run_rpdhg(inst, &config, Some(cert))?;
        let bounds = iteration_bounds(inst, cert, params.tol, params.beta)?;
        let (stage1, stage2, stabilized) = split_or_flag(detect_stages(&trace, cert), result.onepdhg);
        let (stage1_inner, stage2_inner, _) = split_or_flag(detect_stages_inner(&trace, cert), result.onepdhg);
        let kphi = bounds.kappa * bounds.phi;
        Ok(ExperimentRecord {
            index,
            seed,
            m: params.m,
            n: params.n,
            kappa: bounds.kappa,
            phi: bounds.phi,
            kphi_ln: kphi * kphi.ln(),
            binv_a_norm: bounds.binv_times_a,
            xi: bounds.xi,
            w_norm: bounds.w_norm,
            total_iters: result.onepdhg,
            stage1_iters: stage1,
            stage2_iters: stage2,
            term_reason: result.termination.as_str().into(),
            stabilized,
            stage1_inner,
            stage2_inner,
            redraws: todd.redraws,
            restarts: result.restarts,
            final_rel_err: result.rel_err,
            final_metric: result.target_metric,
            global_bound: bounds.global_t.conservative,
            basis_bound: bounds.t_basis.conservative,
            local_bound: bounds.t_local,
            error: None,
        })
    };
    attempt().unwrap_or_else(|e| ExperimentRecord::failed(index, seed, params, &e))
}

fn per_decade(trace: &SolveTrace, split: &StageSplit) -> Option<f64> {
    let boundary = trace.restarts.iter().find(|r| r.total == split.stage1_iters)?;
    let last = trace.restarts.last()?;
    let decades = (boundary.rel_err / last.rel_err).log10();
    (decades >= 0.5 && split.stage2_iters > 0).then(|| split.stage2_iters as f64 / decades)
}

fn run_perturbation_case(family: Family, gamma: f64, params: &ExperimentParams) -> PerturbationRecord {
    let mut record = PerturbationRecord {
        family: family.as_str(),
        gamma,
        phi: f64::NAN,
        kappa: f64::NAN,
        total_iters: 0,
        stage1_iters: 0,
        stage2_iters: 0,
        stage2_per_decade: None,
        term_reason: "error".into(),
        rel_err_trace: Vec::new(),
        error: None,
    };
    let attempt = |record: &mut PerturbationRecord| -> Result<()> {
        let inst = generate_family(family, gamma)?;
        let cert: Option<OptimalCertificate> = crate::oracle::certify(&inst).ok();
        let config = solver_config(&inst, Target::RelativeError { eps: params.tol }, params)?;
        let (result, trace) = run_rpdhg(&inst, &config, cert.as_ref())?;
        record.total_iters = result.onepdhg;
        record.term_reason = result.termination.as_str().into();
        record.rel_err_trace = trace.restarts.iter().map(|r| (r.total, r.rel_err)).collect();
        record.stage1_iters = result.onepdhg;
        if let Some(cert) = cert {
            let bounds = iteration_bounds(&inst, &cert, params.tol, params.beta)?;
            record.phi = bounds.phi;
            record.kappa = bounds.kappa;
            if let Ok(split) = detect_stages(&trace, &cert) {
                record.stage1_iters = split.stage1_iters;
                record.stage2_iters = split.stage2_iters;
                record.stage2_per_decade = per_decade(&trace, &split);
            }
        }
        Ok(())
    };
    if let Err(e) = attempt(&mut record) {
        record.error = Some(e.to_string());
    }
    record
}

fn with_jobs<T: Send>(jobs: usize, work: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(work());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(work))
}

fn validate(kind: ExperimentKind, params: &ExperimentParams) -> Result<()> {
    if !(params.tol > 0.0 && params.tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tol = {} must be positive", params.tol)));
    }
    if !(params.beta > 0.0 && params.beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta = {} must lie in (0, 1)", params.beta)));
    }
    match kind {
        ExperimentKind::Perturbation => {
            if let Some(g) = params.gammas.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
                return Err(Error::InvalidParameter(format!("gamma = {g} must be nonnegative")));
            }
        }
        _ => {
            if params.m == 0 || params.m >= params.n {
                return Err(Error::InvalidParameter(format!(
                    "need 1 <= m < n, got m = {}, n = {}",
                    params.m, params.n
                )));
            }
        }
    }
    Ok(())
}

/// Runs an experiment; when `out` is given, writes `<kind>.csv` and
/// `<kind>.jsonl` into that directory. Per-instance failures are recorded
/// and do not stop the batch. Output order follows the instance index.
pub fn run_experiment(kind: ExperimentKind, params: &ExperimentParams, out: Option<&Path>) -> Result<ExperimentOutput> {
    validate(kind, params)?;
    let mut output = ExperimentOutput::default();
    match kind {
        ExperimentKind::Perturbation => {
            let cases: Vec<(Family, f64)> = [Family::Lp1, Family::Lp2]
                .into_iter()
                .flat_map(|f| params.gammas.iter().map(move |&g| (f, g)))
                .collect();
            output.perturbation = with_jobs(params.jobs, || {
                cases.par_iter().map(|&(f, g)| run_perturbation_case(f, g, params)).collect()
            })?;
        }
        ExperimentKind::TwoStage | ExperimentKind::Regression => {
            output.records = with_jobs(params.jobs, || {
                (0..params.count).into_par_iter().map(|i| run_todd_instance(kind, params, i)).collect()
            })?;
        }
    }
    if let Some(dir) = out {
        output.files = match kind {
            ExperimentKind::Perturbation => write_perturbation(&output.perturbation, dir)?,
            _ => write_records(&output.records, dir, kind.as_str())?,
        };
    }
    Ok(output)
}

/// Batch records as CSV text; the header is always present.
pub fn records_csv(records: &[ExperimentRecord]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER)?;
    for r in records {
        writer.write_record(r.csv_row())?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
}

/// Batch records as JSON lines.
pub fn records_jsonl(records: &[ExperimentRecord]) -> Result<String> {
    let mut body = String::new();
    for r in records {
        body.push_str(&to_json_line(r)?);
        body.push('\n');
    }
    Ok(body)
}

/// Writes `<stem>.csv` (header always present) and `<stem>.jsonl`.
pub fn write_records(records: &[ExperimentRecord], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, records_csv(records)?)?;
    let jsonl_path = dir.join(format!("{stem}.jsonl"));
    fs::write(&jsonl_path, records_jsonl(records)?)?;
    Ok(vec![csv_path, jsonl_path])
}

fn write_perturbation(records: &[PerturbationRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("perturbation.csv");
    let mut writer = csv::Writer::from_path(&csv_path)?;
    writer.write_record(PERTURBATION_HEADER)?;
    for r in records {
        writer.write_record([
            r.family.to_string(),
            fmt_f64(r.gamma),
            fmt_f64(r.phi),
            fmt_f64(r.kappa),
            r.total_iters.to_string(),
            r.stage1_iters.to_string(),
            r.stage2_iters.to_string(),
            r.stage2_per_decade.map(fmt_f64).unwrap_or_default(),
            r.term_reason.clone(),
        ])?;
    }
    writer.flush()?;
    let jsonl_path = dir.join("perturbation.jsonl");
    let mut body = String::new();
    for r in records {
        body.push_str(&to_json_line(r)?);
        body.push('\n');
    }
    fs::write(&jsonl_path, body)?;
    Ok(vec![csv_path, jsonl_path])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Predictor {
    /// `κΦ ln(κΦ)`.
    KphiLnKphi,
    /// `‖B⁻¹‖‖A‖`.
    BinvA,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Response {
    Total,
    /// Stage split on outer iterates.
    Stage1,
    Stage2,
    /// Stage split on every iterate `x^{n,k}`.
    Stage1Inner,
    Stage2Inner,
}

/// Unit-slope fit `log₁₀ response = log₁₀ predictor + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogLogFit {
    pub intercept: f64,
    /// `1 − SS_res / SS_tot` against the fitted line; may be negative.
    pub r2: f64,
    pub n: usize,
    /// Largest `log₁₀ response − log₁₀ fitted` over the points.
    pub max_excess: f64,
}

/// Fits pairs with positive finite predictor and response.
pub fn fit_unit_slope(predictor: &[f64], response: &[f64]) -> Result<LogLogFit> {
    if predictor.len() != response.len() {
        return Err(Error::DimensionMismatch("predictor and response lengths differ".into()));
    }
    let points: Vec<(f64, f64)> = predictor
        .iter()
        .zip(response)
        .filter(|(p, r)| **p > 0.0 && **r > 0.0 && p.is_finite() && r.is_finite())
        .map(|(p, r)| (p.log10(), r.log10()))
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!("{} usable points, need 2", points.len())));
    }
    let count = points.len() as f64;
    let intercept = points.iter().map(|(p, r)| r - p).sum::<f64>() / count;
    let mean = points.iter().map(|(_, r)| r).sum::<f64>() / count;
    let ss_res: f64 = points.iter().map(|(p, r)| (r - p - intercept).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|(_, r)| (r - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    let max_excess = points.iter().map(|(p, r)| r - p - intercept).fold(f64::NEG_INFINITY, f64::max);
    Ok(LogLogFit { intercept, r2, n: points.len(), max_excess })
}

/// [`fit_unit_slope`] over records that finished without error.
pub fn fit_loglog(records: &[ExperimentRecord], predictor: Predictor, response: Response) -> Result<LogLogFit> {
    let usable: Vec<&ExperimentRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let x: Vec<f64> = usable
        .iter()
        .map(|r| match predictor {
            Predictor::KphiLnKphi => r.kphi_ln,
            Predictor::BinvA => r.binv_a_norm,
        })
        .collect();
    let y: Vec<f64> = usable
        .iter()
        .map(|r| match response {
            Response::Total => r.total_iters,
            Response::Stage1 => r.stage1_iters,
            Response::Stage2 => r.stage2_iters,
            Response::Stage1Inner => r.stage1_inner,
            Response::Stage2Inner => r.stage2_inner,
        } as f64)
        .collect();
    fit_unit_slope(&x, &y)
}
