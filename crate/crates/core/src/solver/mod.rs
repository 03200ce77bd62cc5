//! Restarted primal-dual hybrid gradient.
//!
//! One OnePDHG step is
//!
//! ```text
//! x' = (x − τ(c − Aᵀy))⁺
//! y' = y + σ(b − A(2x' − x))
//! ```
//!
//! The restarted method runs OnePDHG in inner loops from an outer iterate
//! `z^{n,0}`, keeps the running average `z̄^{n,k}`, and restarts from the
//! average once its normalized duality gap has dropped by a factor `β`
//! relative to the gap recorded at the previous restart.

pub mod checks;
mod gap;
mod trace;

pub use gap::{
    gap_direction, nonnegative_qp, normalized_duality_gap, normalized_duality_gap_with_tol, solve_gap, GapSolution,
    NormMode, DEFAULT_BISECTION_TOL,
};
pub use trace::{InnerRecord, RestartRecord, SolveTrace, TraceLevel};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize, Serializer};

use crate::conditioning::OptimalCertificate;
use crate::error::{Error, Result};
use crate::lp::{duality_gap, relative_error, LpInstance, PrimalDualPoint};
use crate::spectral::{extreme_singular_values, SpectralData, StepSizes};

/// `τ = 1/(2κ)` and `σ = 1/(2λ_max λ_min)`, so that `τσλ_max² = 1/4`.
pub fn default_step_sizes(spec: &SpectralData) -> StepSizes {
    StepSizes { tau: 1.0 / (2.0 * spec.kappa), sigma: 1.0 / (2.0 * spec.lambda_max * spec.lambda_min) }
}

/// Default restart factor `1/e`.
pub const DEFAULT_BETA: f64 = 1.0 / std::f64::consts::E;

/// Entries above `1e-9 · (1 + ‖x‖∞)` count as part of the support.
pub fn support(x: &DVector<f64>) -> Vec<usize> {
    let threshold = 1e-9 * (1.0 + x.amax());
    x.iter().enumerate().filter(|(_, &v)| v > threshold).map(|(i, _)| i).collect()
}

/// Convergence target checked at each new outer iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// Euclidean distance of `(x, y)` to the certificate's `(x*, y*)`.
    Distance { eps: f64 },
    /// Euclidean distance of `w = (x, c − Aᵀy)` to `(x*, s*)`.
    DistanceW { eps: f64 },
    /// [`relative_error`] at most `eps`.
    RelativeError { eps: f64 },
}

impl Target {
    pub fn eps(&self) -> f64 {
        match *self {
            Target::Distance { eps } | Target::DistanceW { eps } | Target::RelativeError { eps } => eps,
        }
    }

    fn needs_certificate(&self) -> bool {
        !matches!(self, Target::RelativeError { .. })
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub steps: StepSizes,
    pub beta: f64,
    pub norm_mode: NormMode,
    pub target: Target,
    pub max_onepdhg: usize,
    pub bisection_tol: f64,
    pub trace_level: TraceLevel,
    /// Starting point; the origin when `None`.
    pub warm_start: Option<PrimalDualPoint>,
    /// Also test the target at every OnePDHG iterate `z^{n,k}`, not only at
    /// outer iterates.
    pub check_every_iterate: bool,
}

impl SolverConfig {
    /// Default configuration: step sizes from the spectrum of `A`, `β = 1/e`,
    /// the `M̃` norm for restart tests, and restart-level tracing.
    pub fn new(inst: &LpInstance, target: Target) -> Result<Self> {
        let spec = extreme_singular_values(inst.a())?;
        Ok(Self::with_spectrum(&spec, target))
    }

    pub fn with_spectrum(spec: &SpectralData, target: Target) -> Self {
        Self {
            steps: default_step_sizes(spec),
            beta: DEFAULT_BETA,
            norm_mode: NormMode::MTilde,
            target,
            max_onepdhg: 10_000_000,
            bisection_tol: DEFAULT_BISECTION_TOL,
            trace_level: TraceLevel::Restarts,
            warm_start: None,
            check_every_iterate: false,
        }
    }

    fn validate(&self, inst: &LpInstance) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta = {} must lie in (0, 1)", self.beta)));
        }
        let eps = self.target.eps();
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("target tolerance {eps} must be positive")));
        }
        if !(self.bisection_tol > 0.0) {
            return Err(Error::InvalidParameter("bisection tolerance must be positive".into()));
        }
        let spec = extreme_singular_values(inst.a())?;
        StepSizes::validated(self.steps.tau, self.steps.sigma, spec.lambda_max)?;
        if let Some(start) = &self.warm_start {
            if start.x.len() != inst.n() || start.y.len() != inst.m() {
                return Err(Error::DimensionMismatch("warm start has the wrong shape".into()));
            }
            if start.x.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::InvalidParameter("warm start x must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// One OnePDHG step.
pub fn pdhg_step(inst: &LpInstance, z: &PrimalDualPoint, steps: &StepSizes) -> PrimalDualPoint {
    let a = inst.a();
    let x_new = (&z.x - (inst.c() - a.tr_mul(&z.y)) * steps.tau).map(|v| v.max(0.0));
    let extrapolated = &x_new * 2.0 - &z.x;
    let y_new = &z.y + (inst.b() - a * extrapolated) * steps.sigma;
    PrimalDualPoint::new(x_new, y_new)
}

/// Quantities the restart test compares.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RestartSnapshot {
    /// Outer loop index.
    pub n: usize,
    /// Inner iterations completed in this loop (at least 1).
    pub k: usize,
    /// `ρ(‖z̄^{n,k} − z^{n,0}‖; z̄^{n,k})`.
    pub rho_candidate: f64,
    /// `ρ(‖z^{n,0} − z^{n−1,0}‖; z^{n,0})`, cached at the start of the loop.
    pub rho_reference: f64,
}

pub fn restart_triggered(state: &RestartSnapshot, beta: f64) -> bool {
    (state.n == 0 && state.k == 1) || state.rho_candidate <= beta * state.rho_reference
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TargetReached,
    /// The normalized duality gap at an outer iterate was exactly zero.
    Stationary,
    IterationLimit,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::TargetReached => "target_reached",
            Termination::Stationary => "stationary",
            Termination::IterationLimit => "iteration_limit",
        }
    }
}

fn ser_vec<S: Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    #[serde(serialize_with = "ser_vec")]
    pub x: DVector<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub y: DVector<f64>,
    #[serde(serialize_with = "ser_vec")]
    pub s: DVector<f64>,
    pub onepdhg: usize,
    pub restarts: usize,
    pub termination: Termination,
    pub gap: f64,
    pub rel_err: f64,
    /// Value of the target metric at the returned point.
    pub target_metric: f64,
}

impl SolveResult {
    pub fn summary(&self) -> String {
        format!(
            "termination={} onepdhg={} restarts={} rel_err={:.3e} gap={:.3e} target_metric={:.3e}",
            self.termination.as_str(),
            self.onepdhg,
            self.restarts,
            self.rel_err,
            self.gap,
            self.target_metric
        )
    }
}

/// Working state of the driver; products `Ax`, `Aᵀy` are kept alongside.
struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    ax: DVector<f64>,
    aty: DVector<f64>,
}

impl Iterate {
    fn at(a: &DMatrix<f64>, x: DVector<f64>, y: DVector<f64>) -> Self {
        let ax = a * &x;
        let aty = a.tr_mul(&y);
        Self { x, y, ax, aty }
    }

    fn zeros_like(&self) -> Self {
        Self {
            x: DVector::zeros(self.x.len()),
            y: DVector::zeros(self.y.len()),
            ax: DVector::zeros(self.ax.len()),
            aty: DVector::zeros(self.aty.len()),
        }
    }

    /// `self ← self + (other − self)/k`.
    fn average_in(&mut self, other: &Iterate, k: usize) {
        let w = 1.0 / k as f64;
        self.x += (&other.x - &self.x) * w;
        self.y += (&other.y - &self.y) * w;
        self.ax += (&other.ax - &self.ax) * w;
        self.aty += (&other.aty - &self.aty) * w;
    }
}

struct Driver<'a> {
    inst: &'a LpInstance,
    config: &'a SolverConfig,
    cert: Option<&'a OptimalCertificate>,
}

impl Driver<'_> {
    /// Distance between two iterates in the configured norm.
    fn distance(&self, u: &Iterate, v: &Iterate, mode: NormMode) -> f64 {
        let dx = &u.x - &v.x;
        let dy = &u.y - &v.y;
        match mode {
            NormMode::MTilde => self.config.steps.mtilde_norm(&dx, &dy),
            NormMode::M => self.config.steps.m_norm_with(&dx, &dy, &(&u.ax - &v.ax)),
        }
    }

    fn rho(&self, z: &Iterate, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Ok(0.0);
        }
        let (dx, dy) = gap_direction(self.inst, &z.x, &z.aty, &z.ax);
        let sol = solve_gap(self.inst.a(), &z.x, &dx, &dy, r, &self.config.steps, self.config.norm_mode, self.config.bisection_tol)?;
        Ok(sol.rho)
    }

    fn target_metric(&self, z: &Iterate) -> f64 {
        match (self.config.target, self.cert) {
            (Target::RelativeError { .. }, _) => relative_error(self.inst, &z.x, &z.y),
            (Target::Distance { .. }, Some(cert)) => {
                ((&z.x - &cert.x).norm_squared() + (&z.y - &cert.y).norm_squared()).sqrt()
            }
            (Target::DistanceW { .. }, Some(cert)) => {
                let s = self.inst.c() - &z.aty;
                ((&z.x - &cert.x).norm_squared() + (s - &cert.s).norm_squared()).sqrt()
            }
            _ => f64::INFINITY,
        }
    }

    fn result(&self, z: &Iterate, onepdhg: usize, restarts: usize, termination: Termination) -> SolveResult {
        SolveResult {
            s: self.inst.c() - &z.aty,
            x: z.x.clone(),
            y: z.y.clone(),
            onepdhg,
            restarts,
            termination,
            gap: duality_gap(self.inst, &z.x, &z.y),
            rel_err: relative_error(self.inst, &z.x, &z.y),
            target_metric: self.target_metric(z),
        }
    }
}

/// Runs rPDHG from the origin (or the configured warm start).
///
/// Termination is tested at every new outer iterate, and additionally at
/// every OnePDHG iterate when `check_every_iterate` is set. Reaching
/// `max_onepdhg` is not an error: the result is flagged
/// [`Termination::IterationLimit`] and carries the better of the current
/// outer iterate and the running average.
pub fn run_rpdhg(
    inst: &LpInstance,
    config: &SolverConfig,
    certificate: Option<&OptimalCertificate>,
) -> Result<(SolveResult, SolveTrace)> {
    config.validate(inst)?;
    if config.target.needs_certificate() && certificate.is_none() {
        return Err(Error::MissingCertificate("distance targets need the optimal solution".into()));
    }
    if let Some(cert) = certificate {
        if cert.x.len() != inst.n() || cert.y.len() != inst.m() {
            return Err(Error::DimensionMismatch("certificate does not match the instance".into()));
        }
    }
    let driver = Driver { inst, config, cert: certificate };
    let a = inst.a();
    let (tau, sigma) = (config.steps.tau, config.steps.sigma);
    let full = config.trace_level == TraceLevel::Full;

    let start = config.warm_start.clone().unwrap_or_else(|| PrimalDualPoint::origin(inst));
    let mut trace = SolveTrace::new(start.clone(), config.trace_level);
    let mut outer = Iterate::at(a, start.x, start.y);
    let mut current = Iterate::at(a, outer.x.clone(), outer.y.clone());
    let mut rho_reference = f64::INFINITY;
    let mut total = 0usize;
    let mut n = 0usize;
    let b = inst.b();
    let c = inst.c();

    loop {
        let mut avg = current.zeros_like();
        let mut k = 0usize;
        let rho_new = loop {
            // OnePDHG, reusing the cached products.
            let x_new = (&current.x - (c - &current.aty) * tau).map(|v| v.max(0.0));
            let ax_new = a * &x_new;
            let y_new = &current.y + (b - &ax_new * 2.0 + &current.ax) * sigma;
            let aty_new = a.tr_mul(&y_new);
            current = Iterate { x: x_new, y: y_new, ax: ax_new, aty: aty_new };
            total += 1;
            trace.note_support(total, &current.x);
            if config.check_every_iterate && driver.target_metric(&current) <= config.target.eps() {
                trace.total_onepdhg = total;
                return Ok((driver.result(&current, total, n, Termination::TargetReached), trace));
            }
            k += 1;
            avg.average_in(&current, k);

            let first = n == 0 && k == 1;
            let (candidate, radius) = if first {
                (None, driver.distance(&avg, &outer, config.norm_mode))
            } else {
                let r = driver.distance(&avg, &outer, config.norm_mode);
                (Some(driver.rho(&avg, r)?), r)
            };
            if full {
                let mtilde = config.steps.mtilde_norm(&(&avg.x - &outer.x), &(&avg.y - &outer.y));
                trace.push_inner(inst, n, k, &current.x, &current.y, &avg.x, &avg.y, candidate, radius, mtilde);
            }
            let snapshot = RestartSnapshot {
                n,
                k,
                rho_candidate: candidate.unwrap_or(f64::INFINITY),
                rho_reference,
            };
            if restart_triggered(&snapshot, config.beta) {
                break match candidate {
                    Some(rho) => rho,
                    None => driver.rho(&avg, radius)?,
                };
            }
            if total >= config.max_onepdhg {
                let averaged = Iterate::at(a, avg.x.clone(), avg.y.clone());
                let best = if driver.target_metric(&averaged) < driver.target_metric(&outer) { &averaged } else { &outer };
                let result = driver.result(best, total, n, Termination::IterationLimit);
                trace.total_onepdhg = total;
                return Ok((result, trace));
            }
        };

        if avg.x.iter().chain(avg.y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::ConvergenceFailure("rPDHG iterates"));
        }
        // Restart from the average; products are recomputed exactly.
        let next = Iterate::at(a, avg.x, avg.y);
        let moved = config.steps.mtilde_norm(&(&next.x - &outer.x), &(&next.y - &outer.y));
        outer = next;
        trace.note_support(total, &outer.x);
        current = Iterate::at(a, outer.x.clone(), outer.y.clone());
        rho_reference = rho_new;
        let record = RestartRecord {
            n,
            k,
            total,
            rho: rho_new,
            mtilde_dist_moved: moved,
            support_size: support(&outer.x).len(),
            gap: duality_gap(inst, &outer.x, &outer.y),
            rel_err: relative_error(inst, &outer.x, &outer.y),
            x: outer.x.clone(),
            y: outer.y.clone(),
        };
        trace.restarts.push(record);
        n += 1;

        let metric = driver.target_metric(&outer);
        let termination = if metric <= config.target.eps() {
            Some(Termination::TargetReached)
        } else if rho_new == 0.0 {
            Some(Termination::Stationary)
        } else if total >= config.max_onepdhg {
            Some(Termination::IterationLimit)
        } else {
            None
        };
        if let Some(reason) = termination {
            trace.total_onepdhg = total;
            return Ok((driver.result(&outer, total, n, reason), trace));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn t0() -> LpInstance {
        LpInstance::from_rows("T0", &[vec![1.0, 1.0]], &[1.0], &[0.0, 1.0]).unwrap()
    }

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn default_steps_examples() {
        let lp1 = SpectralData { lambda_max: 3f64.sqrt(), lambda_min: 3f64.sqrt(), kappa: 1.0 };
        let s = default_step_sizes(&lp1);
        assert_eq!(s.tau, 0.5);
        assert_relative_eq!(s.sigma, 1.0 / 6.0, max_relative = 1e-15);
        let id = SpectralData { lambda_max: 1.0, lambda_min: 1.0, kappa: 1.0 };
        assert_eq!(default_step_sizes(&id), StepSizes { tau: 0.5, sigma: 0.5 });
        let lp2 = SpectralData { lambda_max: 3f64.sqrt(), lambda_min: 2f64.sqrt(), kappa: 1.5f64.sqrt() };
        let s = default_step_sizes(&lp2);
        assert_relative_eq!(s.tau, 0.4082, epsilon = 1e-4);
        assert_relative_eq!(s.sigma, 0.2041, epsilon = 1e-4);
        assert_relative_eq!(s.tau * s.sigma * 3.0, 0.25, max_relative = 1e-14);
    }

    #[test]
    fn step_examples_t0() {
        let inst = t0();
        let steps = StepSizes { tau: 0.5, sigma: 0.5 };
        let z = pdhg_step(&inst, &PrimalDualPoint::origin(&inst), &steps);
        assert_eq!(z.x, dv(&[0.0, 0.0]));
        assert_eq!(z.y, dv(&[0.5]));
        let opt = PrimalDualPoint::new(dv(&[1.0, 0.0]), dv(&[0.0]));
        assert_eq!(pdhg_step(&inst, &opt, &steps), opt);
    }

    #[test]
    fn restart_rule_examples() {
        let snap = |n, k, c, r| RestartSnapshot { n, k, rho_candidate: c, rho_reference: r };
        assert!(restart_triggered(&snap(0, 1, 5.0, 0.0), DEFAULT_BETA));
        assert!(restart_triggered(&snap(3, 4, 0.0, 1.0), DEFAULT_BETA));
        assert!(!restart_triggered(&snap(3, 4, 0.5, 1.0), DEFAULT_BETA));
        assert!(restart_triggered(&snap(3, 4, 0.3, 1.0), DEFAULT_BETA));
    }

    #[test]
    fn solves_t0() {
        let inst = t0();
        let cert = crate::oracle::certify(&inst).unwrap();
        let config = SolverConfig::new(&inst, Target::Distance { eps: 1e-6 }).unwrap();
        let (res, trace) = run_rpdhg(&inst, &config, Some(&cert)).unwrap();
        assert_eq!(res.termination, Termination::TargetReached);
        assert!((res.x[0] - 1.0).abs() < 1e-6 && res.x[1].abs() < 1e-6);
        assert_eq!(trace.total_onepdhg, res.onepdhg);
        assert_eq!(trace.restarts.iter().map(|r| r.k).sum::<usize>(), res.onepdhg);
    }

    #[test]
    fn optimal_start_takes_one_step() {
        let inst = LpInstance::from_rows("zero", &[vec![1.0, 1.0]], &[0.0], &[1.0, 2.0]).unwrap();
        let config = SolverConfig::new(&inst, Target::RelativeError { eps: 1e-9 }).unwrap();
        let (res, trace) = run_rpdhg(&inst, &config, None).unwrap();
        assert_eq!(res.onepdhg, 1);
        assert_eq!(trace.restarts.len(), 1);
        assert_eq!(trace.restarts[0].n, 0);
    }

    #[test]
    fn iteration_limit_is_flagged() {
        let inst = t0();
        let mut config = SolverConfig::new(&inst, Target::RelativeError { eps: 1e-300 }).unwrap();
        config.max_onepdhg = 25;
        let (res, _) = run_rpdhg(&inst, &config, None).unwrap();
        assert_eq!(res.termination, Termination::IterationLimit);
        assert_eq!(res.onepdhg, 25);
    }

    #[test]
    fn distance_target_requires_certificate() {
        let inst = t0();
        let config = SolverConfig::new(&inst, Target::Distance { eps: 1e-6 }).unwrap();
        assert!(matches!(run_rpdhg(&inst, &config, None), Err(Error::MissingCertificate(_))));
    }

    #[test]
    fn rejects_bad_config() {
        let inst = t0();
        let mut config = SolverConfig::new(&inst, Target::RelativeError { eps: 1e-6 }).unwrap();
        config.beta = 1.0;
        assert!(matches!(run_rpdhg(&inst, &config, None), Err(Error::InvalidParameter(_))));
        config.beta = 0.5;
        config.steps = StepSizes { tau: 1.0, sigma: 1.0 };
        assert!(matches!(run_rpdhg(&inst, &config, None), Err(Error::InvalidStepSizes { .. })));
    }

    #[test]
    fn full_trace_averages_are_exact_means() {
        let inst = LpInstance::from_rows("LP1", &[vec![1.0, 1.0, 1.0]], &[2.0], &[2.0, -1.05, -0.95]).unwrap();
        let mut config = SolverConfig::new(&inst, Target::RelativeError { eps: 1e-8 }).unwrap();
        config.trace_level = TraceLevel::Full;
        let (res, trace) = run_rpdhg(&inst, &config, None).unwrap();
        assert_eq!(trace.inner.len(), res.onepdhg);
        let mut sum_x = DVector::zeros(3);
        let mut sum_y = DVector::zeros(1);
        for rec in &trace.inner {
            if rec.k == 1 {
                sum_x.fill(0.0);
                sum_y.fill(0.0);
            }
            sum_x += &rec.x;
            sum_y += &rec.y;
            let kf = rec.k as f64;
            assert!((&sum_x / kf - &rec.x_avg).amax() <= 1e-12 * (1.0 + sum_x.amax() / kf));
            assert!((&sum_y / kf - &rec.y_avg).amax() <= 1e-12 * (1.0 + sum_y.amax() / kf));
        }
    }

    #[test]
    fn deterministic_traces() {
        let inst = LpInstance::from_rows("LP1", &[vec![1.0, 1.0, 1.0]], &[2.0], &[2.0, -1.01, -0.99]).unwrap();
        let config = SolverConfig::new(&inst, Target::RelativeError { eps: 1e-8 }).unwrap();
        let (_, t1) = run_rpdhg(&inst, &config, None).unwrap();
        let (_, t2) = run_rpdhg(&inst, &config, None).unwrap();
        assert_eq!(t1.to_jsonl().unwrap(), t2.to_jsonl().unwrap());
    }
}
